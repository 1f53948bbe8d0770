#pragma once

// Trimap initialisation from four extreme clicks: an edge-probability map,
// minimum-cost boundary paths between consecutive clicks, a filled
// pseudo-mask, its morphological skeleton, and the final clamped trimap.
// The rectangle baseline lives here too.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "extrseg/error.hpp"
#include "extrseg/raster.hpp"

namespace extrseg {

inline constexpr double kEdgeFloor = 1e-3;

struct ExtremeClicks {
  Point top;
  Point bottom;
  Point left;
  Point right;

  std::array<Point, 4> in_boundary_order() const noexcept { return {top, right, bottom, left}; }

  /// Tight bounding box of the four clicks.
  Box box() const noexcept {
    Box b{top.x, top.y, top.x, top.y};
    for (const Point& p : {bottom, left, right}) {
      b.x0 = std::min(b.x0, p.x);
      b.y0 = std::min(b.y0, p.y);
      b.x1 = std::max(b.x1, p.x);
      b.y1 = std::max(b.y1, p.y);
    }
    return b;
  }

  /// Rounded mean of the four clicks.
  Point centroid() const noexcept {
    const double cx = (top.x + bottom.x + left.x + right.x) / 4.0;
    const double cy = (top.y + bottom.y + left.y + right.y) / 4.0;
    return {static_cast<int>(std::lround(cx)), static_cast<int>(std::lround(cy))};
  }

  /// Roles from unordered points by coordinate extremes; earlier points win ties.
  static ExtremeClicks from_points(std::span<const Point, 4> pts) noexcept {
    ExtremeClicks c{pts[0], pts[0], pts[0], pts[0]};
    for (const Point& p : pts.subspan<1>()) {
      if (p.y < c.top.y) c.top = p;
      if (p.y > c.bottom.y) c.bottom = p;
      if (p.x < c.left.x) c.left = p;
      if (p.x > c.right.x) c.right = p;
    }
    return c;
  }

  friend bool operator==(const ExtremeClicks&, const ExtremeClicks&) = default;
};

/// Per-pixel probability of lying on an edge, in [kEdgeFloor, 1].
using EdgeProbabilityMap = ScalarMap;

struct BoundaryPath {
  std::vector<Point> nodes;
  double cost = 0.0;
};

/// Sobel gradient magnitude of the luma, divided by its maximum and clamped
/// to [kEdgeFloor, 1]. Borders use replicated-edge padding.
inline EdgeProbabilityMap edge_probability(const RasterImage& image) {
  const ScalarMap luma = to_grayscale(image);
  const int w = image.width();
  const int h = image.height();
  auto at = [&](int x, int y) {
    return luma(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  ScalarMap mag(w, h, 0.0);
  double peak = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
      const double m = std::sqrt(gx * gx + gy * gy);
      mag(x, y) = m;
      peak = std::max(peak, m);
    }
  EdgeProbabilityMap prob(w, h, kEdgeFloor);
  if (!(peak > 0.0)) return prob;
  for (std::size_t i = 0; i < prob.size(); ++i) prob[i] = std::clamp(mag[i] / peak, kEdgeFloor, 1.0);
  return prob;
}

namespace detail {

inline ScalarMap node_costs(const EdgeProbabilityMap& prob) {
  ScalarMap cost(prob.width(), prob.height(), 0.0);
  for (std::size_t i = 0; i < prob.size(); ++i) cost[i] = -std::log(prob[i]);
  return cost;
}

inline BoundaryPath shortest_path(const ScalarMap& cost, Point a, Point b, const Box& box) {
  if (!box.contains(a) || !box.contains(b)) throw Error(Errc::PointOutsideBox, "path endpoint outside box");
  if (box.x0 < 0 || box.y0 < 0 || box.x1 >= cost.width() || box.y1 >= cost.height())
    throw Error(Errc::PointOutsideBox, "box exceeds the cost map");

  const int bw = box.width();
  const std::size_t n = static_cast<std::size_t>(bw) * static_cast<std::size_t>(box.height());
  auto local = [&](Point p) {
    return static_cast<std::size_t>(p.y - box.y0) * static_cast<std::size_t>(bw) + static_cast<std::size_t>(p.x - box.x0);
  };
  auto global = [&](std::size_t i) {
    return Point{box.x0 + static_cast<int>(i % static_cast<std::size_t>(bw)),
                 box.y0 + static_cast<int>(i / static_cast<std::size_t>(bw))};
  };

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> prev(n, kNone);
  std::vector<std::uint8_t> done(n, 0);
  // Entries ordered by (distance, local row-major index), both ascending.
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

  const std::size_t src = local(a);
  const std::size_t dst = local(b);
  dist[src] = cost(a.x, a.y);
  heap.emplace(dist[src], src);
  while (!heap.empty()) {
    const auto [d, i] = heap.top();
    heap.pop();
    if (done[i]) continue;
    done[i] = 1;
    if (i == dst) break;
    const Point p = global(i);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        const Point q{p.x + dx, p.y + dy};
        if (!box.contains(q)) continue;
        const std::size_t j = local(q);
        if (done[j]) continue;
        const double nd = d + cost(q.x, q.y);
        if (nd < dist[j]) {
          dist[j] = nd;
          prev[j] = i;
          heap.emplace(nd, j);
        }
      }
  }

  BoundaryPath path;
  path.cost = dist[dst];
  for (std::size_t i = dst; i != kNone; i = prev[i]) path.nodes.push_back(global(i));
  std::reverse(path.nodes.begin(), path.nodes.end());
  return path;
}

}  // namespace detail

/// Dijkstra over 8-connected pixels inside `box` with node cost -log(prob).
/// The path cost counts both endpoints.
inline BoundaryPath min_cost_path(const EdgeProbabilityMap& prob, Point a, Point b, const Box& box) {
  return detail::shortest_path(detail::node_costs(prob), a, b, box);
}

/// Region enclosed by the four boundary paths: a 4-connected flood fill from
/// the click centroid, blocked by the path pixels, unioned with the paths.
/// Degenerate geometry (thin box, centroid on the boundary, fill reaching the
/// box border) falls back to the whole box.
inline BinaryMask pseudo_mask(std::span<const BoundaryPath> paths, const ExtremeClicks& clicks, const Box& box,
                              int width, int height) {
  BinaryMask boundary(width, height, 0);
  for (const auto& path : paths)
    for (const Point& p : path.nodes)
      if (boundary.in_bounds(p)) boundary(p.x, p.y) = 1;

  auto full_box = [&] {
    BinaryMask m(width, height, 0);
    for (int y = std::max(box.y0, 0); y <= std::min(box.y1, height - 1); ++y)
      for (int x = std::max(box.x0, 0); x <= std::min(box.x1, width - 1); ++x) m(x, y) = 1;
    return m;
  };

  const Point seed = clicks.centroid();
  if (box.width() < 3 || box.height() < 3 || !boundary.in_bounds(seed) || !box.contains(seed) ||
      boundary(seed.x, seed.y))
    return full_box();

  BinaryMask region = boundary;
  std::vector<Point> stack{seed};
  region(seed.x, seed.y) = 1;
  while (!stack.empty()) {
    const Point p = stack.back();
    stack.pop_back();
    if (box.on_border(p)) return full_box();  // leaked through a gap
    for (const Point& o : {Point{1, 0}, Point{-1, 0}, Point{0, 1}, Point{0, -1}}) {
      const Point q{p.x + o.x, p.y + o.y};
      if (!box.contains(q) || region(q.x, q.y)) continue;
      region(q.x, q.y) = 1;
      stack.push_back(q);
    }
  }
  return region;
}

/// Lantuejoul skeleton with the 3x3 cross: the union over k of
/// erode^k(M) minus open(erode^k(M)). Pixels outside the image count as
/// background.
///
/// erode^k(M) is {d > k} for the city-block distance d to the background, so
/// a pixel belongs to the skeleton exactly when no 4-neighbour has a larger
/// distance. That turns the iterated construction into one linear pass.
inline BinaryMask morphological_skeleton(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<int> d(mask.size(), 0);
  auto at = [&](int x, int y) { return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : d[mask.index(x, y)]; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask(x, y)) d[mask.index(x, y)] = std::min(at(x - 1, y), at(x, y - 1)) + 1;
  for (int y = h - 1; y >= 0; --y)
    for (int x = w - 1; x >= 0; --x)
      if (mask(x, y)) {
        int& v = d[mask.index(x, y)];
        v = std::min(v, std::min(at(x + 1, y), at(x, y + 1)) + 1);
      }

  BinaryMask skel(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int v = at(x, y);
      if (v == 0) continue;
      if (at(x - 1, y) <= v && at(x + 1, y) <= v && at(x, y - 1) <= v && at(x, y + 1) <= v) skel(x, y) = 1;
    }
  return skel;
}

/// Intermediate products of the extreme-click initialisation, kept for
/// inspection and tests.
struct ExtremeInit {
  Trimap trimap;
  Box box;
  std::array<BoundaryPath, 4> paths;
  BinaryMask pseudo;
  BinaryMask skeleton;
};

inline ExtremeInit build_extreme_init(const RasterImage& image, const ExtremeClicks& clicks) {
  for (const Point& p : {clicks.top, clicks.bottom, clicks.left, clicks.right})
    if (!image.in_bounds(p))
      throw Error(Errc::ClicksOutOfBounds,
                  "click (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside image");

  ExtremeInit init;
  init.box = clicks.box();
  const ScalarMap cost = detail::node_costs(edge_probability(image));
  const auto order = clicks.in_boundary_order();
  for (std::size_t i = 0; i < 4; ++i)
    init.paths[i] = detail::shortest_path(cost, order[i], order[(i + 1) % 4], init.box);
  init.pseudo = pseudo_mask(init.paths, clicks, init.box, image.width(), image.height());
  init.skeleton = morphological_skeleton(init.pseudo);

  Trimap& t = init.trimap;
  t = Trimap(image.width(), image.height(), TrimapLabel::DefiniteBG);
  for (int y = init.box.y0; y <= init.box.y1; ++y)
    for (int x = init.box.x0; x <= init.box.x1; ++x)
      t(x, y) = init.pseudo(x, y) ? TrimapLabel::ProbableFG : TrimapLabel::ProbableBG;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (init.skeleton[i]) t[i] = TrimapLabel::DefiniteFG;
  for (const Point& p : {clicks.top, clicks.bottom, clicks.left, clicks.right, clicks.centroid()})
    t(p.x, p.y) = TrimapLabel::DefiniteFG;
  return init;
}

/// Box -> ProbableBG/ProbableFG by pseudo-mask, outside -> DefiniteBG, then
/// skeleton, clicks and click centroid clamped to DefiniteFG.
inline Trimap build_trimap_extr(const RasterImage& image, const ExtremeClicks& clicks) {
  return build_extreme_init(image, clicks).trimap;
}

/// Rectangle baseline: ProbableFG inside the box, DefiniteBG outside.
inline Trimap build_trimap_rect(const Box& box, int width, int height) {
  if (box.x0 > box.x1 || box.y0 > box.y1 || box.x0 < 0 || box.y0 < 0 || box.x1 >= width || box.y1 >= height)
    throw Error(Errc::BoxOutOfBounds, "box does not lie within the canvas");
  Trimap t(width, height, TrimapLabel::DefiniteBG);
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) t(x, y) = TrimapLabel::ProbableFG;
  return t;
}

}  // namespace extrseg
