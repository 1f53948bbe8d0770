#pragma once

// s/t grid graph for the GrabCut energy and an exact min-cut solver.
//
// The solver is a Boykov-Kolmogorov augmenting-path max-flow specialised to
// an 8-connected grid: arcs are implicit (node, direction) pairs, so no
// adjacency lists are stored.

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <vector>

#include "extrseg/color_model.hpp"
#include "extrseg/error.hpp"
#include "extrseg/raster.hpp"

namespace extrseg {

inline constexpr double kDefaultGamma = 50.0;
inline constexpr double kDefaultHardWeight = 1e5;

struct SmoothnessParams {
  double gamma = kDefaultGamma;
  double beta = 0.0;
  double hard_weight = kDefaultHardWeight;
};

/// Neighbour slots stored once per undirected pair.
enum class Link : int { East = 0, South = 1, SouthEast = 2, SouthWest = 3 };

inline constexpr std::array<Point, 4> kLinkOffsets{{{1, 0}, {0, 1}, {1, 1}, {-1, 1}}};

/// Capacities of the pixel graph. Source side is foreground.
struct GridGraph {
  int width = 0;
  int height = 0;
  std::vector<double> source_cap;
  std::vector<double> sink_cap;
  /// Per pixel, capacity to the E, S, SE and SW neighbour (0 past the border).
  std::vector<std::array<double, 4>> neighbor_cap;

  GridGraph() = default;
  GridGraph(int w, int h)
      : width(w),
        height(h),
        source_cap(detail::checked_area(w, h), 0.0),
        sink_cap(source_cap.size(), 0.0),
        neighbor_cap(source_cap.size(), {0.0, 0.0, 0.0, 0.0}) {}

  std::size_t size() const noexcept { return source_cap.size(); }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
  bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width && y < height; }
};

struct CutResult {
  double flow_value = 0.0;
  /// 1 = source side (foreground), 0 = sink side.
  BinaryMask side;
};

/// beta = 1 / (2 <|z_m - z_n|^2>) over all 8-neighbour pairs; 0 for a constant image.
inline double compute_beta(const RasterImage& image) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (const Point& o : kLinkOffsets) {
        const int nx = x + o.x;
        const int ny = y + o.y;
        if (!image.in_bounds(nx, ny)) continue;
        sum += squared_distance(image(x, y), image(nx, ny));
        ++pairs;
      }
  if (pairs == 0 || !(sum > 0.0)) return 0.0;
  return 1.0 / (2.0 * (sum / static_cast<double>(pairs)));
}

/// gamma * exp(-beta |dz|^2) / dist, dist = 1 for axis and sqrt(2) for diagonal pairs.
inline double pairwise_capacity(const Rgb& a, const Rgb& b, Link link, const SmoothnessParams& params) {
  const double scale = (link == Link::East || link == Link::South) ? 1.0 : 1.0 / std::numbers::sqrt2;
  return params.gamma * std::exp(-params.beta * squared_distance(a, b)) * scale;
}

/// Unary capacities come from the mixture data terms of Probable pixels,
/// hard_weight pins Definite ones. When a pixel's two data terms include a
/// negative value both are shifted by the same amount, which leaves every
/// cut's relative cost unchanged.
inline GridGraph build_graph(const RasterImage& image, const Trimap& trimap, const ColorMixtureModel& fg_model,
                             const ColorMixtureModel& bg_model, const SmoothnessParams& params) {
  require_same_shape(image, trimap, "build_graph");
  GridGraph g(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const std::size_t i = g.index(x, y);
      const Rgb& z = image[i];
      switch (trimap[i]) {
        case TrimapLabel::DefiniteFG:
          g.source_cap[i] = params.hard_weight;
          g.sink_cap[i] = 0.0;
          break;
        case TrimapLabel::DefiniteBG:
          g.source_cap[i] = 0.0;
          g.sink_cap[i] = params.hard_weight;
          break;
        default: {
          double s = bg_model.neg_log_density(z);
          double t = fg_model.neg_log_density(z);
          const double low = std::min(s, t);
          if (low < 0.0) {
            s -= low;
            t -= low;
          }
          g.source_cap[i] = s;
          g.sink_cap[i] = t;
        }
      }
      for (int l = 0; l < 4; ++l) {
        const int nx = x + kLinkOffsets[static_cast<std::size_t>(l)].x;
        const int ny = y + kLinkOffsets[static_cast<std::size_t>(l)].y;
        if (!image.in_bounds(nx, ny)) continue;
        g.neighbor_cap[i][static_cast<std::size_t>(l)] =
            pairwise_capacity(z, image(nx, ny), static_cast<Link>(l), params);
      }
    }
  return g;
}

/// Capacity of the cut induced by `side` (1 = source side).
inline double cut_capacity(const GridGraph& g, const BinaryMask& side) {
  if (static_cast<std::size_t>(side.width()) * static_cast<std::size_t>(side.height()) != g.size() ||
      side.width() != g.width)
    throw Error(Errc::DimensionMismatch, "cut labelling does not match graph");
  double total = 0.0;
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      const std::size_t i = g.index(x, y);
      const bool src = side[i] != 0;
      total += src ? g.sink_cap[i] : g.source_cap[i];
      for (int l = 0; l < 4; ++l) {
        const int nx = x + kLinkOffsets[static_cast<std::size_t>(l)].x;
        const int ny = y + kLinkOffsets[static_cast<std::size_t>(l)].y;
        if (!g.in_bounds(nx, ny)) continue;
        if (src != (side[g.index(nx, ny)] != 0)) total += g.neighbor_cap[i][static_cast<std::size_t>(l)];
      }
    }
  return total;
}

namespace detail {

/// Boykov-Kolmogorov max-flow over the implicit 8-connected grid.
class GridMaxFlow {
 public:
  explicit GridMaxFlow(const GridGraph& g)
      : width_(g.width),
        height_(g.height),
        n_(g.size()),
        residual_(n_ * 8, 0.0),
        terminal_(n_, 0.0),
        parent_(n_, kFree),
        is_sink_(n_, 0),
        active_(n_, 0),
        stamp_(n_, 0),
        dist_(n_, 0) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (int l = 0; l < 4; ++l) {
        const double c = g.neighbor_cap[i][static_cast<std::size_t>(l)];
        if (c < 0.0 || !std::isfinite(c)) throw Error(Errc::InvalidArgument, "negative or non-finite capacity");
        if (c == 0.0) continue;
        const int d = kLinkDir[static_cast<std::size_t>(l)];
        const std::size_t j = neighbor(i, d);
        if (j == kNone) continue;
        residual_[i * 8 + static_cast<std::size_t>(d)] = c;
        residual_[j * 8 + static_cast<std::size_t>(opposite(d))] = c;
      }
      const double s = g.source_cap[i];
      const double t = g.sink_cap[i];
      if (s < 0.0 || t < 0.0 || !std::isfinite(s) || !std::isfinite(t))
        throw Error(Errc::InvalidArgument, "negative or non-finite capacity");
      // Push min(s, t) straight through; keep the remainder as one signed t-link.
      flow_ += std::min(s, t);
      terminal_[i] = s - t;
    }
  }

  double solve() {
    for (std::size_t i = 0; i < n_; ++i) {
      if (terminal_[i] > 0.0) {
        is_sink_[i] = 0;
        parent_[i] = kTerminal;
        dist_[i] = 1;
        set_active(i);
      } else if (terminal_[i] < 0.0) {
        is_sink_[i] = 1;
        parent_[i] = kTerminal;
        dist_[i] = 1;
        set_active(i);
      }
    }

    std::size_t current = kNone;
    for (;;) {
      std::size_t i = current;
      if (i != kNone) {
        active_[i] = 0;
        if (parent_[i] == kFree) i = kNone;
      }
      if (i == kNone) {
        i = next_active();
        if (i == kNone) break;
      }

      // Growth: look for an arc joining the two trees.
      std::size_t from = kNone;
      int via = -1;
      if (!is_sink_[i]) {
        for (int d = 0; d < 8; ++d) {
          if (!(residual_[i * 8 + static_cast<std::size_t>(d)] > 0.0)) continue;
          const std::size_t j = neighbor(i, d);
          if (parent_[j] == kFree) {
            adopt(j, i, opposite(d), false);
          } else if (is_sink_[j]) {
            from = i;
            via = d;
            break;
          } else if (stamp_[j] <= stamp_[i] && dist_[j] > dist_[i]) {
            parent_[j] = static_cast<std::int8_t>(opposite(d));
            stamp_[j] = stamp_[i];
            dist_[j] = dist_[i] + 1;
          }
        }
      } else {
        for (int d = 0; d < 8; ++d) {
          const std::size_t j = neighbor(i, d);
          if (j == kNone || !(residual_[j * 8 + static_cast<std::size_t>(opposite(d))] > 0.0)) continue;
          if (parent_[j] == kFree) {
            adopt(j, i, opposite(d), true);
          } else if (!is_sink_[j]) {
            from = j;
            via = opposite(d);
            break;
          } else if (stamp_[j] <= stamp_[i] && dist_[j] > dist_[i]) {
            parent_[j] = static_cast<std::int8_t>(opposite(d));
            stamp_[j] = stamp_[i];
            dist_[j] = dist_[i] + 1;
          }
        }
      }

      ++time_;
      if (from != kNone) {
        active_[i] = 1;  // keep expanding this node next round
        current = i;
        augment(from, via);
        while (!orphans_.empty()) {
          const std::size_t o = orphans_.front();
          orphans_.pop_front();
          if (is_sink_[o])
            process_orphan<true>(o);
          else
            process_orphan<false>(o);
        }
      } else {
        current = kNone;
      }
    }
    return flow_;
  }

  /// Nodes reachable from the source in the residual graph.
  BinaryMask source_side() const {
    BinaryMask side(width_, height_, 0);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n_; ++i)
      if (terminal_[i] > 0.0) {
        side[i] = 1;
        stack.push_back(i);
      }
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (int d = 0; d < 8; ++d) {
        if (!(residual_[i * 8 + static_cast<std::size_t>(d)] > 0.0)) continue;
        const std::size_t j = neighbor(i, d);
        if (side[j]) continue;
        side[j] = 1;
        stack.push_back(j);
      }
    }
    return side;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  // parent_ holds the direction (0..7) of the arc towards the parent, or one of:
  static constexpr std::int8_t kFree = -1;
  static constexpr std::int8_t kTerminal = -2;
  static constexpr std::int8_t kOrphan = -3;

  // Directions E, SE, S, SW, W, NW, N, NE; opposite(d) = d + 4 mod 8.
  static constexpr std::array<int, 8> kDx{1, 1, 0, -1, -1, -1, 0, 1};
  static constexpr std::array<int, 8> kDy{0, 1, 1, 1, 0, -1, -1, -1};
  // Link slot (E, S, SE, SW) to direction.
  static constexpr std::array<int, 4> kLinkDir{0, 2, 1, 3};

  static constexpr int opposite(int d) noexcept { return (d + 4) & 7; }

  std::size_t neighbor(std::size_t i, int d) const noexcept {
    const int x = static_cast<int>(i % static_cast<std::size_t>(width_)) + kDx[static_cast<std::size_t>(d)];
    const int y = static_cast<int>(i / static_cast<std::size_t>(width_)) + kDy[static_cast<std::size_t>(d)];
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return kNone;
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  double& cap(std::size_t i, int d) noexcept { return residual_[i * 8 + static_cast<std::size_t>(d)]; }

  void set_active(std::size_t i) {
    if (active_[i]) return;
    active_[i] = 1;
    queue_.push_back(i);
  }

  std::size_t next_active() {
    while (!queue_.empty()) {
      const std::size_t i = queue_.front();
      queue_.pop_front();
      active_[i] = 0;
      if (parent_[i] != kFree) return i;
    }
    return kNone;
  }

  void adopt(std::size_t j, std::size_t parent, int dir_to_parent, bool sink_tree) {
    is_sink_[j] = sink_tree ? 1 : 0;
    parent_[j] = static_cast<std::int8_t>(dir_to_parent);
    stamp_[j] = stamp_[parent];
    dist_[j] = dist_[parent] + 1;
    set_active(j);
  }

  void make_orphan_front(std::size_t i) {
    parent_[i] = kOrphan;
    orphans_.push_front(i);
  }
  void make_orphan_rear(std::size_t i) {
    parent_[i] = kOrphan;
    orphans_.push_back(i);
  }

  // Path: source tree ... -> from --(via)--> head -> ... sink tree.
  void augment(std::size_t from, int via) {
    const std::size_t head = neighbor(from, via);
    double bottleneck = cap(from, via);
    for (std::size_t i = from;;) {
      const int d = parent_[i];
      if (d == kTerminal) {
        bottleneck = std::min(bottleneck, terminal_[i]);
        break;
      }
      const std::size_t p = neighbor(i, d);
      bottleneck = std::min(bottleneck, cap(p, opposite(d)));
      i = p;
    }
    for (std::size_t i = head;;) {
      const int d = parent_[i];
      if (d == kTerminal) {
        bottleneck = std::min(bottleneck, -terminal_[i]);
        break;
      }
      bottleneck = std::min(bottleneck, cap(i, d));
      i = neighbor(i, d);
    }

    cap(head, opposite(via)) += bottleneck;
    cap(from, via) -= bottleneck;
    for (std::size_t i = from;;) {
      const int d = parent_[i];
      if (d == kTerminal) {
        terminal_[i] -= bottleneck;
        if (terminal_[i] == 0.0) make_orphan_front(i);
        break;
      }
      const std::size_t p = neighbor(i, d);
      cap(i, d) += bottleneck;
      cap(p, opposite(d)) -= bottleneck;
      if (cap(p, opposite(d)) == 0.0) make_orphan_front(i);
      i = p;
    }
    for (std::size_t i = head;;) {
      const int d = parent_[i];
      if (d == kTerminal) {
        terminal_[i] += bottleneck;
        if (terminal_[i] == 0.0) make_orphan_front(i);
        break;
      }
      const std::size_t p = neighbor(i, d);
      cap(p, opposite(d)) += bottleneck;
      cap(i, d) -= bottleneck;
      if (cap(i, d) == 0.0) make_orphan_front(i);
      i = p;
    }
    flow_ += bottleneck;
  }

  template <bool SinkTree>
  void process_orphan(std::size_t i) {
    constexpr int kInfiniteDist = std::numeric_limits<int>::max();
    int best_dir = -1;
    int best_dist = kInfiniteDist;
    for (int d = 0; d < 8; ++d) {
      const std::size_t j = neighbor(i, d);
      if (j == kNone) continue;
      // Residual capacity in the direction the flow runs along the tree.
      const double r = SinkTree ? cap(i, d) : cap(j, opposite(d));
      if (!(r > 0.0)) continue;
      if ((is_sink_[j] != 0) != SinkTree || parent_[j] == kFree) continue;

      // Walk to the root to check that j is anchored at a terminal.
      int dist = 0;
      std::size_t k = j;
      for (;;) {
        if (stamp_[k] == time_) {
          dist += dist_[k];
          break;
        }
        const int pd = parent_[k];
        ++dist;
        if (pd == kTerminal) {
          stamp_[k] = time_;
          dist_[k] = 1;
          break;
        }
        if (pd == kOrphan) {
          dist = kInfiniteDist;
          break;
        }
        k = neighbor(k, pd);
      }
      if (dist == kInfiniteDist) continue;
      if (dist < best_dist) {
        best_dir = d;
        best_dist = dist;
      }
      for (k = j; stamp_[k] != time_; k = neighbor(k, parent_[k])) {
        stamp_[k] = time_;
        dist_[k] = dist--;
      }
    }

    if (best_dir >= 0) {
      parent_[i] = static_cast<std::int8_t>(best_dir);
      stamp_[i] = time_;
      dist_[i] = best_dist + 1;
      return;
    }

    parent_[i] = kFree;
    for (int d = 0; d < 8; ++d) {
      const std::size_t j = neighbor(i, d);
      if (j == kNone) continue;
      if ((is_sink_[j] != 0) != SinkTree) continue;
      const int pd = parent_[j];
      if (pd == kFree) continue;
      const double r = SinkTree ? cap(i, d) : cap(j, opposite(d));
      if (r > 0.0) set_active(j);
      if (pd != kTerminal && pd != kOrphan && neighbor(j, pd) == i) make_orphan_rear(j);
    }
  }

  int width_;
  int height_;
  std::size_t n_;
  std::vector<double> residual_;
  std::vector<double> terminal_;  // > 0: residual from source, < 0: residual to sink
  std::vector<std::int8_t> parent_;
  std::vector<std::uint8_t> is_sink_;
  std::vector<std::uint8_t> active_;
  std::vector<std::uint64_t> stamp_;
  std::vector<int> dist_;
  std::deque<std::size_t> queue_;
  std::deque<std::size_t> orphans_;
  std::uint64_t time_ = 0;
  double flow_ = 0.0;
};

}  // namespace detail

/// Exact max-flow / min-cut. Pixels reachable from the source in the final
/// residual graph are labelled source side; everything else, including ties,
/// is sink side.
inline CutResult max_flow(const GridGraph& graph) {
  if (graph.size() == 0) throw Error(Errc::InvalidArgument, "empty graph");
  detail::GridMaxFlow solver(graph);
  CutResult result;
  result.flow_value = solver.solve();
  result.side = solver.source_side();
  return result;
}

}  // namespace extrseg
