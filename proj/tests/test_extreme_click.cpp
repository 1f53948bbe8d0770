#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "extrseg/extreme_click.hpp"

#include "oracles.hpp"

using namespace extrseg;
using namespace oracle;

namespace {

BinaryMask box_mask(int w, int h, const Box& b) {
  BinaryMask m(w, h, 0);
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x) m(x, y) = 1;
  return m;
}

bool subset(const BinaryMask& a, const BinaryMask& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

// Direct 3x3 Sobel with clamped indexing, written out term by term.
ScalarMap reference_sobel(const ScalarMap& l) {
  const int w = l.width(), h = l.height();
  auto v = [&](int x, int y) { return l(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  static constexpr int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static constexpr int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  ScalarMap out(w, h, 0.0);
  double peak = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double gx = 0, gy = 0;
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) {
          gx += kx[j][i] * v(x + i - 1, y + j - 1);
          gy += ky[j][i] * v(x + i - 1, y + j - 1);
        }
      out(x, y) = std::hypot(gx, gy);
      peak = std::max(peak, out(x, y));
    }
  for (auto& c : out.cells()) c = peak > 0 ? std::clamp(c / peak, kEdgeFloor, 1.0) : kEdgeFloor;
  return out;
}

double path_cost(const EdgeProbabilityMap& prob, const BoundaryPath& p) {
  double c = 0.0;
  for (const Point& n : p.nodes) c += -std::log(prob(n.x, n.y));
  return c;
}

void expect_valid_path(const BoundaryPath& p, Point a, Point b) {
  ASSERT_FALSE(p.nodes.empty());
  EXPECT_EQ(p.nodes.front(), a);
  EXPECT_EQ(p.nodes.back(), b);
  for (std::size_t i = 1; i < p.nodes.size(); ++i) {
    EXPECT_LE(std::abs(p.nodes[i].x - p.nodes[i - 1].x), 1);
    EXPECT_LE(std::abs(p.nodes[i].y - p.nodes[i - 1].y), 1);
    EXPECT_FALSE(p.nodes[i] == p.nodes[i - 1]);
  }
}

RasterImage disk_image(int size, int cx, int cy, int r) {
  RasterImage img(size, size, Rgb{30, 60, 200});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img(x, y) = {220, 40, 40};
  return img;
}

}  // namespace

TEST(EdgeProbability, ConstantImageIsFloor) {
  const EdgeProbabilityMap p = edge_probability(RasterImage(6, 5, Rgb{80, 80, 80}));
  for (double v : p.cells()) EXPECT_EQ(v, kEdgeFloor);
}

TEST(EdgeProbability, VerticalStep) {
  RasterImage img(8, 4, Rgb{0, 0, 0});
  for (int y = 0; y < 4; ++y)
    for (int x = 4; x < 8; ++x) img(x, y) = {255, 255, 255};
  const EdgeProbabilityMap p = edge_probability(img);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_DOUBLE_EQ(p(x, y), (x == 3 || x == 4) ? 1.0 : kEdgeFloor) << x;
}

TEST(EdgeProbability, SingleBrightPixelMatchesReference) {
  RasterImage img(9, 9, Rgb{0, 0, 0});
  img(4, 4) = {255, 255, 255};
  const EdgeProbabilityMap p = edge_probability(img);
  const ScalarMap ref = reference_sobel(to_grayscale(img));
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], ref[i], 1e-12);
  double neighbour_max = 0.0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      if (dx || dy) neighbour_max = std::max(neighbour_max, p(4 + dx, 4 + dy));
  EXPECT_DOUBLE_EQ(neighbour_max, 1.0);
  EXPECT_LT(p(4, 4), neighbour_max);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x)
      if (std::abs(x - 4) > 1 || std::abs(y - 4) > 1) EXPECT_LT(p(x, y), neighbour_max);
}

TEST(EdgeProbability, ValuesBoundedOnRandomImages) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> c(0, 255);
  RasterImage img(20, 15);
  for (auto& px : img.cells()) px = {c(rng), c(rng), c(rng)};
  const EdgeProbabilityMap p = edge_probability(img);
  for (double v : p.cells()) {
    EXPECT_GE(v, 1e-3);
    EXPECT_LE(v, 1.0);
    EXPECT_TRUE(std::isfinite(-std::log(v)));
  }
}

TEST(MinCostPath, SamePoint) {
  EdgeProbabilityMap prob(3, 3, 0.25);
  const BoundaryPath p = min_cost_path(prob, {1, 1}, {1, 1}, Box{0, 0, 2, 2});
  ASSERT_EQ(p.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(p.cost, -std::log(0.25));
}

TEST(MinCostPath, UniformProbabilityCostsNothing) {
  EdgeProbabilityMap prob(10, 10, 1.0);
  const BoundaryPath p = min_cost_path(prob, {0, 0}, {7, 3}, Box{0, 0, 9, 9});
  expect_valid_path(p, {0, 0}, {7, 3});
  EXPECT_EQ(p.cost, 0.0);
}

TEST(MinCostPath, FollowsCorridor) {
  EdgeProbabilityMap prob(5, 5, kEdgeFloor);
  for (int x = 0; x < 5; ++x) prob(x, 2) = 1.0;
  const Box box{0, 0, 4, 4};
  const BoundaryPath p = min_cost_path(prob, {0, 2}, {4, 2}, box);
  ASSERT_EQ(p.nodes.size(), 5u);
  for (int x = 0; x < 5; ++x) EXPECT_EQ(p.nodes[static_cast<std::size_t>(x)], (Point{x, 2}));
  EXPECT_EQ(p.cost, 0.0);
  EXPECT_EQ(brute_force_path_cost(prob, {0, 2}, {4, 2}, box), 0.0);
}

TEST(MinCostPath, EndpointOutsideBox) {
  EdgeProbabilityMap prob(5, 5, 0.5);
  try {
    min_cost_path(prob, {0, 0}, {4, 4}, Box{1, 1, 4, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PointOutsideBox);
  }
}

TEST(MinCostPath, AllPairsMatchExhaustiveSearch) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(kEdgeFloor, 1.0);
  for (int grid = 0; grid < 3; ++grid) {
    EdgeProbabilityMap prob(4, 4);
    for (auto& v : prob.cells()) v = u(rng);
    const Box box{0, 0, 3, 3};
    for (int a = 0; a < 16; ++a)
      for (int b = 0; b < 16; ++b) {
        const Point pa{a % 4, a / 4}, pb{b % 4, b / 4};
        const BoundaryPath p = min_cost_path(prob, pa, pb, box);
        expect_valid_path(p, pa, pb);
        EXPECT_EQ(p.cost, brute_force_path_cost(prob, pa, pb, box));
        EXPECT_NEAR(path_cost(prob, p), p.cost, 1e-12);
      }
  }
}

TEST(MinCostPath, StaysInsideBoxAndIsDeterministic) {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(kEdgeFloor, 1.0);
  EdgeProbabilityMap prob(30, 30);
  for (auto& v : prob.cells()) v = u(rng);
  const Box box{5, 4, 25, 20};
  const BoundaryPath a = min_cost_path(prob, {5, 10}, {25, 18}, box);
  const BoundaryPath b = min_cost_path(prob, {5, 10}, {25, 18}, box);
  EXPECT_EQ(a.nodes, b.nodes);
  for (const Point& n : a.nodes) EXPECT_TRUE(box.contains(n));
}

TEST(PseudoMask, DiamondOnUniformMap) {
  EdgeProbabilityMap prob(21, 21, 1.0);
  const ExtremeClicks clicks{{10, 2}, {10, 18}, {2, 10}, {18, 10}};
  const Box box = clicks.box();
  std::array<BoundaryPath, 4> paths;
  const auto order = clicks.in_boundary_order();
  for (std::size_t i = 0; i < 4; ++i) paths[i] = min_cost_path(prob, order[i], order[(i + 1) % 4], box);
  const BinaryMask m = pseudo_mask(paths, clicks, box, 21, 21);
  for (const auto& p : paths)
    for (const Point& n : p.nodes) EXPECT_EQ(m(n.x, n.y), 1);
  EXPECT_EQ(m(10, 10), 1);
  EXPECT_TRUE(subset(m, box_mask(21, 21, box)));
}

TEST(PseudoMask, CollinearClicksFallBackToBox) {
  EdgeProbabilityMap prob(20, 10, 0.5);
  const ExtremeClicks clicks{{3, 4}, {15, 4}, {3, 4}, {15, 4}};
  const Box box = clicks.box();
  std::array<BoundaryPath, 4> paths;
  const auto order = clicks.in_boundary_order();
  for (std::size_t i = 0; i < 4; ++i) paths[i] = min_cost_path(prob, order[i], order[(i + 1) % 4], box);
  EXPECT_EQ(pseudo_mask(paths, clicks, box, 20, 10), box_mask(20, 10, box));
}

TEST(PseudoMask, SquareOutlineIsFilled) {
  EdgeProbabilityMap prob(16, 16, kEdgeFloor);
  for (int i = 2; i <= 12; ++i) prob(i, 2) = prob(i, 12) = prob(2, i) = prob(12, i) = 1.0;
  const ExtremeClicks clicks{{7, 2}, {7, 12}, {2, 7}, {12, 7}};
  const Box box = clicks.box();
  std::array<BoundaryPath, 4> paths;
  const auto order = clicks.in_boundary_order();
  for (std::size_t i = 0; i < 4; ++i) paths[i] = min_cost_path(prob, order[i], order[(i + 1) % 4], box);
  const BinaryMask m = pseudo_mask(paths, clicks, box, 16, 16);
  // Flood-fill oracle: a zero-cost route may cut each outline corner diagonally,
  // so the region is the square up to its four corner pixels.
  const BinaryMask square = box_mask(16, 16, Box{2, 2, 12, 12});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const bool corner = (x == 2 || x == 12) && (y == 2 || y == 12);
      if (!corner) EXPECT_EQ(m(x, y), square(x, y)) << x << "," << y;
    }
  EXPECT_TRUE(subset(m, square));
}

TEST(Skeleton, SinglePixelAndLine) {
  BinaryMask one(5, 5, 0);
  one(2, 3) = 1;
  EXPECT_EQ(morphological_skeleton(one), one);
  BinaryMask line(9, 5, 0);
  for (int x = 1; x < 8; ++x) line(x, 2) = 1;
  EXPECT_EQ(morphological_skeleton(line), line);
}

TEST(Skeleton, FilledSquareGolden) {
  BinaryMask square(7, 7, 0);
  for (int y = 1; y <= 5; ++y)
    for (int x = 1; x <= 5; ++x) square(x, y) = 1;
  // Frozen from the literal erosion/opening construction.
  const BinaryMask golden(7, 7,
                          std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0,  //
                                                    0, 1, 0, 0, 0, 1, 0,  //
                                                    0, 0, 1, 0, 1, 0, 0,  //
                                                    0, 0, 0, 1, 0, 0, 0,  //
                                                    0, 0, 1, 0, 1, 0, 0,  //
                                                    0, 1, 0, 0, 0, 1, 0,  //
                                                    0, 0, 0, 0, 0, 0, 0});
  EXPECT_EQ(reference_skeleton(square), golden);
  EXPECT_EQ(morphological_skeleton(square), golden);
}

TEST(Skeleton, MatchesLiteralConstructionOnRandomMasks) {
  std::mt19937 rng(21);
  std::uniform_int_distribution<int> dim(1, 24);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    BinaryMask m(dim(rng), dim(rng), 0);
    const double p = u(rng);
    for (auto& c : m.cells()) c = u(rng) < p;
    // Blobbier masks too: union of random rectangles.
    if (trial % 2) {
      std::fill(m.cells().begin(), m.cells().end(), 0);
      for (int r = 0; r < 3; ++r) {
        std::uniform_int_distribution<int> xs(0, m.width() - 1), ys(0, m.height() - 1);
        int x0 = xs(rng), x1 = xs(rng), y0 = ys(rng), y1 = ys(rng);
        for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
          for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) m(x, y) = 1;
      }
    }
    const BinaryMask s = morphological_skeleton(m);
    EXPECT_EQ(s, reference_skeleton(m));
    EXPECT_TRUE(subset(s, m));
    if (count_ones(m)) EXPECT_GT(count_ones(s), 0u);
  }
}

TEST(BuildTrimapExtr, ClampsAndOutsideBox) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> c(0, 255);
  std::uniform_int_distribution<int> coord(0, 39);
  for (int trial = 0; trial < 25; ++trial) {
    RasterImage img(40, 40);
    for (auto& p : img.cells()) p = {c(rng), c(rng), c(rng)};
    std::array<Point, 4> pts;
    for (auto& p : pts) p = {coord(rng), coord(rng)};
    const ExtremeClicks clicks = ExtremeClicks::from_points(pts);
    const Trimap t = build_trimap_extr(img, clicks);
    for (const Point& p : {clicks.top, clicks.bottom, clicks.left, clicks.right, clicks.centroid()})
      EXPECT_EQ(t(p.x, p.y), TrimapLabel::DefiniteFG);
    const Box box = clicks.box();
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        if (!box.contains({x, y})) EXPECT_EQ(t(x, y), TrimapLabel::DefiniteBG);
  }
}

TEST(BuildTrimapExtr, DiskSkeletonInsideDisk) {
  const RasterImage img = disk_image(64, 32, 30, 18);
  const ExtremeClicks clicks{{32, 12}, {32, 48}, {14, 30}, {50, 30}};
  const ExtremeInit init = build_extreme_init(img, clicks);
  BinaryMask disk(64, 64, 0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) disk(x, y) = (x - 32) * (x - 32) + (y - 30) * (y - 30) <= 18 * 18;
  EXPECT_GT(count_ones(init.skeleton), 0u);
  EXPECT_TRUE(subset(init.skeleton, disk));
  for (std::size_t i = 0; i < init.skeleton.size(); ++i)
    if (init.skeleton[i]) EXPECT_EQ(init.trimap[i], TrimapLabel::DefiniteFG);
  EXPECT_EQ(init.trimap(14, 12), TrimapLabel::ProbableBG);
  EXPECT_EQ(init.trimap(50, 12), TrimapLabel::ProbableBG);
  EXPECT_EQ(init.trimap(14, 48), TrimapLabel::ProbableBG);
  EXPECT_EQ(init.trimap(50, 48), TrimapLabel::ProbableBG);
  // The boundary hugs the disk, so the pseudo-mask is close to it.
  double inter = 0, uni = 0;
  for (std::size_t i = 0; i < disk.size(); ++i) {
    inter += disk[i] && init.pseudo[i];
    uni += disk[i] || init.pseudo[i];
  }
  EXPECT_GT(inter / uni, 0.9);
}

TEST(BuildTrimapExtr, ClicksOutOfBounds) {
  const RasterImage img(10, 10);
  try {
    build_trimap_extr(img, ExtremeClicks{{5, 0}, {5, 10}, {0, 5}, {9, 5}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ClicksOutOfBounds);
  }
}

TEST(BuildTrimapRect, Examples) {
  const Trimap full = build_trimap_rect(Box{0, 0, 5, 5}, 6, 6);
  for (auto l : full.cells()) EXPECT_EQ(l, TrimapLabel::ProbableFG);
  const Trimap one = build_trimap_rect(Box{3, 2, 3, 2}, 6, 6);
  EXPECT_EQ(std::count(one.cells().begin(), one.cells().end(), TrimapLabel::ProbableFG), 1);
  const Trimap mid = build_trimap_rect(Box{2, 2, 4, 4}, 6, 6);
  EXPECT_EQ(std::count(mid.cells().begin(), mid.cells().end(), TrimapLabel::ProbableFG), 9);
  EXPECT_EQ(std::count(mid.cells().begin(), mid.cells().end(), TrimapLabel::DefiniteBG), 27);
  EXPECT_EQ(std::count(mid.cells().begin(), mid.cells().end(), TrimapLabel::DefiniteFG), 0);
}

TEST(BuildTrimapRect, BoxOutOfBounds) {
  try {
    build_trimap_rect(Box{2, 2, 6, 4}, 6, 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BoxOutOfBounds);
  }
}

TEST(ExtremeClicks, RolesFromPoints) {
  const std::array<Point, 4> pts{{{0, 5}, {5, 9}, {9, 5}, {5, 0}}};
  const ExtremeClicks c = ExtremeClicks::from_points(pts);
  EXPECT_EQ(c.top, (Point{5, 0}));
  EXPECT_EQ(c.bottom, (Point{5, 9}));
  EXPECT_EQ(c.left, (Point{0, 5}));
  EXPECT_EQ(c.right, (Point{9, 5}));
  const std::array<Point, 4> tie{{{2, 0}, {7, 0}, {4, 9}, {4, 4}}};
  EXPECT_EQ(ExtremeClicks::from_points(tie).top, (Point{2, 0}));
}
