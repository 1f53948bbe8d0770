#include <gtest/gtest.h>

#include <random>

#include "extrseg/extreme_click.hpp"
#include "extrseg/grabcut.hpp"

#include "oracles.hpp"

using namespace extrseg;
using namespace oracle;

namespace {

Mat3 spherical(double var) {
  Mat3 m{};
  for (int i = 0; i < 3; ++i) m[i][i] = var;
  return m;
}

}  // namespace

TEST(Segment, ClampedTrimapNeedsNoIterations) {
  const RasterImage img(8, 8, Rgb{10, 20, 30});
  Trimap t(8, 8, TrimapLabel::DefiniteFG);
  for (int i = 0; i < 8; ++i) t(i, 0) = t(i, 7) = t(0, i) = t(7, i) = TrimapLabel::DefiniteBG;
  const SegmentationResult r = segment(img, t);
  EXPECT_EQ(r.iterations_run, 0);
  EXPECT_TRUE(r.energy_trace.empty());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(r.mask[i], t[i] == TrimapLabel::DefiniteFG ? 1 : 0);
}

TEST(Segment, AllForegroundOrBackgroundShortCircuits) {
  const RasterImage img(5, 5, Rgb{1, 2, 3});
  EXPECT_EQ(count_ones(segment(img, Trimap(5, 5, TrimapLabel::ProbableFG)).mask), 25u);
  EXPECT_EQ(count_ones(segment(img, Trimap(5, 5, TrimapLabel::ProbableBG)).mask), 0u);
  EXPECT_EQ(segment(img, Trimap(5, 5, TrimapLabel::DefiniteBG)).iterations_run, 0);
}

TEST(Segment, RedSquareFromRectangle) {
  const RasterImage img = red_square_image();
  const Trimap t = build_trimap_rect(Box{20, 20, 43, 43}, 64, 64);
  const SegmentationResult r = segment(img, t);
  EXPECT_EQ(r.mask, red_square_mask());
  EXPECT_GE(r.iterations_run, 1);
}

TEST(Segment, ConstantImageCollapsesToOneSide) {
  const RasterImage img(32, 32, Rgb{90, 90, 90});
  const Box box{6, 8, 25, 20};
  const Trimap t = build_trimap_rect(box, 32, 32);
  const SegmentationResult a = segment(img, t);
  const SegmentationResult b = segment(img, t);
  EXPECT_EQ(a.mask, b.mask);
  BinaryMask full(32, 32, 0);
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) full(x, y) = 1;
  const std::size_t ones = count_ones(a.mask);
  EXPECT_TRUE(ones == 0 || a.mask == full) << ones;
}

TEST(Segment, DimensionMismatchAndBadConfig) {
  try {
    segment(RasterImage(4, 4), Trimap(4, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
  SegmentationConfig bad;
  bad.max_iterations = 0;
  EXPECT_THROW(segment(RasterImage(4, 4), Trimap(4, 4, TrimapLabel::ProbableFG), bad), Error);
}

TEST(Energy, UniformLabelsHaveNoPairwiseTerm) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> c(0, 255);
  RasterImage img(6, 4);
  for (auto& p : img.cells()) p = {c(rng), c(rng), c(rng)};
  const ColorMixtureModel fg({GaussianComponent(1.0, {50, 50, 50}, spherical(900))});
  const ColorMixtureModel bg({GaussianComponent(1.0, {200, 200, 200}, spherical(900))});
  const SmoothnessParams p{50, compute_beta(img), 1e5};
  const BinaryMask all_fg(6, 4, 1);
  double unary = 0;
  for (const Rgb& z : img.cells()) unary += fg.neg_log_density(z);
  EXPECT_NEAR(energy(img, all_fg, fg, bg, p), unary, 1e-9);
}

TEST(Energy, OnePairDiffering) {
  RasterImage img(2, 1);
  img(0, 0) = {0, 0, 0};
  img(1, 0) = {30, 0, 0};
  Trimap t(2, 1, TrimapLabel::DefiniteFG);
  t(1, 0) = TrimapLabel::DefiniteBG;
  const BinaryMask labels(2, 1, std::vector<std::uint8_t>{1, 0});
  const ColorMixtureModel m({GaussianComponent(1.0, {0, 0, 0}, spherical(1))});
  const SmoothnessParams p{50, compute_beta(img), 1e5};
  EXPECT_DOUBLE_EQ(energy(img, labels, m, m, p, &t), 50.0 * std::exp(-p.beta * 900.0));
}

TEST(Segment, CutStepNeverRaisesEnergy) {
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    const auto [img, t] = random_instance(seed);
    SegmentationConfig cfg;
    cfg.max_iterations = 8;
    cfg.convergence_fraction = 0.0;
    const SegmentationResult r = segment(img, t, cfg);
    ASSERT_EQ(r.energy_trace.size(), r.pre_cut_energy_trace.size());
    ASSERT_EQ(static_cast<int>(r.energy_trace.size()), r.iterations_run);
    for (std::size_t i = 0; i < r.energy_trace.size(); ++i)
      EXPECT_LE(r.energy_trace[i], r.pre_cut_energy_trace[i]) << "seed " << seed << " iter " << i;
  }
}

TEST(Segment, ClampsDeterminismAndIterationBound) {
  for (std::uint32_t seed = 100; seed < 110; ++seed) {
    const auto [img, t] = random_instance(seed);
    SegmentationConfig cfg;
    cfg.max_iterations = 1 + static_cast<int>(seed % 4);
    const SegmentationResult a = segment(img, t, cfg);
    const SegmentationResult b = segment(img, t, cfg);
    EXPECT_EQ(a.mask, b.mask);
    EXPECT_EQ(a.energy_trace, b.energy_trace);
    EXPECT_LE(a.iterations_run, cfg.max_iterations);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] == TrimapLabel::DefiniteFG) EXPECT_EQ(a.mask[i], 1);
      if (t[i] == TrimapLabel::DefiniteBG) EXPECT_EQ(a.mask[i], 0);
    }
  }
}
