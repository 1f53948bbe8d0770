#pragma once

// Gaussian mixture appearance models over RGB, fitted by hard assignment:
// k-means++ initialisation, per-pixel best component, maximum-likelihood refit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "extrseg/error.hpp"
#include "extrseg/raster.hpp"

namespace extrseg {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline constexpr double kDefaultCovarianceFloor = 0.01;
inline constexpr double kNegLogDensityCap = 1e9;

namespace detail {

/// Seeded generator with a portable uniform draw (std distributions are
/// implementation-defined, which would break cross-platform determinism).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }
  double normal() {
    // Box-Muller; the second deviate is discarded to keep the stream simple.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace detail

class GaussianComponent {
 public:
  /// Throws InvalidArgument if the covariance is not positive definite.
  GaussianComponent(double weight, const Rgb& mean, const Mat3& covariance)
      : weight_(weight), mean_(mean), cov_(covariance) {
    // Cholesky factor L with cov = L L^T.
    Mat3 l{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j <= i; ++j) {
        double s = cov_[i][j];
        for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
        if (i == j) {
          if (!(s > 0.0)) throw Error(Errc::InvalidArgument, "covariance is not positive definite");
          l[i][i] = std::sqrt(s);
        } else {
          l[i][j] = s / l[j][j];
        }
      }
    }
    log_det_ = 2.0 * (std::log(l[0][0]) + std::log(l[1][1]) + std::log(l[2][2]));
    // inv(L), lower triangular.
    Mat3 li{};
    for (int i = 0; i < 3; ++i) {
      li[i][i] = 1.0 / l[i][i];
      for (int j = 0; j < i; ++j) {
        double s = 0.0;
        for (int k = j; k < i; ++k) s -= l[i][k] * li[k][j];
        li[i][j] = s / l[i][i];
      }
    }
    // inv(cov) = inv(L)^T inv(L)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = std::max(i, j); k < 3; ++k) s += li[k][i] * li[k][j];
        inv_cov_[i][j] = s;
      }
    log_norm_ = -0.5 * (3.0 * std::log(2.0 * std::numbers::pi) + log_det_);
  }

  double weight() const noexcept { return weight_; }
  const Rgb& mean() const noexcept { return mean_; }
  const Mat3& covariance() const noexcept { return cov_; }
  const Mat3& inverse_covariance() const noexcept { return inv_cov_; }
  double log_determinant() const noexcept { return log_det_; }

  double mahalanobis_sq(const Rgb& z) const noexcept {
    const double d0 = z[0] - mean_[0];
    const double d1 = z[1] - mean_[1];
    const double d2 = z[2] - mean_[2];
    return d0 * (inv_cov_[0][0] * d0 + inv_cov_[0][1] * d1 + inv_cov_[0][2] * d2) +
           d1 * (inv_cov_[1][0] * d0 + inv_cov_[1][1] * d1 + inv_cov_[1][2] * d2) +
           d2 * (inv_cov_[2][0] * d0 + inv_cov_[2][1] * d1 + inv_cov_[2][2] * d2);
  }

  /// log N(z; mean, cov)
  double log_density(const Rgb& z) const noexcept { return log_norm_ - 0.5 * mahalanobis_sq(z); }

  /// log(weight * N(z; mean, cov))
  double log_weighted_density(const Rgb& z) const noexcept { return std::log(weight_) + log_density(z); }

 private:
  double weight_;
  Rgb mean_;
  Mat3 cov_;
  Mat3 inv_cov_{};
  double log_det_ = 0.0;
  double log_norm_ = 0.0;
};

class ColorMixtureModel {
 public:
  explicit ColorMixtureModel(std::vector<GaussianComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw Error(Errc::EmptyInput, "mixture needs at least one component");
  }

  std::size_t size() const noexcept { return components_.size(); }
  const GaussianComponent& operator[](std::size_t k) const noexcept { return components_[k]; }
  std::span<const GaussianComponent> components() const noexcept { return components_; }

  /// -log sum_k weight_k N(z; mean_k, cov_k), capped at kNegLogDensityCap.
  double neg_log_density(const Rgb& z) const noexcept {
    double best = -std::numeric_limits<double>::infinity();
    double terms[16];
    const std::size_t n = std::min<std::size_t>(components_.size(), 16);
    for (std::size_t k = 0; k < n; ++k) {
      terms[k] = components_[k].log_weighted_density(z);
      best = std::max(best, terms[k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += std::exp(terms[k] - best);
    for (std::size_t k = n; k < components_.size(); ++k) {
      // Rare path for very large K.
      const double t = components_[k].log_weighted_density(z);
      if (t > best) {
        sum = sum * std::exp(best - t) + 1.0;
        best = t;
      } else {
        sum += std::exp(t - best);
      }
    }
    const double value = -(best + std::log(sum));
    if (!(value < kNegLogDensityCap)) return kNegLogDensityCap;
    return value;
  }

 private:
  std::vector<GaussianComponent> components_;
};

inline double neg_log_density(const ColorMixtureModel& model, const Rgb& z) noexcept {
  return model.neg_log_density(z);
}

/// Index of the component maximising weight_k N(z); ties go to the lower index.
inline int best_component(const ColorMixtureModel& model, const Rgb& z) noexcept {
  int best = 0;
  double best_score = model[0].log_weighted_density(z);
  for (std::size_t k = 1; k < model.size(); ++k) {
    const double s = model[k].log_weighted_density(z);
    if (s > best_score) {
      best_score = s;
      best = static_cast<int>(k);
    }
  }
  return best;
}

inline std::vector<int> assign_components(const ColorMixtureModel& model, std::span<const Rgb> pixels) {
  std::vector<int> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = best_component(model, pixels[i]);
  return out;
}

/// sum_n log(weight_{k_n} N(z_n; mean_{k_n}, cov_{k_n}))
inline double assigned_log_likelihood(const ColorMixtureModel& model, std::span<const Rgb> pixels,
                                      std::span<const int> assignments) {
  if (pixels.size() != assignments.size())
    throw Error(Errc::DimensionMismatch, "pixel and assignment counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < pixels.size(); ++i)
    total += model[static_cast<std::size_t>(assignments[i])].log_weighted_density(pixels[i]);
  return total;
}

/// Per-component ML mean and covariance (plus `floor` on the diagonal), weight
/// equal to the member fraction. Empty components are dropped.
inline ColorMixtureModel refit(std::span<const Rgb> pixels, std::span<const int> assignments, int k_count,
                               double floor = kDefaultCovarianceFloor) {
  if (pixels.empty()) throw Error(Errc::EmptyInput, "cannot fit a mixture to zero pixels");
  if (pixels.size() != assignments.size())
    throw Error(Errc::DimensionMismatch, "pixel and assignment counts differ");
  if (k_count < 1) throw Error(Errc::InvalidArgument, "component count must be >= 1");
  if (!(floor > 0.0)) throw Error(Errc::InvalidArgument, "covariance floor must be positive");

  const auto k_size = static_cast<std::size_t>(k_count);
  std::vector<std::size_t> counts(k_size, 0);
  std::vector<Rgb> sums(k_size, Rgb{0, 0, 0});
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const int a = assignments[i];
    if (a < 0 || a >= k_count) throw Error(Errc::InvalidArgument, "assignment out of range");
    const auto k = static_cast<std::size_t>(a);
    ++counts[k];
    for (int c = 0; c < 3; ++c) sums[k][c] += pixels[i][c];
  }
  std::vector<Rgb> means(k_size);
  for (std::size_t k = 0; k < k_size; ++k)
    if (counts[k])
      for (int c = 0; c < 3; ++c) means[k][c] = sums[k][c] / static_cast<double>(counts[k]);

  std::vector<Mat3> scatter(k_size, Mat3{});
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto k = static_cast<std::size_t>(assignments[i]);
    const double d[3] = {pixels[i][0] - means[k][0], pixels[i][1] - means[k][1], pixels[i][2] - means[k][2]};
    for (int r = 0; r < 3; ++r)
      for (int c = r; c < 3; ++c) scatter[k][r][c] += d[r] * d[c];
  }

  std::vector<GaussianComponent> comps;
  const double total = static_cast<double>(pixels.size());
  for (std::size_t k = 0; k < k_size; ++k) {
    if (!counts[k]) continue;
    Mat3 cov{};
    const double n = static_cast<double>(counts[k]);
    for (int r = 0; r < 3; ++r)
      for (int c = r; c < 3; ++c) cov[r][c] = cov[c][r] = scatter[k][r][c] / n;
    for (int r = 0; r < 3; ++r) cov[r][r] += floor;
    comps.emplace_back(n / total, means[k], cov);
  }
  return ColorMixtureModel(std::move(comps));
}

struct MixtureFit {
  ColorMixtureModel model;
  /// Component index per input pixel, aligned with model after empty clusters are dropped.
  std::vector<int> assignments;
};

/// k-means++ seeding, 10 Lloyd iterations in Euclidean RGB, then one
/// component per non-empty cluster.
inline MixtureFit init_by_kmeans(std::span<const Rgb> pixels, int k_count, std::uint64_t seed,
                                 double floor = kDefaultCovarianceFloor) {
  if (pixels.empty()) throw Error(Errc::EmptyInput, "cannot cluster zero pixels");
  if (k_count < 1) throw Error(Errc::InvalidArgument, "component count must be >= 1");

  detail::Rng rng(seed);
  const std::size_t n = pixels.size();
  std::vector<Rgb> centers;
  centers.push_back(pixels[rng.below(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(pixels[i], centers[0]);
  while (centers.size() < static_cast<std::size_t>(k_count)) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (!(total > 0.0)) break;  // every pixel already coincides with a centre
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(pixels[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(pixels[i], centers.back()));
  }

  const std::size_t kc = centers.size();
  std::vector<int> labels(n, 0);
  auto assign = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(pixels[i], centers[0]);
      for (std::size_t k = 1; k < kc; ++k) {
        const double d = squared_distance(pixels[i], centers[k]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(k);
        }
      }
      labels[i] = best;
    }
  };
  for (int iter = 0; iter < 10; ++iter) {
    assign();
    std::vector<Rgb> sums(kc, Rgb{0, 0, 0});
    std::vector<std::size_t> counts(kc, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(labels[i]);
      ++counts[k];
      for (int c = 0; c < 3; ++c) sums[k][c] += pixels[i][c];
    }
    for (std::size_t k = 0; k < kc; ++k)
      if (counts[k])
        for (int c = 0; c < 3; ++c) centers[k][c] = sums[k][c] / static_cast<double>(counts[k]);
  }
  assign();

  // Compact away empty clusters so assignments index the fitted model.
  std::vector<char> used(kc, 0);
  for (int l : labels) used[static_cast<std::size_t>(l)] = 1;
  std::vector<int> remap(kc, -1);
  int next = 0;
  for (std::size_t k = 0; k < kc; ++k)
    if (used[k]) remap[k] = next++;
  for (int& l : labels) l = remap[static_cast<std::size_t>(l)];

  ColorMixtureModel model = refit(pixels, labels, next, floor);
  return MixtureFit{std::move(model), std::move(labels)};
}

}  // namespace extrseg
