#pragma once

// Iterated GrabCut: alternate mixture fitting with a graph cut until the
// labelling settles.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "extrseg/color_model.hpp"
#include "extrseg/error.hpp"
#include "extrseg/mincut.hpp"
#include "extrseg/raster.hpp"

namespace extrseg {

struct SegmentationConfig {
  int components_per_side = 5;
  int max_iterations = 5;
  double convergence_fraction = 0.001;
  double gamma = kDefaultGamma;
  std::uint64_t seed = 17;
  double covariance_floor = kDefaultCovarianceFloor;

  void validate() const {
    if (components_per_side < 1) throw Error(Errc::InvalidArgument, "components_per_side must be >= 1");
    if (max_iterations < 1) throw Error(Errc::InvalidArgument, "max_iterations must be >= 1");
    if (!(convergence_fraction >= 0.0 && convergence_fraction < 1.0))
      throw Error(Errc::InvalidArgument, "convergence_fraction must lie in [0, 1)");
    if (!(gamma > 0.0)) throw Error(Errc::InvalidArgument, "gamma must be positive");
    if (!(covariance_floor > 0.0)) throw Error(Errc::InvalidArgument, "covariance_floor must be positive");
  }
};

struct SegmentationResult {
  BinaryMask mask;  // 1 = foreground
  int iterations_run = 0;
  double final_energy = 0.0;
  /// Energy after each cut, evaluated with that iteration's models.
  std::vector<double> energy_trace;
  /// Energy of the labelling entering each cut, same models as energy_trace.
  std::vector<double> pre_cut_energy_trace;
};

/// Hard-constraint capacity that dominates every finite cut through a pixel
/// (at most 4 + 4/sqrt(2) < 9 neighbour links of strength <= gamma).
inline double hard_weight_for(double gamma) { return std::max(kDefaultHardWeight, 10.0 * gamma); }

/// E = U + V. U sums the mixture data term of each Probable pixel under the
/// model of its label (every pixel when no trimap is given); V sums the
/// neighbour capacities of pairs with differing labels.
inline double energy(const RasterImage& image, const BinaryMask& labels, const ColorMixtureModel& fg_model,
                     const ColorMixtureModel& bg_model, const SmoothnessParams& params,
                     const Trimap* trimap = nullptr) {
  require_same_shape(image, labels, "energy");
  if (trimap) require_same_shape(image, *trimap, "energy");
  double unary = 0.0;
  double pairwise = 0.0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const std::size_t i = image.index(x, y);
      const bool fg = labels[i] != 0;
      if (!trimap || !is_definite((*trimap)[i]))
        unary += fg ? fg_model.neg_log_density(image[i]) : bg_model.neg_log_density(image[i]);
      for (int l = 0; l < 4; ++l) {
        const int nx = x + kLinkOffsets[static_cast<std::size_t>(l)].x;
        const int ny = y + kLinkOffsets[static_cast<std::size_t>(l)].y;
        if (!image.in_bounds(nx, ny) || fg == (labels(nx, ny) != 0)) continue;
        pairwise += pairwise_capacity(image[i], image(nx, ny), static_cast<Link>(l), params);
      }
    }
  return unary + pairwise;
}

namespace detail {

template <typename T>
Grid<T> crop(const Grid<T>& g, const Box& b) {
  Grid<T> out(b.width(), b.height());
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x) out(x - b.x0, y - b.y0) = g(x, y);
  return out;
}

inline void split_by_label(const RasterImage& image, const BinaryMask& labels, std::vector<Rgb>& fg,
                           std::vector<Rgb>& bg) {
  fg.clear();
  bg.clear();
  for (std::size_t i = 0; i < image.size(); ++i) (labels[i] ? fg : bg).push_back(image[i]);
}

}  // namespace detail

/// Runs GrabCut from `trimap`. Definite labels are hard constraints; only
/// Probable pixels move. Trimaps without Probable pixels, or with an empty
/// side, return the initial labelling after 0 iterations.
inline SegmentationResult segment(const RasterImage& image, const Trimap& trimap,
                                  const SegmentationConfig& config = {}) {
  config.validate();
  require_same_shape(image, trimap, "segment");

  SegmentationResult result;
  result.mask = BinaryMask(image.width(), image.height(), 0);
  std::size_t probable = 0;
  Box active{image.width(), image.height(), -1, -1};
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const TrimapLabel l = trimap(x, y);
      result.mask(x, y) = is_foreground(l) ? 1 : 0;
      if (!is_definite(l)) ++probable;
      if (l != TrimapLabel::DefiniteBG) {
        active.x0 = std::min(active.x0, x);
        active.y0 = std::min(active.y0, y);
        active.x1 = std::max(active.x1, x);
        active.y1 = std::max(active.y1, y);
      }
    }
  const std::size_t fg_count = count_ones(result.mask);
  const SmoothnessParams params{config.gamma, compute_beta(image), hard_weight_for(config.gamma)};
  if (probable == 0 || fg_count == 0 || fg_count == image.size()) {
    // Nothing to optimise: a constant labelling has no pairwise cost and no
    // Probable pixel contributes a data term.
    if (probable == 0 && fg_count != 0 && fg_count != image.size()) {
      std::vector<Rgb> fg, bg;
      detail::split_by_label(image, result.mask, fg, bg);
      const auto fg_fit = init_by_kmeans(fg, config.components_per_side, config.seed, config.covariance_floor);
      const auto bg_fit = init_by_kmeans(bg, config.components_per_side, config.seed + 1, config.covariance_floor);
      result.final_energy = energy(image, result.mask, fg_fit.model, bg_fit.model, params, &trimap);
    }
    return result;
  }

  // The graph only needs the non-DefiniteBG region plus a one pixel ring of
  // clamped background; everything further out cannot change label or cost.
  const Box crop_box{std::max(active.x0 - 1, 0), std::max(active.y0 - 1, 0),
                     std::min(active.x1 + 1, image.width() - 1), std::min(active.y1 + 1, image.height() - 1)};
  const RasterImage crop_image = detail::crop(image, crop_box);
  const Trimap crop_trimap = detail::crop(trimap, crop_box);

  std::vector<Rgb> fg_pixels, bg_pixels;
  detail::split_by_label(image, result.mask, fg_pixels, bg_pixels);
  std::optional<ColorMixtureModel> fg_model =
      init_by_kmeans(fg_pixels, config.components_per_side, config.seed, config.covariance_floor).model;
  std::optional<ColorMixtureModel> bg_model =
      init_by_kmeans(bg_pixels, config.components_per_side, config.seed + 1, config.covariance_floor).model;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    detail::split_by_label(image, result.mask, fg_pixels, bg_pixels);
    if (fg_pixels.empty() || bg_pixels.empty()) break;
    // (1) best component per pixel, (2) refit.
    {
      const auto fg_assign = assign_components(*fg_model, fg_pixels);
      const auto bg_assign = assign_components(*bg_model, bg_pixels);
      fg_model = refit(fg_pixels, fg_assign, static_cast<int>(fg_model->size()), config.covariance_floor);
      bg_model = refit(bg_pixels, bg_assign, static_cast<int>(bg_model->size()), config.covariance_floor);
    }
    result.pre_cut_energy_trace.push_back(energy(image, result.mask, *fg_model, *bg_model, params, &trimap));

    // (3) cut and relabel Probable pixels.
    const GridGraph graph = build_graph(crop_image, crop_trimap, *fg_model, *bg_model, params);
    const CutResult cut = max_flow(graph);
    std::size_t changed = 0;
    for (int y = 0; y < crop_image.height(); ++y)
      for (int x = 0; x < crop_image.width(); ++x) {
        if (is_definite(crop_trimap(x, y))) continue;
        std::uint8_t& label = result.mask(x + crop_box.x0, y + crop_box.y0);
        const std::uint8_t next = cut.side(x, y);
        if (label != next) {
          label = next;
          ++changed;
        }
      }
    ++result.iterations_run;
    result.final_energy = energy(image, result.mask, *fg_model, *bg_model, params, &trimap);
    result.energy_trace.push_back(result.final_energy);
    if (static_cast<double>(changed) < config.convergence_fraction * static_cast<double>(probable)) break;
  }
  return result;
}

}  // namespace extrseg
