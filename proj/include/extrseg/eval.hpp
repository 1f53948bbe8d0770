#pragma once

// Benchmark harness: annotation ingestion, synthetic extreme clicks from
// ground truth, per-class mean IoU aggregation, and a synthetic corpus
// generator for desk-scale runs.

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "extrseg/error.hpp"
#include "extrseg/extreme_click.hpp"
#include "extrseg/grabcut.hpp"
#include "extrseg/image_io.hpp"
#include "extrseg/raster.hpp"

namespace extrseg {

enum class MaterialClass : int {
  Animal, Ceramic, Fabric, Flora, Food, Gem, Glass, Ground, Liquid, Metal, Paper, Skin, Sky, Stone, Wood
};

inline constexpr std::array<std::string_view, 15> kMaterialNames{
    "animal", "ceramic", "fabric", "flora", "food", "gem",   "glass", "ground",
    "liquid", "metal",   "paper",  "skin",  "sky",  "stone", "wood"};

inline std::string_view to_string(MaterialClass c) { return kMaterialNames[static_cast<std::size_t>(c)]; }

inline std::optional<MaterialClass> parse_material(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (std::size_t i = 0; i < kMaterialNames.size(); ++i)
    if (kMaterialNames[i] == lower) return static_cast<MaterialClass>(i);
  return std::nullopt;
}

struct AnnotationRecord {
  std::string image;
  MaterialClass material = MaterialClass::Animal;
  std::vector<Vertex> polygon;
  /// 1-based line in the source file, 0 when not parsed from a file.
  std::size_t line = 0;
};

struct RecordError {
  std::size_t line = 0;
  std::string reason;
};

struct ParsedAnnotations {
  std::vector<AnnotationRecord> records;
  std::vector<RecordError> errors;
};

/// Newline-delimited JSON, one {"image", "class", "polygon": [x1, y1, ...]}
/// object per line. Bad lines are collected; it only throws when every
/// non-blank line is bad.
inline ParsedAnnotations parse_annotations(std::string_view text) {
  ParsedAnnotations out;
  std::size_t line_no = 0;
  std::size_t nonblank = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    ++nonblank;
    auto reject = [&](std::string reason) { out.errors.push_back({line_no, std::move(reason)}); };

    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      reject("not a JSON object");
      continue;
    }
    if (!j.contains("image") || !j["image"].is_string() || j["image"].get<std::string>().empty()) {
      reject("missing image path");
      continue;
    }
    if (!j.contains("class") || !j["class"].is_string()) {
      reject("missing class");
      continue;
    }
    const auto material = parse_material(j["class"].get<std::string>());
    if (!material) {
      reject("unknown class '" + j["class"].get<std::string>() + "'");
      continue;
    }
    if (!j.contains("polygon") || !j["polygon"].is_array()) {
      reject("missing polygon");
      continue;
    }
    const auto& coords = j["polygon"];
    if (coords.size() % 2 != 0) {
      reject("odd coordinate count " + std::to_string(coords.size()));
      continue;
    }
    if (coords.size() < 6) {
      reject("polygon needs at least 3 vertices");
      continue;
    }
    AnnotationRecord rec{j["image"].get<std::string>(), *material, {}, line_no};
    bool numeric = true;
    for (std::size_t i = 0; i < coords.size(); i += 2) {
      if (!coords[i].is_number() || !coords[i + 1].is_number()) {
        numeric = false;
        break;
      }
      rec.polygon.push_back({coords[i].get<double>(), coords[i + 1].get<double>()});
      if (!std::isfinite(rec.polygon.back().x) || !std::isfinite(rec.polygon.back().y)) numeric = false;
    }
    if (!numeric) {
      reject("non-numeric polygon coordinate");
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  if (nonblank > 0 && out.records.empty())
    throw Error(Errc::MalformedRecord,
                "line " + std::to_string(out.errors.front().line) + ": " + out.errors.front().reason);
  return out;
}

inline std::string to_json_line(const AnnotationRecord& rec) {
  nlohmann::json j;
  j["image"] = rec.image;
  j["class"] = std::string(to_string(rec.material));
  nlohmann::json coords = nlohmann::json::array();
  for (const Vertex& v : rec.polygon) {
    coords.push_back(v.x);
    coords.push_back(v.y);
  }
  j["polygon"] = std::move(coords);
  return j.dump();
}

/// Synthetic extreme clicks: extremal pixels in each direction, ties broken by
/// the lower median of the other coordinate.
inline ExtremeClicks extract_extreme_points(const BinaryMask& mask) {
  const Box b = tight_box(mask);
  auto lower_median = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
  };
  std::vector<int> xs;
  auto row = [&](int y) {
    xs.clear();
    for (int x = b.x0; x <= b.x1; ++x)
      if (mask(x, y)) xs.push_back(x);
    return Point{lower_median(xs), y};
  };
  auto column = [&](int x) {
    xs.clear();
    for (int y = b.y0; y <= b.y1; ++y)
      if (mask(x, y)) xs.push_back(y);
    return Point{x, lower_median(xs)};
  };
  return ExtremeClicks{row(b.y0), row(b.y1), column(b.x0), column(b.x1)};
}

enum class EvalMode { Extr, Rect };

inline std::string_view to_string(EvalMode m) { return m == EvalMode::Extr ? "extr" : "rect"; }

inline std::optional<EvalMode> parse_mode(std::string_view s) {
  if (s == "extr") return EvalMode::Extr;
  if (s == "rect") return EvalMode::Rect;
  return std::nullopt;
}

/// Trimap for the given initialisation from a ground-truth mask.
inline Trimap trimap_from_ground_truth(const RasterImage& image, const BinaryMask& gt, EvalMode mode) {
  if (mode == EvalMode::Rect) return build_trimap_rect(tight_box(gt), gt.width(), gt.height());
  return build_trimap_extr(image, extract_extreme_points(gt));
}

struct ClassStats {
  std::size_t count = 0;
  double mean_iou = 0.0;
};

struct EvalFailure {
  std::size_t record = 0;  // position in the input list
  std::size_t line = 0;
  std::string image;
  std::string reason;
};

struct EvalReport {
  EvalMode mode = EvalMode::Extr;
  SegmentationConfig config;
  std::array<ClassStats, 15> per_class{};
  double overall_micro = 0.0;
  double overall_macro = 0.0;
  std::size_t evaluated = 0;
  std::size_t total = 0;
  /// IoU per input record; NaN where the record failed.
  std::vector<double> record_iou;
  std::vector<EvalFailure> failures;
};

namespace detail {

// Order-free mean: sorting first makes the sum independent of record order.
inline double stable_mean(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace detail

/// Runs the initialisation + GrabCut on every record and aggregates IoU
/// against the rasterised ground truth. Work is spread over `jobs` threads;
/// aggregation does not depend on scheduling or record order.
inline EvalReport evaluate_corpus(const std::vector<AnnotationRecord>& records,
                                  const std::filesystem::path& images_root, EvalMode mode,
                                  const SegmentationConfig& config, unsigned jobs = 1) {
  if (records.empty()) throw Error(Errc::NoValidRecords, "no annotation records to evaluate");
  config.validate();

  const std::size_t n = records.size();
  std::vector<double> ious(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> reasons(n);

  auto run_one = [&](std::size_t i) {
    const AnnotationRecord& rec = records[i];
    try {
      const RasterImage image = load_image(images_root / rec.image);
      const BinaryMask gt = rasterize_polygon(rec.polygon, image.width(), image.height());
      if (count_ones(gt) == 0) throw Error(Errc::EmptyMask, "ground-truth polygon covers no pixels");
      const Trimap trimap = trimap_from_ground_truth(image, gt, mode);
      ious[i] = iou(segment(image, trimap, config).mask, gt);
    } catch (const std::exception& e) {
      reasons[i] = e.what();
    }
  };

  jobs = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(std::min<std::size_t>(n, 256)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run_one(i);
      });
  }

  EvalReport report;
  report.mode = mode;
  report.config = config;
  report.total = n;
  report.record_iou = ious;
  std::array<std::vector<double>, 15> by_class;
  std::vector<double> all;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(ious[i])) {
      report.failures.push_back({i, records[i].line, records[i].image, reasons[i]});
      continue;
    }
    by_class[static_cast<std::size_t>(records[i].material)].push_back(ious[i]);
    all.push_back(ious[i]);
  }
  report.evaluated = all.size();
  if (all.empty()) throw Error(Errc::NoValidRecords, "every record failed: " + report.failures.front().reason);

  std::vector<double> class_means;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    report.per_class[c].count = by_class[c].size();
    if (by_class[c].empty()) continue;
    report.per_class[c].mean_iou = detail::stable_mean(by_class[c]);
    class_means.push_back(report.per_class[c].mean_iou);
  }
  report.overall_micro = detail::stable_mean(all);
  report.overall_macro = detail::stable_mean(class_means);
  return report;
}

/// IoU in [0, 1] as a percentage with one decimal.
inline double as_percent(double v) { return std::round(v * 1000.0) / 10.0; }

inline nlohmann::json config_to_json(const SegmentationConfig& c) {
  return {{"components_per_side", c.components_per_side},
          {"max_iterations", c.max_iterations},
          {"convergence_fraction", c.convergence_fraction},
          {"gamma", c.gamma},
          {"seed", c.seed},
          {"covariance_floor", c.covariance_floor}};
}

/// Report document; IoUs are percentages with one decimal.
inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const ClassStats& s = r.per_class[c];
    per_class[std::string(kMaterialNames[c])] = {
        {"count", s.count}, {"mean_iou", s.count ? nlohmann::json(as_percent(s.mean_iou)) : nlohmann::json(nullptr)}};
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : r.failures)
    failures.push_back({{"record", f.record}, {"line", f.line}, {"image", f.image}, {"reason", f.reason}});
  return {{"mode", std::string(to_string(r.mode))},
          {"config", config_to_json(r.config)},
          {"per_class", std::move(per_class)},
          {"overall_micro", as_percent(r.overall_micro)},
          {"overall_macro", as_percent(r.overall_macro)},
          {"evaluated", r.evaluated},
          {"total", r.total},
          {"failures", std::move(failures)}};
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SyntheticCorpusOptions {
  int count = 50;
  std::uint64_t seed = 7;
  int size = 256;
};

namespace detail {

/// Smooth lattice noise summed over octaves, roughly in [-1, 1].
class ValueNoise {
 public:
  ValueNoise(Rng& rng, int width, int height, int cell) : cell_(cell) {
    gw_ = width / cell + 2;
    gh_ = height / cell + 2;
    lattice_.resize(static_cast<std::size_t>(gw_ * gh_));
    for (auto& v : lattice_) v = rng.uniform(-1.0, 1.0);
  }

  double operator()(int x, int y) const {
    const double fx = static_cast<double>(x) / cell_;
    const double fy = static_cast<double>(y) / cell_;
    const int ix = static_cast<int>(fx);
    const int iy = static_cast<int>(fy);
    const double tx = smooth(fx - ix);
    const double ty = smooth(fy - iy);
    const double a = at(ix, iy) + (at(ix + 1, iy) - at(ix, iy)) * tx;
    const double b = at(ix, iy + 1) + (at(ix + 1, iy + 1) - at(ix, iy + 1)) * tx;
    return a + (b - a) * ty;
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  double at(int x, int y) const { return lattice_[static_cast<std::size_t>(y * gw_ + x)]; }

  int cell_;
  int gw_ = 0;
  int gh_ = 0;
  std::vector<double> lattice_;
};

class Texture {
 public:
  Texture(Rng& rng, int w, int h, double amplitude)
      : coarse_(rng, w, h, 32), fine_(rng, w, h, 8), amplitude_(amplitude) {
    for (auto& c : tint_) c = rng.uniform(0.6, 1.0);
  }
  double operator()(int x, int y, int channel) const {
    return amplitude_ * tint_[static_cast<std::size_t>(channel)] * (0.7 * coarse_(x, y) + 0.3 * fine_(x, y));
  }

 private:
  ValueNoise coarse_;
  ValueNoise fine_;
  double amplitude_;
  std::array<double, 3> tint_{};
};

inline double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

inline std::vector<Vertex> random_blob(Rng& rng, int size) {
  const int shape = static_cast<int>(rng.below(3));
  const double margin = 0.12 * size;
  const double max_r = 0.32 * size;
  const double rx = rng.uniform(0.12 * size, max_r);
  const double ry = rng.uniform(0.12 * size, max_r);
  const double cx = rng.uniform(margin + rx, size - margin - rx);
  const double cy = rng.uniform(margin + ry, size - margin - ry);
  const double rot = rng.uniform(0.0, std::numbers::pi);
  const bool wobble = rng.uniform() < 0.5;
  const double wobble_amp = rng.uniform(0.03, 0.08);
  const double wobble_freq = static_cast<double>(4 + rng.below(6));
  const double wobble_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const int points = 3 + static_cast<int>(rng.below(4));   // star arms
  const double inner = rng.uniform(0.45, 0.7);             // star inner radius ratio
  const double corner = rng.uniform(0.15, 0.4);            // rounded-rectangle corner ratio

  constexpr int kSamples = 144;
  std::vector<Vertex> poly;
  poly.reserve(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    const double t = 2.0 * std::numbers::pi * i / kSamples;
    double ux = std::cos(t);
    double uy = std::sin(t);
    double r = 1.0;
    if (shape == 1) {
      // Superellipse as a rounded rectangle.
      const double p = 2.0 / corner;
      r = std::pow(std::pow(std::abs(ux), p) + std::pow(std::abs(uy), p), -1.0 / p);
    } else if (shape == 2) {
      const double phase = std::fmod(t * points / (2.0 * std::numbers::pi), 1.0);
      r = inner + (1.0 - inner) * std::abs(1.0 - 2.0 * phase);
    }
    if (wobble) r *= 1.0 + wobble_amp * std::sin(wobble_freq * t + wobble_phase);
    const double lx = r * ux * rx;
    const double ly = r * uy * ry;
    const double x = cx + lx * std::cos(rot) - ly * std::sin(rot);
    const double y = cy + lx * std::sin(rot) + ly * std::cos(rot);
    poly.push_back({round3(std::clamp(x, 0.0, double(size))), round3(std::clamp(y, 0.0, double(size)))});
  }
  return poly;
}

inline Rgb random_color(Rng& rng) { return {rng.uniform(20, 235), rng.uniform(20, 235), rng.uniform(20, 235)}; }

}  // namespace detail

/// Writes `count` painted-looking images (textured background, one textured
/// foreground blob) plus annotations.jsonl into `out_dir`. Fully determined
/// by the seed. Returns the records written.
inline std::vector<AnnotationRecord> generate_synthetic_corpus(const std::filesystem::path& out_dir,
                                                               const SyntheticCorpusOptions& opts = {}) {
  if (opts.count < 1) throw Error(Errc::InvalidArgument, "corpus count must be >= 1");
  if (opts.size < 32) throw Error(Errc::InvalidArgument, "image size must be >= 32");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

  std::vector<AnnotationRecord> records;
  std::string jsonl;
  for (int i = 0; i < opts.count; ++i) {
    detail::Rng rng(opts.seed * 1000003ULL + static_cast<std::uint64_t>(i));
    const int s = opts.size;
    const Rgb bg = detail::random_color(rng);
    Rgb fg = detail::random_color(rng);
    while (std::sqrt(squared_distance(fg, bg)) < 80.0) fg = detail::random_color(rng);
    const detail::Texture bg_tex(rng, s, s, rng.uniform(10.0, 25.0));
    const detail::Texture fg_tex(rng, s, s, rng.uniform(8.0, 20.0));
    std::vector<Vertex> poly = detail::random_blob(rng, s);
    BinaryMask mask = rasterize_polygon(poly, s, s);
    while (count_ones(mask) < 100) {
      poly = detail::random_blob(rng, s);
      mask = rasterize_polygon(poly, s, s);
    }

    RasterImage img(s, s);
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        const bool inside = mask(x, y) != 0;
        const Rgb& base = inside ? fg : bg;
        const detail::Texture& tex = inside ? fg_tex : bg_tex;
        for (int c = 0; c < 3; ++c)
          img(x, y)[static_cast<std::size_t>(c)] =
              std::round(std::clamp(base[static_cast<std::size_t>(c)] + tex(x, y, c), 0.0, 255.0));
      }

    char name[32];
    std::snprintf(name, sizeof name, "images/%04d.png", i);
    write_file(out_dir / name, encode_png(img));
    AnnotationRecord rec{name, static_cast<MaterialClass>(i % 15), std::move(poly),
                         static_cast<std::size_t>(i + 1)};
    jsonl += to_json_line(rec);
    jsonl += '\n';
    records.push_back(std::move(rec));
  }
  write_file(out_dir / "annotations.jsonl", jsonl);
  return records;
}

}  // namespace extrseg
