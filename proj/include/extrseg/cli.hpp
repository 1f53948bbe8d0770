#pragma once

// `seg` command line: segment | eval | synth | serve.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "extrseg/eval.hpp"
#include "extrseg/image_io.hpp"
#include "extrseg/service.hpp"

namespace extrseg {

namespace detail {

/// "x,y;x,y;x,y;x,y" -> four points.
inline std::optional<std::array<Point, 4>> parse_points(std::string_view text) {
  std::vector<Point> pts;
  while (!text.empty()) {
    const auto semi = text.find(';');
    const std::string_view item = text.substr(0, semi);
    const auto comma = item.find(',');
    if (comma == std::string_view::npos) return std::nullopt;
    auto to_int = [](std::string_view s) -> std::optional<int> {
      while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
      while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
      if (s.empty() || s.size() > 9) return std::nullopt;
      int v = 0;
      for (char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + (c - '0');
      }
      return v;
    };
    const auto x = to_int(item.substr(0, comma));
    const auto y = to_int(item.substr(comma + 1));
    if (!x || !y) return std::nullopt;
    pts.push_back({*x, *y});
    if (semi == std::string_view::npos) break;
    text.remove_prefix(semi + 1);
  }
  if (pts.size() != 4) return std::nullopt;
  return std::array<Point, 4>{pts[0], pts[1], pts[2], pts[3]};
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void add_config_flags(CLI::App* cmd, SegmentationConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  cmd->add_option("--gamma", cfg.gamma, "Pairwise strength")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--iters", cfg.max_iterations, "Maximum GrabCut iterations")
      ->capture_default_str()
      ->check(CLI::Range(1, 1000));
  cmd->add_option("--components", cfg.components_per_side, "Mixture components per side")
      ->capture_default_str()
      ->check(CLI::Range(1, 64));
}

inline CLI::Validator mode_validator() {
  return CLI::IsMember({"extr", "rect"});
}

inline SegmentationServer* g_server = nullptr;

inline void stop_server(int) {
  if (g_server) g_server->stop();
}

}  // namespace detail

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  CLI::App app{"Extreme-click GrabCut segmentation toolkit", "seg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SegmentationConfig cfg;

  std::string image_path, points_text, mode_text = "extr", out_path;
  auto* seg_cmd = app.add_subcommand("segment", "Segment one image from four clicks, writing a mask PNG");
  seg_cmd->add_option("--image", image_path, "Input PNG or PPM")->required();
  seg_cmd->add_option("--points", points_text, "Four clicks \"x,y;x,y;x,y;x,y\"")->required();
  seg_cmd->add_option("--mode", mode_text, "extr or rect")->capture_default_str()->check(detail::mode_validator());
  seg_cmd->add_option("--out", out_path, "Output mask PNG")->required();
  detail::add_config_flags(seg_cmd, cfg);

  std::string images_dir, annotations_path, report_path;
  unsigned jobs = 1;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a corpus and write a mean-IoU report");
  eval_cmd->add_option("--images", images_dir, "Directory image paths are relative to")->required();
  eval_cmd->add_option("--annotations", annotations_path, "Newline-delimited JSON annotations")->required();
  eval_cmd->add_option("--mode", mode_text, "extr or rect")->capture_default_str()->check(detail::mode_validator());
  eval_cmd->add_option("--report", report_path, "Output report JSON")->required();
  eval_cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str()->check(CLI::Range(1, 256));
  detail::add_config_flags(eval_cmd, cfg);

  std::string synth_dir;
  SyntheticCorpusOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic annotated corpus");
  synth_cmd->add_option("--out", synth_dir, "Output directory")->required();
  synth_cmd->add_option("--count", synth.count, "Number of images")->capture_default_str()->check(CLI::Range(1, 100000));
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--size", synth.size, "Image side length")->capture_default_str()->check(CLI::Range(32, 8192));

  int port = 8080;
  std::string host = "127.0.0.1", static_dir;
  ServiceOptions service;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP segmentation service");
  serve_cmd->add_option("--port", port, "Listen port (SEG_PORT overrides)")->capture_default_str()->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host, "Listen address")->capture_default_str();
  serve_cmd->add_option("--static", static_dir, "Directory served at /");
  serve_cmd->add_option("--max-dim", service.max_dimension, "Largest accepted image side")->capture_default_str();
  serve_cmd->add_option("--concurrency", service.concurrency, "Concurrent segmentations")->capture_default_str();
  detail::add_config_flags(serve_cmd, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    const EvalMode mode = *parse_mode(mode_text);
    if (seg_cmd->parsed()) {
      const auto points = detail::parse_points(points_text);
      if (!points) throw detail::UsageError("--points must be four \"x,y\" pairs separated by ';'");
      const RasterImage image = load_image(image_path);
      for (const Point& p : *points)
        if (!image.in_bounds(p)) throw detail::UsageError("--points: click outside the image");
      if (is_degenerate_region(*points, mode)) throw detail::UsageError("--points enclose a zero-area region");
      const SegmentationResult r = run_pipeline(image, *points, mode, cfg);
      write_file(out_path, encode_mask_png(r.mask));
      out << "wrote " << out_path << " (" << count_ones(r.mask) << " foreground pixels, " << r.iterations_run
          << " iterations)\n";
      return 0;
    }
    if (eval_cmd->parsed()) {
      const auto text = read_file(annotations_path);
      const ParsedAnnotations parsed =
          parse_annotations(std::string_view(reinterpret_cast<const char*>(text.data()), text.size()));
      for (const auto& e : parsed.errors) err << annotations_path << ":" << e.line << ": " << e.reason << "\n";
      const EvalReport report = evaluate_corpus(parsed.records, images_dir, mode, cfg, jobs);
      write_file(report_path, to_json(report).dump(2) + "\n");
      out << to_string(mode) << ": " << report.evaluated << "/" << report.total << " evaluated, mean IoU micro "
          << as_percent(report.overall_micro) << "% macro " << as_percent(report.overall_macro) << "%\n";
      return 0;
    }
    if (synth_cmd->parsed()) {
      const auto records = generate_synthetic_corpus(synth_dir, synth);
      out << "wrote " << records.size() << " images to " << synth_dir << "\n";
      return 0;
    }
    if (serve_cmd->parsed()) {
      if (const char* env = std::getenv("SEG_PORT")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (!*env || *end || v < 0 || v > 65535) throw detail::UsageError("SEG_PORT must be a port number");
        port = static_cast<int>(v);
      }
      service.config = cfg;
      service.static_dir = static_dir;
      SegmentationServer server(service);
      if (!server.bind(host, port)) {
        err << "error: cannot bind " << host << ":" << port << "\n";
        return 2;
      }
      detail::g_server = &server;
      std::signal(SIGINT, detail::stop_server);
      std::signal(SIGTERM, detail::stop_server);
      out << "listening on http://" << host << ":" << port << std::endl;
      server.listen_after_bind();
      detail::g_server = nullptr;
      return 0;
    }
  } catch (const detail::UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace extrseg
