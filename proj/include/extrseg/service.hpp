#pragma once

// HTTP front end: request validation, the shared segmentation pipeline used
// by both the service and the CLI, and the cpp-httplib server wiring.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

// Bursts of health probes would otherwise wait on SYN retries.
#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 256
#endif
#include "httplib.h"
#include "json.hpp"

#include "extrseg/error.hpp"
#include "extrseg/eval.hpp"
#include "extrseg/extreme_click.hpp"
#include "extrseg/grabcut.hpp"
#include "extrseg/image_io.hpp"
#include "extrseg/raster.hpp"

namespace extrseg {

inline constexpr std::string_view kVersion = "0.3.0";
inline constexpr int kDefaultMaxDimension = 4096;

// ---------------------------------------------------------------------------
// base64

inline std::string base64_encode(std::span<const std::uint8_t> data) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < data.size()) {
    std::uint32_t v = data[i] << 16;
    if (i + 1 < data.size()) v |= data[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < data.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

/// Accepts standard or URL-safe alphabets, optional padding, embedded
/// whitespace, and a leading "data:...;base64," prefix.
inline std::optional<Bytes> base64_decode(std::string_view text) {
  if (text.starts_with("data:")) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) return std::nullopt;
    text.remove_prefix(comma + 1);
  }
  Bytes out;
  out.reserve(text.size() * 3 / 4);
  std::uint32_t acc = 0;
  int bits = 0;
  bool padding = false;
  for (char c : text) {
    int v;
    if (c >= 'A' && c <= 'Z') v = c - 'A';
    else if (c >= 'a' && c <= 'z') v = c - 'a' + 26;
    else if (c >= '0' && c <= '9') v = c - '0' + 52;
    else if (c == '+' || c == '-') v = 62;
    else if (c == '/' || c == '_') v = 63;
    else if (c == '=') { padding = true; continue; }
    else if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
    else return std::nullopt;
    if (padding) return std::nullopt;
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline shared by CLI and service

/// Four clicks -> trimap -> GrabCut. In rect mode the first and third points
/// are opposite box corners.
inline SegmentationResult run_pipeline(const RasterImage& image, std::span<const Point, 4> points, EvalMode mode,
                                       const SegmentationConfig& config) {
  if (mode == EvalMode::Rect) {
    const Box box{std::min(points[0].x, points[2].x), std::min(points[0].y, points[2].y),
                  std::max(points[0].x, points[2].x), std::max(points[0].y, points[2].y)};
    return segment(image, build_trimap_rect(box, image.width(), image.height()), config);
  }
  return segment(image, build_trimap_extr(image, ExtremeClicks::from_points(points)), config);
}

/// Area check shared by the service and the CLI: clicks spanning a single row
/// or column enclose nothing.
inline bool is_degenerate_region(std::span<const Point, 4> points, EvalMode mode) {
  Box b;
  if (mode == EvalMode::Rect) {
    b = Box{std::min(points[0].x, points[2].x), std::min(points[0].y, points[2].y),
            std::max(points[0].x, points[2].x), std::max(points[0].y, points[2].y)};
  } else {
    b = ExtremeClicks::from_points(points).box();
  }
  return b.width() < 2 || b.height() < 2;
}

// ---------------------------------------------------------------------------
// Request handling

struct ServiceOptions {
  int max_dimension = kDefaultMaxDimension;
  SegmentationConfig config;
  /// Upper bound on concurrently running segmentations.
  unsigned concurrency = std::max(1u, std::thread::hardware_concurrency());
  std::filesystem::path static_dir;
};

struct HttpReply {
  int status = 200;
  std::string body;
};

namespace detail {

inline HttpReply error_reply(int status, std::string_view error, std::string_view message) {
  return {status, nlohmann::json{{"error", error}, {"message", message}}.dump()};
}

}  // namespace detail

inline HttpReply handle_health() {
  return {200, nlohmann::json{{"status", "ok"}, {"version", kVersion}}.dump()};
}

/// POST /segment body -> response. Every failure maps to a documented status:
/// 400 BadRequest/BadPoints/MalformedImage, 413 TooLarge, 422 DegenerateRegion.
inline HttpReply handle_segment(std::string_view body, const ServiceOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  const nlohmann::json req = nlohmann::json::parse(body, nullptr, false);
  if (req.is_discarded() || !req.is_object()) return detail::error_reply(400, "BadRequest", "body is not a JSON object");

  EvalMode mode = EvalMode::Extr;
  if (req.contains("mode")) {
    const auto parsed = req["mode"].is_string() ? parse_mode(req["mode"].get<std::string>()) : std::nullopt;
    if (!parsed) return detail::error_reply(400, "BadRequest", "mode must be \"extr\" or \"rect\"");
    mode = *parsed;
  }
  SegmentationConfig config = opts.config;
  if (req.contains("iterations")) {
    const auto& it = req["iterations"];
    if (!it.is_number_integer() || it.get<long long>() < 1 || it.get<long long>() > 100)
      return detail::error_reply(400, "BadRequest", "iterations must be an integer in [1, 100]");
    config.max_iterations = static_cast<int>(it.get<long long>());
  }

  if (!req.contains("points") || !req["points"].is_array() || req["points"].size() != 4)
    return detail::error_reply(400, "BadPoints", "exactly 4 points are required");
  std::array<Point, 4> points{};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = req["points"][i];
    if (!p.is_object() || !p.contains("x") || !p.contains("y") || !p["x"].is_number_integer() ||
        !p["y"].is_number_integer())
      return detail::error_reply(400, "BadPoints", "point " + std::to_string(i) + " must be {x, y} integers");
    const long long x = p["x"].get<long long>();
    const long long y = p["y"].get<long long>();
    if (x < 0 || y < 0 || x > 1 << 20 || y > 1 << 20)
      return detail::error_reply(400, "BadPoints", "point " + std::to_string(i) + " out of bounds");
    points[i] = {static_cast<int>(x), static_cast<int>(y)};
  }

  if (!req.contains("image") || !req["image"].is_string())
    return detail::error_reply(400, "MalformedImage", "image must be a base64 string");
  const auto bytes = base64_decode(req["image"].get<std::string>());
  if (!bytes) return detail::error_reply(400, "MalformedImage", "image is not valid base64");
  RasterImage image;
  try {
    image = decode_image(*bytes);
  } catch (const Error& e) {
    return detail::error_reply(400, "MalformedImage", e.what());
  }
  if (image.width() > opts.max_dimension || image.height() > opts.max_dimension)
    return detail::error_reply(413, "TooLarge",
                               std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                                   " exceeds the " + std::to_string(opts.max_dimension) + " pixel limit");
  for (std::size_t i = 0; i < 4; ++i)
    if (!image.in_bounds(points[i]))
      return detail::error_reply(400, "BadPoints", "point " + std::to_string(i) + " outside the image");
  if (is_degenerate_region(points, mode))
    return detail::error_reply(422, "DegenerateRegion", "clicks enclose a zero-area region");

  SegmentationResult result;
  try {
    result = run_pipeline(image, points, mode, config);
  } catch (const Error& e) {
    return detail::error_reply(422, "DegenerateRegion", e.what());
  }
  const auto elapsed =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {200, nlohmann::json{{"width", image.width()},
                              {"height", image.height()},
                              {"mask_rle", to_token(rle_encode(result.mask))},
                              {"iterations_run", result.iterations_run},
                              {"final_energy", result.final_energy},
                              {"elapsed_ms", std::round(elapsed * 1000.0) / 1000.0}}
                   .dump()};
}

/// Routes GET /healthz, POST /segment and, when a static directory is
/// configured, GET / for the annotation UI. Health checks bypass the
/// segmentation limit so they answer while work is in flight.
class SegmentationServer {
 public:
  explicit SegmentationServer(ServiceOptions opts)
      : opts_(std::move(opts)), slots_(static_cast<std::ptrdiff_t>(std::max(1u, opts_.concurrency))) {
    const unsigned pool = std::max(1u, opts_.concurrency) + 8;
    server_.new_task_queue = [pool] { return new httplib::ThreadPool(pool); };
    server_.set_payload_max_length(256u << 20);
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      const HttpReply r = handle_health();
      res.status = r.status;
      res.set_content(r.body, "application/json");
    });
    server_.Post("/segment", [this](const httplib::Request& req, httplib::Response& res) {
      slots_.acquire();
      HttpReply r;
      try {
        r = handle_segment(req.body, opts_);
      } catch (const std::exception& e) {
        r = detail::error_reply(500, "Internal", e.what());
      }
      slots_.release();
      res.status = r.status;
      res.set_content(r.body, "application/json");
    });
    if (!opts_.static_dir.empty()) server_.set_mount_point("/", opts_.static_dir.string());
  }

  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  int bind_any(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  bool is_running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  ServiceOptions opts_;
  std::counting_semaphore<1 << 16> slots_;
  httplib::Server server_;
};

}  // namespace extrseg
