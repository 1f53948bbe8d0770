#pragma once

// Image, mask and trimap grids plus the mask utilities every other module
// leans on: polygon fill, run-length coding and intersection-over-union.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "extrseg/error.hpp"

namespace extrseg {

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Inclusive pixel rectangle [x0, x1] x [y0, y1].
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0 + 1; }
  int height() const noexcept { return y1 - y0 + 1; }
  bool contains(Point p) const noexcept { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  bool on_border(Point p) const noexcept {
    return contains(p) && (p.x == x0 || p.x == x1 || p.y == y0 || p.y == y1);
  }
  friend bool operator==(const Box&, const Box&) = default;
};

using Rgb = std::array<double, 3>;

inline double squared_distance(const Rgb& a, const Rgb& b) noexcept {
  const double d0 = a[0] - b[0];
  const double d1 = a[1] - b[1];
  const double d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

namespace detail {

inline std::size_t checked_area(int width, int height) {
  if (width < 1 || height < 1)
    throw Error(Errc::InvalidArgument,
                "grid dimensions must be positive, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace detail

/// Row-major grid of values; the shared shape of images, masks and trimaps.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), cells_(detail::checked_area(width, height), fill) {}
  Grid(int width, int height, std::vector<T> cells)
      : width_(width), height_(height), cells_(std::move(cells)) {
    if (cells_.size() != detail::checked_area(width, height))
      throw Error(Errc::DimensionMismatch, "cell count does not match width x height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return cells_.size(); }
  bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool in_bounds(Point p) const noexcept { return in_bounds(p.x, p.y); }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) noexcept { return cells_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return cells_[index(x, y)]; }
  T& operator[](std::size_t i) noexcept { return cells_[i]; }
  const T& operator[](std::size_t i) const noexcept { return cells_[i]; }

  std::span<T> cells() noexcept { return cells_; }
  std::span<const T> cells() const noexcept { return cells_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> cells_;
};

/// RGB image with channels stored as reals in [0, 255].
using RasterImage = Grid<Rgb>;
/// Binary occupancy mask; cells are 0 or 1.
using BinaryMask = Grid<std::uint8_t>;
/// Per-pixel scalar map (luma, edge probability, ...).
using ScalarMap = Grid<double>;

enum class TrimapLabel : std::uint8_t { DefiniteBG = 0, DefiniteFG = 1, ProbableBG = 2, ProbableFG = 3 };

inline bool is_definite(TrimapLabel l) noexcept {
  return l == TrimapLabel::DefiniteBG || l == TrimapLabel::DefiniteFG;
}
inline bool is_foreground(TrimapLabel l) noexcept {
  return l == TrimapLabel::DefiniteFG || l == TrimapLabel::ProbableFG;
}

using Trimap = Grid<TrimapLabel>;

template <typename T>
void require_same_shape(const Grid<T>& a, const auto& b, std::string_view what) {
  if (!a.same_shape(b))
    throw Error(Errc::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

inline std::size_t count_ones(const BinaryMask& m) noexcept {
  return static_cast<std::size_t>(std::count_if(m.cells().begin(), m.cells().end(), [](auto v) { return v != 0; }));
}

/// Tight bounding box of the set pixels. Throws EmptyMask for an empty mask.
inline Box tight_box(const BinaryMask& m) {
  Box b{m.width(), m.height(), -1, -1};
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y)) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
  if (b.x1 < 0) throw Error(Errc::EmptyMask, "mask has no foreground pixels");
  return b;
}

// ---------------------------------------------------------------------------
// Polygon fill

struct Vertex {
  double x = 0;
  double y = 0;
};

/// Even-odd scanline fill sampled at pixel centres (x + 0.5, y + 0.5).
/// Pixels outside the canvas are clipped.
inline BinaryMask rasterize_polygon(std::span<const Vertex> vertices, int width, int height) {
  if (vertices.size() < 3)
    throw Error(Errc::DegeneratePolygon, "polygon needs at least 3 vertices, got " + std::to_string(vertices.size()));
  for (const auto& v : vertices)
    if (!std::isfinite(v.x) || !std::isfinite(v.y))
      throw Error(Errc::DegeneratePolygon, "polygon has a non-finite coordinate");

  BinaryMask mask(width, height, 0);
  std::vector<double> crossings;
  const std::size_t n = vertices.size();
  for (int y = 0; y < height; ++y) {
    const double yc = y + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Vertex& a = vertices[i];
      const Vertex& b = vertices[j];
      // Half-open in y so shared vertices are counted once.
      if ((a.y > yc) != (b.y > yc)) crossings.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // Centre x + 0.5 filled when crossings[k] <= x + 0.5 < crossings[k + 1].
      const double lo = std::ceil(crossings[k] - 0.5);
      const double hi = std::ceil(crossings[k + 1] - 0.5);
      const int x0 = static_cast<int>(std::max(lo, 0.0));
      const int x1 = static_cast<int>(std::min(hi, static_cast<double>(width)));
      for (int x = x0; x < x1; ++x) mask(x, y) = 1;
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Metrics

/// |a & b| / |a | b|; two empty masks score 1.0.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "iou");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0;
    const bool pb = b[i] != 0;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Rec. 601 luma.
inline ScalarMap to_grayscale(const RasterImage& image) {
  ScalarMap out(image.width(), image.height(), 0.0);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const Rgb& p = image[i];
    out[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run-length coding

/// Alternating zeros/ones run counts in row-major order, starting with a
/// (possibly empty) zeros run.
struct RunLength {
  int width = 0;
  int height = 0;
  std::vector<std::uint64_t> runs;

  friend bool operator==(const RunLength&, const RunLength&) = default;
};

inline RunLength rle_encode(const BinaryMask& mask) {
  RunLength rle{mask.width(), mask.height(), {}};
  std::uint8_t current = 0;
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const std::uint8_t bit = mask[i] ? 1 : 0;
    if (bit != current) {
      rle.runs.push_back(count);
      current = bit;
      count = 0;
    }
    ++count;
  }
  rle.runs.push_back(count);
  return rle;
}

inline BinaryMask rle_decode(const RunLength& rle) {
  const std::size_t area = detail::checked_area(rle.width, rle.height);
  std::uint64_t total = 0;
  for (auto r : rle.runs) total += r;
  if (total != area)
    throw Error(Errc::RunSumMismatch,
                "runs sum to " + std::to_string(total) + ", expected " + std::to_string(area));
  BinaryMask mask(rle.width, rle.height, 0);
  std::size_t pos = 0;
  std::uint8_t bit = 0;
  for (auto r : rle.runs) {
    if (bit)
      std::fill_n(mask.cells().begin() + static_cast<std::ptrdiff_t>(pos), r, std::uint8_t{1});
    pos += r;
    bit ^= 1;
  }
  return mask;
}

/// Text form "w,h:r0,r1,...".
inline std::string to_token(const RunLength& rle) {
  std::string out = std::to_string(rle.width) + "," + std::to_string(rle.height) + ":";
  for (std::size_t i = 0; i < rle.runs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(rle.runs[i]);
  }
  return out;
}

namespace detail {

inline std::uint64_t parse_uint(std::string_view s, std::string_view field) {
  if (s.empty() || s.size() > 19) throw Error(Errc::InvalidArgument, "bad " + std::string(field) + " in RLE token");
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') throw Error(Errc::InvalidArgument, "bad " + std::string(field) + " in RLE token");
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

}  // namespace detail

inline RunLength parse_token(std::string_view token) {
  const auto colon = token.find(':');
  if (colon == std::string_view::npos) throw Error(Errc::InvalidArgument, "RLE token lacks ':'");
  const auto dims = token.substr(0, colon);
  const auto comma = dims.find(',');
  if (comma == std::string_view::npos) throw Error(Errc::InvalidArgument, "RLE token lacks 'w,h'");
  RunLength rle;
  rle.width = static_cast<int>(detail::parse_uint(dims.substr(0, comma), "width"));
  rle.height = static_cast<int>(detail::parse_uint(dims.substr(comma + 1), "height"));
  auto rest = token.substr(colon + 1);
  while (!rest.empty()) {
    const auto next = rest.find(',');
    rle.runs.push_back(detail::parse_uint(rest.substr(0, next), "run"));
    if (next == std::string_view::npos) break;
    rest = rest.substr(next + 1);
  }
  return rle;
}

}  // namespace extrseg
