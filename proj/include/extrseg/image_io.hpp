#pragma once

// PNG / binary PPM decoding and PNG / PPM encoding. PNG goes through libpng's
// simplified API; PPM is parsed by hand.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "extrseg/error.hpp"
#include "extrseg/raster.hpp"

namespace extrseg {

using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoFailure, "read failed for " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace detail {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

inline bool looks_like_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0;
}

// libpng's simplified API hides the IHDR bit depth, so read it directly.
inline int png_bit_depth(std::span<const std::uint8_t> bytes) {
  // signature(8) + length(4) + "IHDR"(4) + width(4) + height(4) + depth(1)
  if (bytes.size() < 25 || std::memcmp(bytes.data() + 12, "IHDR", 4) != 0)
    throw Error(Errc::MalformedImage, "PNG lacks a leading IHDR chunk");
  return bytes[24];
}

inline RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  const int depth = png_bit_depth(bytes);
  if (depth > 8) throw Error(Errc::UnsupportedFormat, std::to_string(depth) + "-bit PNG");

  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw Error(Errc::MalformedImage, img.message);
  if (img.width < 1 || img.height < 1 || img.width > 1u << 16 || img.height > 1u << 16) {
    png_image_free(&img);
    throw Error(Errc::UnsupportedFormat, "PNG dimensions out of range");
  }
  // Decode as RGBA and discard alpha rather than compositing.
  img.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(Errc::MalformedImage, msg);
  }
  RasterImage out(static_cast<int>(img.width), static_cast<int>(img.height));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {double(buffer[4 * i]), double(buffer[4 * i + 1]), double(buffer[4 * i + 2])};
  return out;
}

inline RasterImage decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* field) {
    skip_space();
    long v = 0;
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && pos - start < 9) v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) throw Error(Errc::MalformedImage, std::string("PPM header: missing ") + field);
    return v;
  };
  const long w = read_int("width");
  const long h = read_int("height");
  const long maxval = read_int("maxval");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw Error(Errc::MalformedImage, "PPM header not terminated");
  ++pos;
  if (w < 1 || h < 1 || w > 1 << 16 || h > 1 << 16) throw Error(Errc::MalformedImage, "PPM dimensions out of range");
  if (maxval < 1 || maxval > 255) throw Error(Errc::UnsupportedFormat, "PPM maxval " + std::to_string(maxval));
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() - pos < need) throw Error(Errc::MalformedImage, "PPM pixel data truncated");
  RasterImage out(static_cast<int>(w), static_cast<int>(h));
  const double scale = 255.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto* p = bytes.data() + pos + 3 * i;
    out[i] = {p[0] * scale, p[1] * scale, p[2] * scale};
  }
  return out;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

inline Bytes write_png(const std::uint8_t* pixels, int width, int height, png_uint_32 format) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels, 0, nullptr))
    throw Error(Errc::IoFailure, img.message);
  Bytes out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels, 0, nullptr))
    throw Error(Errc::IoFailure, img.message);
  out.resize(size);
  return out;
}

}  // namespace detail

/// Decodes an 8-bit PNG (gray, RGB, RGBA or palette) or a binary P6 PPM.
/// Grayscale is replicated to three channels; alpha is dropped.
inline RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  if (detail::looks_like_png(bytes)) return detail::decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return detail::decode_ppm(bytes);
  if (bytes.size() >= 4 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G')
    throw Error(Errc::MalformedImage, "truncated PNG signature");
  throw Error(Errc::MalformedImage, "neither PNG nor P6 PPM");
}

inline RasterImage load_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

inline Bytes encode_ppm(const RasterImage& image) {
  const std::string header =
      "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + image.size() * 3);
  for (const Rgb& p : image.cells())
    for (double c : p) out.push_back(detail::to_byte(c));
  return out;
}

inline Bytes encode_png(const RasterImage& image) {
  std::vector<std::uint8_t> buf;
  buf.reserve(image.size() * 3);
  for (const Rgb& p : image.cells())
    for (double c : p) buf.push_back(detail::to_byte(c));
  return detail::write_png(buf.data(), image.width(), image.height(), PNG_FORMAT_RGB);
}

/// 8-bit grayscale PNG, foreground 255 and background 0.
inline Bytes encode_mask_png(const BinaryMask& mask) {
  std::vector<std::uint8_t> buf(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) buf[i] = mask[i] ? 255 : 0;
  return detail::write_png(buf.data(), mask.width(), mask.height(), PNG_FORMAT_GRAY);
}

/// Inverse of encode_mask_png: any channel value >= 128 is foreground.
inline BinaryMask decode_mask(std::span<const std::uint8_t> bytes) {
  const RasterImage img = decode_image(bytes);
  BinaryMask mask(img.width(), img.height(), 0);
  for (std::size_t i = 0; i < img.size(); ++i) mask[i] = img[i][0] >= 128.0 ? 1 : 0;
  return mask;
}

}  // namespace extrseg
