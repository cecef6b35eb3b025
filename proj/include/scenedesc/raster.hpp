#pragma once

// 8-bit rasters, binary PGM/PPM I/O and the halving pyramid.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scenedesc/error.hpp"

namespace scenedesc {

/// Row-major 8-bit image with 1 (luma) or 3 (RGB) interleaved channels.
class Raster {
public:
  Raster() = default;

  Raster(int width, int height, int channels, std::vector<std::uint8_t> samples)
      : width_(width), height_(height), channels_(channels), samples_(std::move(samples)) {
    if (width < 1 || height < 1) throw Error("raster dimensions must be >= 1");
    if (channels != 1 && channels != 3) throw Error("raster channels must be 1 or 3");
    if (samples_.size() != static_cast<std::size_t>(width) * height * channels)
      throw Error("raster sample count does not match width*height*channels");
  }

  static Raster filled(int width, int height, std::uint8_t value) {
    return Raster(width, height, 1,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, value));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  std::span<const std::uint8_t> samples() const noexcept { return samples_; }
  std::span<std::uint8_t> samples() noexcept { return samples_; }

  // Luma access; only meaningful when channels() == 1.
  std::uint8_t at(int x, int y) const { return samples_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return samples_[static_cast<std::size_t>(y) * width_ + x]; }

  friend bool operator==(const Raster&, const Raster&) = default;

private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<std::uint8_t> samples_;
};

namespace detail {

class PnmHeaderReader {
public:
  explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_separators(const char* field) {
    bool any = false;
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        any = true;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f') {
        ++pos_;
        any = true;
      } else {
        break;
      }
    }
    if (!any) throw ParseError(field, "expected whitespace before value");
  }

  long read_number(const char* field) {
    skip_separators(field);
    if (pos_ >= bytes_.size()) throw ParseError(field, "missing value (truncated header)");
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw ParseError(field, "value out of range");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw ParseError(field, "expected a decimal integer");
    return value;
  }

  std::size_t position() const noexcept { return pos_; }
  void advance(std::size_t n) noexcept { pos_ += n; }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parse a binary PGM (P5) or PPM (P6) with maxval 255.
inline Raster load_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw ParseError("magic", "unsupported magic (expected P5 or P6)");
  const int channels = bytes[1] == '5' ? 1 : 3;

  detail::PnmHeaderReader reader(bytes);
  reader.advance(2);
  const long width = reader.read_number("width");
  const long height = reader.read_number("height");
  const long maxval = reader.read_number("maxval");
  if (width == 0) throw ParseError("width", "zero dimension");
  if (height == 0) throw ParseError("height", "zero dimension");
  if (maxval != 255) throw ParseError("maxval", "only maxval 255 is supported");

  // Exactly one whitespace byte separates the header from the payload.
  std::size_t pos = reader.position();
  if (pos >= bytes.size()) throw ParseError("payload", "truncated payload");
  const auto sep = bytes[pos];
  if (!(sep == ' ' || sep == '\t' || sep == '\r' || sep == '\n'))
    throw ParseError("maxval", "expected single whitespace after maxval");
  ++pos;

  const auto need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * channels;
  if (bytes.size() - pos < need) throw ParseError("payload", "truncated payload");
  std::vector<std::uint8_t> samples(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return Raster(static_cast<int>(width), static_cast<int>(height), channels, std::move(samples));
}

inline Raster load_image(const std::string& bytes) {
  return load_image(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

inline Raster load_image_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_image(bytes);
}

/// Binary PGM/PPM bytes with a minimal single-space header.
inline std::string encode_pnm(const Raster& r) {
  std::string out = (r.channels() == 1 ? "P5 " : "P6 ") + std::to_string(r.width()) + " " +
                    std::to_string(r.height()) + " 255\n";
  const auto s = r.samples();
  out.append(reinterpret_cast<const char*>(s.data()), s.size());
  return out;
}

inline void write_image_file(const std::filesystem::path& path, const Raster& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const auto bytes = encode_pnm(r);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

/// Rec.601 luma, rounded half up. Identity on luma input.
inline Raster to_luma(const Raster& r) {
  if (r.channels() == 1) return r;
  std::vector<std::uint8_t> out(r.pixel_count());
  const auto s = r.samples();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int weighted = 299 * s[3 * i] + 587 * s[3 * i + 1] + 114 * s[3 * i + 2];
    out[i] = static_cast<std::uint8_t>(std::min(255, (weighted + 500) / 1000));
  }
  return Raster(r.width(), r.height(), 1, std::move(out));
}

/// 2x2 box mean with ceil dimensions; edge blocks are clipped to 2x1, 1x2 or 1x1.
inline Raster downscale_half(const Raster& r) {
  if (r.channels() != 1) throw Error("downscale_half expects a luma raster");
  const int w = (r.width() + 1) / 2;
  const int h = (r.height() + 1) / 2;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    const int y1 = std::min(2 * y + 1, r.height() - 1);
    for (int x = 0; x < w; ++x) {
      const int x1 = std::min(2 * x + 1, r.width() - 1);
      int sum = 0;
      int n = 0;
      for (int sy = 2 * y; sy <= y1; ++sy)
        for (int sx = 2 * x; sx <= x1; ++sx) {
          sum += r.at(sx, sy);
          ++n;
        }
      out[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>((2 * sum + n) / (2 * n));
    }
  }
  return Raster(w, h, 1, std::move(out));
}

/// Halving stops at the first level with at most `max_pixels` pixels or a side <= `min_side`.
struct StopRule {
  std::size_t max_pixels = 128;
  int min_side = 4;

  bool satisfied_by(const Raster& r) const noexcept {
    return r.pixel_count() <= max_pixels || std::min(r.width(), r.height()) <= min_side;
  }
};

/// Level 0 is the original; the last level is the coarsest.
struct Pyramid {
  std::vector<Raster> levels;
  StopRule halt_rule;

  std::size_t depth() const noexcept { return levels.size(); }
  const Raster& level(std::size_t k) const { return levels.at(k); }
  const Raster& coarsest() const { return levels.back(); }
};

inline Pyramid build_pyramid(const Raster& r, StopRule stop = {}) {
  Pyramid p{{to_luma(r)}, stop};
  while (!stop.satisfied_by(p.levels.back())) p.levels.push_back(downscale_half(p.levels.back()));
  return p;
}

}  // namespace scenedesc
