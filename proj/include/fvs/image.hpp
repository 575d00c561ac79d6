#pragma once

#include <cstdint>
#include <vector>

namespace fvs {

// 8-bit RGB, row-major, interleaved (HWC).
struct ImageRGB8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  ImageRGB8() = default;
  ImageRGB8(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &pixels[(std::size_t(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(std::size_t(y) * width + x) * 3];
  }
  bool operator==(const ImageRGB8&) const = default;
};

// Planar float image (CHW), values nominally in [0, 1].
struct ImageF {
  int channels = 0;
  int width = 0;
  int height = 0;
  std::vector<float> values;

  ImageF() = default;
  ImageF(int c, int w, int h)
      : channels(c), width(w), height(h), values(std::size_t(c) * w * h, 0.f) {}

  float& at(int c, int x, int y) {
    return values[(std::size_t(c) * height + y) * width + x];
  }
  float at(int c, int x, int y) const {
    return values[(std::size_t(c) * height + y) * width + x];
  }
  bool operator==(const ImageF&) const = default;
};

// Per-pixel camera-frame z in meters plus a validity mask. Invalid pixels carry
// no depth semantics (their depth slot is left at 0).
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> depth;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h), depth(std::size_t(w) * h, 0.f), valid(std::size_t(w) * h, 0) {}

  std::size_t index(int x, int y) const { return std::size_t(y) * width + x; }
  bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
  float at(int x, int y) const { return depth[index(x, y)]; }
  std::size_t valid_count() const;
  bool operator==(const DepthMap&) const = default;
};

ImageF ToFloat(const ImageRGB8& image);
ImageRGB8 ToRGB8(const ImageF& image);

// Box-filter downsampling by an integer factor. Trailing rows/columns that do
// not fill a whole block are dropped.
ImageRGB8 Downsample(const ImageRGB8& image, int factor);

}  // namespace fvs
