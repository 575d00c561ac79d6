#include "fvs/image.hpp"

#include <algorithm>
#include <cmath>

#include "fvs/error.hpp"

namespace fvs {

std::size_t DepthMap::valid_count() const {
  return std::size_t(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

ImageF ToFloat(const ImageRGB8& image) {
  ImageF out(3, image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const auto* p = image.at(x, y);
      for (int c = 0; c < 3; ++c) out.at(c, x, y) = float(p[c]) / 255.f;
    }
  }
  return out;
}

ImageRGB8 ToRGB8(const ImageF& image) {
  if (image.channels != 3) Fail(ErrorCode::kShapeError, "ToRGB8 expects 3 channels");
  ImageRGB8 out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      auto* p = out.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, x, y), 0.f, 1.f);
        p[c] = std::uint8_t(std::lround(v * 255.f));
      }
    }
  }
  return out;
}

ImageRGB8 Downsample(const ImageRGB8& image, int factor) {
  if (factor < 1) Fail(ErrorCode::kContractViolation, "downsample factor must be >= 1");
  if (factor == 1) return image;
  const int w = image.width / factor;
  const int h = image.height / factor;
  ImageRGB8 out(w, h);
  const int area = factor * factor;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sum[3] = {0, 0, 0};
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          const auto* p = image.at(x * factor + dx, y * factor + dy);
          for (int c = 0; c < 3; ++c) sum[c] += p[c];
        }
      }
      auto* q = out.at(x, y);
      for (int c = 0; c < 3; ++c) q[c] = std::uint8_t((sum[c] + area / 2) / area);
    }
  }
  return out;
}

}  // namespace fvs
