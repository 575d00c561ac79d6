#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <limits>

#include "byte_stream.hpp"
#include "fvs/scene_io.hpp"

namespace fvs {

namespace {

// Netpbm-style header tokenizer: whitespace separated, '#' starts a comment.
class HeaderTokens {
 public:
  explicit HeaderTokens(ByteView bytes) : bytes_(bytes) {}

  std::string Next() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) ++pos_;
    if (start == pos_) throw Error(ErrorCode::kMalformedFile, "truncated header", start);
    return std::string(reinterpret_cast<const char*>(bytes_.data()) + start, pos_ - start);
  }

  long NextInt(long lo, long hi) {
    const std::size_t at = pos_;
    const std::string t = Next();
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (end == t.c_str() || *end != '\0' || v < lo || v > hi) {
      throw Error(ErrorCode::kMalformedFile, "bad header integer '" + t + "'", at);
    }
    return v;
  }

  // Consumes the single whitespace byte that separates header from data.
  std::size_t EndOfHeader() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(ErrorCode::kMalformedFile, "missing header terminator", pos_);
    }
    return pos_ + 1;
  }

 private:
  ByteView bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageRGB8 DecodePpm(ByteView bytes) {
  HeaderTokens tok(bytes);
  if (tok.Next() != "P6") throw Error(ErrorCode::kMalformedFile, "not a P6 image", 0);
  const int w = int(tok.NextInt(1, 1 << 20));
  const int h = int(tok.NextInt(1, 1 << 20));
  const long maxval = tok.NextInt(1, 65535);
  if (maxval != 255) throw Error(ErrorCode::kMalformedFile, "only 8-bit PPM supported", 0);
  const std::size_t data = tok.EndOfHeader();
  const std::size_t n = std::size_t(w) * h * 3;
  if (bytes.size() - std::min(data, bytes.size()) < n) {
    throw Error(ErrorCode::kMalformedFile, "truncated PPM data", bytes.size());
  }
  ImageRGB8 img(w, h);
  std::memcpy(img.pixels.data(), bytes.data() + data, n);
  return img;
}

Bytes EncodePpm(const ImageRGB8& image) {
  detail::ByteWriter w;
  w.WriteText("P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n");
  w.WriteRaw(image.pixels.data(), image.pixels.size());
  return w.Take();
}

ImageRGB8 ReadImage(const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext != ".ppm" && ext != ".pnm") {
    Fail(ErrorCode::kMalformedFile, "unsupported image format " + ext.string() + " (PPM only)");
  }
  return DecodePpm(ReadFileBytes(path));
}

void WriteImage(const ImageRGB8& image, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodePpm(image));
}

DepthMap DecodePfm(ByteView bytes) {
  HeaderTokens tok(bytes);
  const std::string magic = tok.Next();
  if (magic != "Pf") throw Error(ErrorCode::kMalformedFile, "not a grayscale PFM", 0);
  const int w = int(tok.NextInt(1, 1 << 20));
  const int h = int(tok.NextInt(1, 1 << 20));
  const std::string scale_token = tok.Next();
  char* end = nullptr;
  const double scale = std::strtod(scale_token.c_str(), &end);
  if (end == scale_token.c_str() || *end != '\0' || scale == 0 || !std::isfinite(scale)) {
    throw Error(ErrorCode::kMalformedFile, "bad PFM scale", 0);
  }
  const bool little = scale < 0;
  const std::size_t data = tok.EndOfHeader();
  const std::size_t n = std::size_t(w) * h;
  if (bytes.size() - std::min(data, bytes.size()) < n * 4) {
    throw Error(ErrorCode::kMalformedFile, "truncated PFM data", bytes.size());
  }
  DepthMap depth(w, h);
  for (int row = 0; row < h; ++row) {
    const int y = h - 1 - row;
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + data + (std::size_t(row) * w + x) * 4, 4);
      if (!little) bits = __builtin_bswap32(bits);
      float v;
      std::memcpy(&v, &bits, 4);
      const std::size_t i = depth.index(x, y);
      if (std::isfinite(v) && v > 0) {
        depth.depth[i] = v;
        depth.valid[i] = 1;
      }
    }
  }
  return depth;
}

Bytes EncodePfmPlane(int width, int height, std::span<const float> values) {
  detail::ByteWriter w;
  w.WriteText("Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1\n");
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;
    w.WriteRaw(values.data() + std::size_t(y) * width, std::size_t(width) * 4);
  }
  return w.Take();
}

Bytes EncodePfm(const DepthMap& depth) {
  std::vector<float> plane(depth.depth.size());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    plane[i] = depth.valid[i] ? depth.depth[i] : std::numeric_limits<float>::quiet_NaN();
  }
  return EncodePfmPlane(depth.width, depth.height, plane);
}

DepthMap ReadPfm(const std::filesystem::path& path) { return DecodePfm(ReadFileBytes(path)); }

void WritePfm(const DepthMap& depth, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodePfm(depth));
}

}  // namespace fvs
