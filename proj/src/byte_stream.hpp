#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "fvs/error.hpp"

namespace fvs::detail {

static_assert(std::endian::native == std::endian::little,
              "binary codecs assume a little-endian host");

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T Read() {
    static_assert(std::is_trivially_copyable_v<T>);
    Require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }

  std::string ReadCString() {
    std::string out;
    while (true) {
      Require(1);
      const char c = char(bytes_[offset_++]);
      if (c == '\0') return out;
      out.push_back(c);
    }
  }

  void Require(std::size_t n) const {
    if (n > bytes_.size() - offset_) {
      throw Error(ErrorCode::kMalformedFile, "unexpected end of data", offset_);
    }
  }

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }
  bool done() const { return offset_ == bytes_.size(); }
  const std::uint8_t* cursor() const { return bytes_.data() + offset_; }
  void Skip(std::size_t n) {
    Require(n);
    offset_ += n;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t offset_ = 0;
};

class ByteWriter {
 public:
  template <typename T>
  void Write(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void WriteCString(const std::string& s) {
    bytes_.insert(bytes_.end(), s.begin(), s.end());
    bytes_.push_back(0);
  }
  void WriteRaw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void WriteText(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t> Take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Caps container reservations so a corrupted count cannot trigger a huge
// allocation before the truncation is detected.
inline std::size_t SafeReserve(std::uint64_t count, std::size_t remaining,
                               std::size_t min_record_bytes) {
  const std::uint64_t cap = remaining / (min_record_bytes == 0 ? 1 : min_record_bytes);
  return std::size_t(count < cap ? count : cap);
}

std::string FormatDouble(double v);

}  // namespace fvs::detail
