#include "fvs/ad/serialize.hpp"

#include <cstring>

#include "../byte_stream.hpp"
#include "fvs/scene_io.hpp"

namespace fvs::ad {

const Tensor* TensorArchive::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.tensor;
  }
  return nullptr;
}

std::vector<std::uint8_t> EncodeArchive(const TensorArchive& archive) {
  detail::ByteWriter w;
  w.WriteRaw("FVSW", 4);
  w.Write<std::uint32_t>(kArchiveVersion);
  w.Write<std::uint64_t>(archive.config_hash);
  w.Write<std::uint64_t>(archive.tensors.size());
  for (const auto& [name, tensor] : archive.tensors) {
    w.Write<std::uint32_t>(std::uint32_t(name.size()));
    w.WriteRaw(name.data(), name.size());
    w.Write<std::uint32_t>(std::uint32_t(tensor.rank()));
    for (auto e : tensor.shape()) w.Write<std::uint64_t>(std::uint64_t(e));
    w.WriteRaw(tensor.data().data(), tensor.numel() * sizeof(float));
  }
  return w.Take();
}

TensorArchive DecodeArchive(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.Require(4);
  if (std::memcmp(r.cursor(), "FVSW", 4) != 0) {
    throw Error(ErrorCode::kMalformedFile, "bad weights magic", 0);
  }
  r.Skip(4);
  const auto version = r.Read<std::uint32_t>();
  if (version != kArchiveVersion) {
    throw Error(ErrorCode::kMalformedFile, "unsupported weights version " + std::to_string(version), 4);
  }
  TensorArchive archive;
  archive.config_hash = r.Read<std::uint64_t>();
  const auto count = r.Read<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.Read<std::uint32_t>();
    r.Require(name_len);
    std::string name(reinterpret_cast<const char*>(r.cursor()), name_len);
    r.Skip(name_len);
    const auto rank = r.Read<std::uint32_t>();
    if (rank > 8) throw Error(ErrorCode::kMalformedFile, "implausible tensor rank", r.offset());
    Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& e : shape) {
      const auto extent = r.Read<std::uint64_t>();
      if (extent > (1ull << 32)) throw Error(ErrorCode::kMalformedFile, "implausible extent", r.offset());
      e = std::int64_t(extent);
      numel *= extent;
    }
    if (numel > r.remaining() / sizeof(float)) {
      throw Error(ErrorCode::kMalformedFile, "truncated tensor data", r.offset());
    }
    std::vector<float> data(numel);
    std::memcpy(data.data(), r.cursor(), numel * sizeof(float));
    r.Skip(numel * sizeof(float));
    archive.tensors.push_back({std::move(name), Tensor::FromData(std::move(shape), std::move(data))});
  }
  if (!r.done()) throw Error(ErrorCode::kMalformedFile, "trailing bytes", r.offset());
  return archive;
}

void SaveArchive(const TensorArchive& archive, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodeArchive(archive));
}

TensorArchive LoadArchive(const std::filesystem::path& path) {
  return DecodeArchive(ReadFileBytes(path));
}

std::uint64_t Fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t Fnv1a(const std::string& text) {
  return Fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace fvs::ad
