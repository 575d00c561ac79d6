#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fvs/ad/tensor.hpp"

namespace fvs::ad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct TensorArchive {
  std::uint64_t config_hash = 0;
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
};

// FVSW container, little-endian:
//   "FVSW" | u32 version | u64 config_hash | u64 count |
//   per tensor: u32 name_len, name bytes (UTF-8), u32 rank, u64 extents[rank],
//               f32 data[numel]
inline constexpr std::uint32_t kArchiveVersion = 1;

std::vector<std::uint8_t> EncodeArchive(const TensorArchive& archive);
TensorArchive DecodeArchive(std::span<const std::uint8_t> bytes);
void SaveArchive(const TensorArchive& archive, const std::filesystem::path& path);
TensorArchive LoadArchive(const std::filesystem::path& path);

// FNV-1a, used for provenance hashes of configs and weight files.
std::uint64_t Fnv1a(std::span<const std::uint8_t> bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t Fnv1a(const std::string& text);

}  // namespace fvs::ad
