#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fvs/ad/tensor.hpp"

namespace fvs::ad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.9999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

// One bias-corrected ADAM update over `params` using their accumulated grads
// (a missing grad counts as zero). All grads are checked before any parameter
// is touched; a non-finite entry throws NonFiniteGradient naming the tensor.
template <typename T>
void AdamStep(std::span<BasicTensor<T>> params, AdamState<T>& state,
              std::span<const std::string> names = {});

}  // namespace fvs::ad
