#pragma once

#include <vector>

#include "fvs/ad/tensor.hpp"

// Differentiable operations over C×H×W feature maps (batch size 1). There is
// no broadcasting apart from the per-channel bias of Conv2d and the per-pixel
// weights of WeightedSum.
namespace fvs::ad {

// Cross-correlation. weight is Cout×Cin×k×k with k in {1, 3}; bias is Cout or
// undefined; padding is 0 or k/2; stride is 1 or 2.
template <typename T>
BasicTensor<T> Conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, int stride = 1, int padding = -1);

template <typename T>
BasicTensor<T> Relu(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> Sigmoid(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> Tanh(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> Add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> Sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> Mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> Scale(const BasicTensor<T>& x, T factor);

// 2×2 averaging; H and W must be even.
template <typename T>
BasicTensor<T> AvgPool2(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> UpsampleNearest2(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> ConcatChannels(const std::vector<BasicTensor<T>>& parts);
template <typename T>
BasicTensor<T> SliceChannels(const BasicTensor<T>& x, std::int64_t begin, std::int64_t count);

// Extends to height×width by repeating the last row/column.
template <typename T>
BasicTensor<T> PadReplicate(const BasicTensor<T>& x, std::int64_t height, std::int64_t width);
// Keeps the top-left height×width window.
template <typename T>
BasicTensor<T> Crop(const BasicTensor<T>& x, std::int64_t height, std::int64_t width);

// Elementwise softmax across a set of equally shaped tensors (max-subtracted).
template <typename T>
std::vector<BasicTensor<T>> SoftmaxSet(const std::vector<BasicTensor<T>>& logits);

// sum_k weights[k] (1×H×W) ⊙ values[k] (C×H×W).
template <typename T>
BasicTensor<T> WeightedSum(const std::vector<BasicTensor<T>>& weights,
                           const std::vector<BasicTensor<T>>& values);

template <typename T>
BasicTensor<T> Sum(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> Mean(const BasicTensor<T>& x);
// mean |a - b|; the derivative at a == b is taken as 0.
template <typename T>
BasicTensor<T> MeanAbsDiff(const BasicTensor<T>& a, const BasicTensor<T>& b);

}  // namespace fvs::ad
