#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "fvs/ad/ops.hpp"
#include "fvs/ad/serialize.hpp"
#include "fvs/ad/tensor.hpp"

namespace fvs {

template <typename T>
using TensorT = ad::BasicTensor<T>;

struct EncoderConfig {
  std::array<int, 3> stage_channels{8, 16, 32};
  int convs_per_stage = 2;
  int output_channels = 8;  // F
};

struct BlenderConfig {
  int unet_depth = 3;
  std::array<int, 3> stage_channels{4, 8, 16};
  int head_channels = 4;  // confidence + RGB
};

struct ModelConfig {
  EncoderConfig encoder;
  BlenderConfig blender;

  void Validate() const;
  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);
  // Topology hash stored in weight files.
  std::uint64_t Hash() const;
  // Channels per warped source fed to the blender: F + boundary + infdepth.
  int blender_input_channels() const { return encoder.output_channels + 2; }
};

// Ordered, named collection of learnable tensors.
template <typename T>
class ParameterStore {
 public:
  TensorT<T>& Add(const std::string& name, TensorT<T> tensor);
  const TensorT<T>* Find(const std::string& name) const;

  std::vector<TensorT<T>>& tensors() { return tensors_; }
  const std::vector<TensorT<T>>& tensors() const { return tensors_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t element_count() const;

  void ZeroGrad();
  ad::TensorArchive ToArchive(std::uint64_t config_hash) const;
  // Shapes and names must match exactly; values are copied in place.
  void Load(const ad::TensorArchive& archive);
  std::uint64_t ValueHash() const;

 private:
  std::vector<std::string> names_;
  std::vector<TensorT<T>> tensors_;
};

template <typename T>
struct ConvParams {
  TensorT<T> weight;
  TensorT<T> bias;
  int stride = 1;

  TensorT<T> operator()(const TensorT<T>& x) const { return ad::Conv2d(x, weight, bias, stride); }
};

template <typename T>
struct GruParams {
  ConvParams<T> gates;      // [h; x] -> 2H (update, reset)
  ConvParams<T> candidate;  // [r ⊙ h; x] -> H
  int hidden_channels = 0;
};

// z = σ(Conv_z([h; x])), r = σ(Conv_r([h; x])), h̃ = tanh(Conv_h([r ⊙ h; x])),
// h' = (1 - z) ⊙ h + z ⊙ h̃.
template <typename T>
TensorT<T> ConvGruCell(const GruParams<T>& params, const TensorT<T>& hidden, const TensorT<T>& input);

// One hidden grid per GRU site; empty entries are zero-initialized lazily.
template <typename T>
struct HiddenState {
  std::vector<TensorT<T>> sites;
};

template <typename T>
struct WarpedInput {
  TensorT<T> features;       // F×H×W
  TensorT<T> boundary_mask;  // 1×H×W
  TensorT<T> infdepth_mask;  // 1×H×W
};

template <typename T>
struct BlendResult {
  TensorT<T> composite;                  // 3×H×W
  std::vector<TensorT<T>> confidences;   // C_k, 1×H×W
  std::vector<TensorT<T>> colors;        // Î_t_k, 3×H×W
  std::vector<TensorT<T>> weights;       // softmax over k
};

// Shared image encoder (U-Net) plus the recurrent blending decoder.
template <typename T>
class Network {
 public:
  Network(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore<T>& parameters() { return params_; }
  const ParameterStore<T>& parameters() const { return params_; }

  // 3×H×W in [0,1] -> F×H×W. Sizes that are not multiples of 4 are padded by
  // edge replication and cropped back.
  TensorT<T> Encode(const TensorT<T>& rgb) const;

  // One recurrence step for a single warped source (F+2 channels). Returns
  // (confidence 1×H×W, color 3×H×W) and advances `state`.
  std::pair<TensorT<T>, TensorT<T>> BlendStep(const TensorT<T>& input, HiddenState<T>& state) const;

  // Runs the blender over the sources in order and composites with a
  // per-pixel softmax over the confidences. Throws EmptyInput for K = 0.
  BlendResult<T> Blend(const std::vector<WarpedInput<T>>& sources) const;

  // Zeroes every GRU gate and candidate parameter.
  void ZeroRecurrentUnits();

  static constexpr int kGruSites = 5;

 private:
  ConvParams<T> MakeConv(const std::string& name, int in, int out, int k, std::uint64_t& rng);
  GruParams<T> MakeGru(const std::string& name, int hidden, int input, std::uint64_t& rng);

  ModelConfig config_;
  ParameterStore<T> params_;
  // Encoder.
  std::vector<std::vector<ConvParams<T>>> enc_down_;
  std::vector<std::vector<ConvParams<T>>> enc_up_;
  // Blender.
  std::vector<ConvParams<T>> blend_down_conv_;
  std::vector<GruParams<T>> blend_down_gru_;
  std::vector<GruParams<T>> blend_up_gru_;
  std::vector<ConvParams<T>> blend_up_conv_;
  ConvParams<T> head_;
};

// Deterministic uniform draws in [0,1) from a 64-bit state (splitmix64).
double UniformDraw(std::uint64_t& state);

// Kaiming-uniform (fan-in) conv weights in [-sqrt(6/fan_in), sqrt(6/fan_in)].
template <typename T>
TensorT<T> KaimingConvWeight(int out, int in, int k, std::uint64_t& rng);

}  // namespace fvs
