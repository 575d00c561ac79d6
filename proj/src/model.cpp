#include "fvs/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fvs/error.hpp"

namespace fvs {

namespace {

template <typename T>
TensorT<T> ZerosLike(const TensorT<T>& x, std::int64_t channels) {
  return TensorT<T>::Zeros({channels, x.dim(1), x.dim(2)});
}

std::int64_t RoundUp(std::int64_t v, std::int64_t m) { return (v + m - 1) / m * m; }

}  // namespace

void ModelConfig::Validate() const {
  for (int c : encoder.stage_channels)
    if (c <= 0) Fail(ErrorCode::kContractViolation, "encoder stage channels must be positive");
  if (!std::is_sorted(encoder.stage_channels.begin(), encoder.stage_channels.end()))
    Fail(ErrorCode::kContractViolation, "encoder stage channels must be nondecreasing");
  if (encoder.convs_per_stage < 1)
    Fail(ErrorCode::kContractViolation, "encoder needs at least one conv per stage");
  if (encoder.output_channels <= 0)
    Fail(ErrorCode::kContractViolation, "encoder output channels must be positive");
  if (blender.unet_depth != 3)
    Fail(ErrorCode::kContractViolation, "blender depth must be 3");
  for (int c : blender.stage_channels)
    if (c <= 0) Fail(ErrorCode::kContractViolation, "blender stage channels must be positive");
  if (!std::is_sorted(blender.stage_channels.begin(), blender.stage_channels.end()))
    Fail(ErrorCode::kContractViolation, "blender stage channels must be nondecreasing");
  if (blender.head_channels != 4)
    Fail(ErrorCode::kContractViolation, "blender head must produce 4 channels");
}

nlohmann::json ModelConfig::ToJson() const {
  return {
      {"encoder",
       {{"stage_channels", encoder.stage_channels},
        {"convs_per_stage", encoder.convs_per_stage},
        {"output_channels", encoder.output_channels}}},
      {"blender",
       {{"unet_depth", blender.unet_depth},
        {"stage_channels", blender.stage_channels},
        {"head_channels", blender.head_channels}}},
  };
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c;
  try {
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      if (e.contains("stage_channels")) c.encoder.stage_channels = e.at("stage_channels").get<std::array<int, 3>>();
      if (e.contains("convs_per_stage")) c.encoder.convs_per_stage = e.at("convs_per_stage").get<int>();
      if (e.contains("output_channels")) c.encoder.output_channels = e.at("output_channels").get<int>();
    }
    if (j.contains("blender")) {
      const auto& b = j.at("blender");
      if (b.contains("unet_depth")) c.blender.unet_depth = b.at("unet_depth").get<int>();
      if (b.contains("stage_channels")) c.blender.stage_channels = b.at("stage_channels").get<std::array<int, 3>>();
      if (b.contains("head_channels")) c.blender.head_channels = b.at("head_channels").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kUsageError, std::string("bad model config: ") + e.what());
  }
  c.Validate();
  return c;
}

std::uint64_t ModelConfig::Hash() const { return ad::Fnv1a(ToJson().dump()); }

double UniformDraw(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

template <typename T>
TensorT<T> KaimingConvWeight(int out, int in, int k, std::uint64_t& rng) {
  const double bound = std::sqrt(6.0 / (static_cast<double>(in) * k * k));
  std::vector<T> data(static_cast<std::size_t>(out) * in * k * k);
  for (auto& v : data) v = static_cast<T>((2.0 * UniformDraw(rng) - 1.0) * bound);
  return TensorT<T>::FromData({out, in, k, k}, std::move(data), true);
}

// ---------------------------------------------------------------------------
// ParameterStore

template <typename T>
TensorT<T>& ParameterStore<T>::Add(const std::string& name, TensorT<T> tensor) {
  if (Find(name)) Fail(ErrorCode::kContractViolation, "duplicate parameter " + name);
  tensor.set_requires_grad(true);
  names_.push_back(name);
  tensors_.push_back(std::move(tensor));
  return tensors_.back();
}

template <typename T>
const TensorT<T>* ParameterStore<T>::Find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return &tensors_[i];
  return nullptr;
}

template <typename T>
std::size_t ParameterStore<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

template <typename T>
void ParameterStore<T>::ZeroGrad() {
  for (auto& t : tensors_) t.ZeroGrad();
}

template <typename T>
ad::TensorArchive ParameterStore<T>::ToArchive(std::uint64_t config_hash) const {
  ad::TensorArchive archive;
  archive.config_hash = config_hash;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto src = tensors_[i].data();
    std::vector<float> data(src.begin(), src.end());
    archive.tensors.push_back({names_[i], ad::Tensor::FromData(tensors_[i].shape(), std::move(data))});
  }
  return archive;
}

template <typename T>
void ParameterStore<T>::Load(const ad::TensorArchive& archive) {
  if (archive.tensors.size() != tensors_.size())
    Fail(ErrorCode::kShapeError, "weight file has " + std::to_string(archive.tensors.size()) +
                                     " tensors, model expects " + std::to_string(tensors_.size()));
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const ad::Tensor* src = archive.find(names_[i]);
    if (!src) Fail(ErrorCode::kShapeError, "weight file lacks tensor " + names_[i]);
    if (src->shape() != tensors_[i].shape())
      Fail(ErrorCode::kShapeError, "tensor " + names_[i] + " has shape " + ad::ShapeString(src->shape()) +
                                       ", expected " + ad::ShapeString(tensors_[i].shape()));
    auto dst = tensors_[i].mutable_data();
    const auto values = src->data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(values[j]);
  }
}

template <typename T>
std::uint64_t ParameterStore<T>::ValueHash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& t : tensors_) {
    for (T v : t.data()) {
      const float f = static_cast<float>(v);
      std::uint8_t bytes[sizeof(float)];
      std::memcpy(bytes, &f, sizeof(float));
      h = ad::Fnv1a(bytes, h);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Conv-GRU

template <typename T>
TensorT<T> ConvGruCell(const GruParams<T>& p, const TensorT<T>& hidden, const TensorT<T>& input) {
  const std::int64_t hc = p.hidden_channels;
  if (hidden.dim(0) != hc)
    Fail(ErrorCode::kShapeError, "GRU hidden state has " + std::to_string(hidden.dim(0)) + " channels");
  const auto gates = p.gates(ad::ConcatChannels<T>({hidden, input}));
  const auto z = ad::Sigmoid(ad::SliceChannels(gates, 0, hc));
  const auto r = ad::Sigmoid(ad::SliceChannels(gates, hc, hc));
  const auto candidate = ad::Tanh(p.candidate(ad::ConcatChannels<T>({ad::Mul(r, hidden), input})));
  const auto ones = TensorT<T>::Full(z.shape(), T(1));
  return ad::Add(ad::Mul(ad::Sub(ones, z), hidden), ad::Mul(z, candidate));
}

// ---------------------------------------------------------------------------
// Network

template <typename T>
ConvParams<T> Network<T>::MakeConv(const std::string& name, int in, int out, int k, std::uint64_t& rng) {
  ConvParams<T> c;
  c.weight = params_.Add(name + ".weight", KaimingConvWeight<T>(out, in, k, rng));
  c.bias = params_.Add(name + ".bias", TensorT<T>::Zeros({out}, true));
  return c;
}

template <typename T>
GruParams<T> Network<T>::MakeGru(const std::string& name, int hidden, int input, std::uint64_t& rng) {
  GruParams<T> g;
  g.hidden_channels = hidden;
  g.gates = MakeConv(name + ".gates", hidden + input, 2 * hidden, 3, rng);
  g.candidate = MakeConv(name + ".candidate", hidden + input, hidden, 3, rng);
  return g;
}

template <typename T>
Network<T>::Network(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.Validate();
  std::uint64_t rng = seed;
  const auto& ec = config_.encoder;
  const auto& s = ec.stage_channels;

  // Encoder contracting path.
  int in = 3;
  for (int stage = 0; stage < 3; ++stage) {
    std::vector<ConvParams<T>> convs;
    for (int i = 0; i < ec.convs_per_stage; ++i) {
      convs.push_back(MakeConv("encoder.down" + std::to_string(stage) + "." + std::to_string(i), in, s[stage], 3, rng));
      in = s[stage];
    }
    enc_down_.push_back(std::move(convs));
  }
  // Encoder expanding path: 1/2 resolution, then full resolution.
  const int up_out[2] = {s[1], ec.output_channels};
  for (int level = 0; level < 2; ++level) {
    const int skip = s[1 - level];
    std::vector<ConvParams<T>> convs;
    int cin = in + skip;
    for (int i = 0; i < ec.convs_per_stage; ++i) {
      convs.push_back(MakeConv("encoder.up" + std::to_string(level) + "." + std::to_string(i), cin, up_out[level], 3, rng));
      cin = up_out[level];
    }
    in = up_out[level];
    enc_up_.push_back(std::move(convs));
  }

  // Blender.
  const auto& b = config_.blender.stage_channels;
  in = config_.blender_input_channels();
  for (int stage = 0; stage < 3; ++stage) {
    blend_down_conv_.push_back(MakeConv("blender.down" + std::to_string(stage) + ".conv", in, b[stage], 3, rng));
    blend_down_gru_.push_back(MakeGru("blender.down" + std::to_string(stage) + ".gru", b[stage], b[stage], rng));
    in = b[stage];
  }
  for (int level = 0; level < 2; ++level) {
    const int skip = b[1 - level];
    const std::string prefix = "blender.up" + std::to_string(level);
    blend_up_gru_.push_back(MakeGru(prefix + ".gru", skip, in + skip, rng));
    blend_up_conv_.push_back(MakeConv(prefix + ".conv", skip, skip, 3, rng));
    in = skip;
  }
  head_ = MakeConv("blender.head", in, config_.blender.head_channels, 3, rng);
}

template <typename T>
TensorT<T> Network<T>::Encode(const TensorT<T>& rgb) const {
  if (rgb.rank() != 3 || rgb.dim(0) != 3)
    Fail(ErrorCode::kShapeError, "encoder expects 3×H×W, got " + ad::ShapeString(rgb.shape()));
  const std::int64_t h = rgb.dim(1), w = rgb.dim(2);
  TensorT<T> x = ad::PadReplicate(rgb, RoundUp(h, 4), RoundUp(w, 4));

  std::vector<TensorT<T>> skips;
  for (int stage = 0; stage < 3; ++stage) {
    if (stage > 0) x = ad::AvgPool2(x);
    for (const auto& conv : enc_down_[stage]) x = ad::Relu(conv(x));
    skips.push_back(x);
  }
  for (int level = 0; level < 2; ++level) {
    x = ad::ConcatChannels<T>({ad::UpsampleNearest2(x), skips[1 - level]});
    for (const auto& conv : enc_up_[level]) x = ad::Relu(conv(x));
  }
  return ad::Crop(x, h, w);
}

template <typename T>
std::pair<TensorT<T>, TensorT<T>> Network<T>::BlendStep(const TensorT<T>& input, HiddenState<T>& state) const {
  if (input.rank() != 3 || input.dim(0) != config_.blender_input_channels())
    Fail(ErrorCode::kShapeError, "blender expects " + std::to_string(config_.blender_input_channels()) +
                                     " input channels, got " + ad::ShapeString(input.shape()));
  const std::int64_t h = input.dim(1), w = input.dim(2);
  if (state.sites.size() != static_cast<std::size_t>(kGruSites)) state.sites.assign(kGruSites, TensorT<T>());

  auto step = [&](int site, const GruParams<T>& gru, const TensorT<T>& x) {
    auto& hs = state.sites[site];
    if (!hs.defined()) hs = ZerosLike(x, gru.hidden_channels);
    if (hs.dim(1) != x.dim(1) || hs.dim(2) != x.dim(2))
      Fail(ErrorCode::kShapeError, "hidden state size does not match the current source");
    hs = ConvGruCell(gru, hs, x);
    return hs;
  };

  TensorT<T> x = ad::PadReplicate(input, RoundUp(h, 4), RoundUp(w, 4));
  std::vector<TensorT<T>> skips;
  for (int stage = 0; stage < 3; ++stage) {
    if (stage > 0) x = ad::AvgPool2(x);
    x = ad::Relu(blend_down_conv_[stage](x));
    x = step(stage, blend_down_gru_[stage], x);
    skips.push_back(x);
  }
  for (int level = 0; level < 2; ++level) {
    x = ad::ConcatChannels<T>({ad::UpsampleNearest2(x), skips[1 - level]});
    x = step(3 + level, blend_up_gru_[level], x);
    x = ad::Relu(blend_up_conv_[level](x));
  }
  const auto out = ad::Crop(head_(x), h, w);
  return {ad::SliceChannels(out, 0, 1), ad::Sigmoid(ad::SliceChannels(out, 1, 3))};
}

template <typename T>
BlendResult<T> Network<T>::Blend(const std::vector<WarpedInput<T>>& sources) const {
  if (sources.empty()) Fail(ErrorCode::kEmptyInput, "blender needs at least one source view");
  BlendResult<T> result;
  HiddenState<T> state;
  for (const auto& src : sources) {
    auto [conf, color] = BlendStep(ad::ConcatChannels<T>({src.features, src.boundary_mask, src.infdepth_mask}), state);
    result.confidences.push_back(std::move(conf));
    result.colors.push_back(std::move(color));
  }
  result.weights = ad::SoftmaxSet(result.confidences);
  result.composite = ad::WeightedSum(result.weights, result.colors);
  return result;
}

template <typename T>
void Network<T>::ZeroRecurrentUnits() {
  auto zero = [](ConvParams<T>& c) {
    for (auto& v : c.weight.mutable_data()) v = T(0);
    for (auto& v : c.bias.mutable_data()) v = T(0);
  };
  for (auto* list : {&blend_down_gru_, &blend_up_gru_})
    for (auto& g : *list) {
      zero(g.gates);
      zero(g.candidate);
    }
}

#define FVS_INSTANTIATE_MODEL(T)                                                          \
  template class ParameterStore<T>;                                                       \
  template class Network<T>;                                                              \
  template TensorT<T> ConvGruCell<T>(const GruParams<T>&, const TensorT<T>&, const TensorT<T>&); \
  template TensorT<T> KaimingConvWeight<T>(int, int, int, std::uint64_t&);

FVS_INSTANTIATE_MODEL(float)
FVS_INSTANTIATE_MODEL(double)

}  // namespace fvs
