#include "fvs/training.hpp"

#include <chrono>
#include <fstream>
#include <regex>

#include "fvs/ad/serialize.hpp"
#include "fvs/error.hpp"

namespace fvs {

namespace {

double Now() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

template <typename T>
T Get(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

constexpr const char* kAdamM = "adam.m/";
constexpr const char* kAdamV = "adam.v/";
constexpr const char* kStepTensor = "trainer.step";

bool IsTrainerState(const std::string& name) {
  return name.rfind(kAdamM, 0) == 0 || name.rfind(kAdamV, 0) == 0 || name == kStepTensor;
}

void LoadNetworkTensors(ParameterStore<float>& params, const ad::TensorArchive& archive) {
  ad::TensorArchive weights;
  weights.config_hash = archive.config_hash;
  for (const auto& t : archive.tensors)
    if (!IsTrainerState(t.name)) weights.tensors.push_back(t);
  params.Load(weights);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void LossConfig::Validate() const {
  if (!(l1_weight >= 0)) Fail(ErrorCode::kContractViolation, "l1_weight must be >= 0");
  for (double w : feature_weights)
    if (!(w >= 0)) Fail(ErrorCode::kContractViolation, "feature weights must be >= 0");
  for (int c : feature_channels)
    if (c <= 0) Fail(ErrorCode::kContractViolation, "feature channels must be positive");
}

nlohmann::json LossConfig::ToJson() const {
  return {{"l1_weight", l1_weight},
          {"feature_weights", feature_weights},
          {"use_features", use_features},
          {"feature_channels", feature_channels},
          {"feature_seed", feature_seed}};
}

LossConfig LossConfig::FromJson(const nlohmann::json& j) {
  LossConfig c;
  try {
    c.l1_weight = Get(j, "l1_weight", c.l1_weight);
    c.feature_weights = Get(j, "feature_weights", c.feature_weights);
    c.use_features = Get(j, "use_features", c.use_features);
    c.feature_channels = Get(j, "feature_channels", c.feature_channels);
    c.feature_seed = Get(j, "feature_seed", c.feature_seed);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kUsageError, std::string("bad loss config: ") + e.what());
  }
  c.Validate();
  return c;
}

void TrainConfig::Validate() const {
  if (iterations < 1) Fail(ErrorCode::kContractViolation, "iterations must be >= 1");
  if (batch_size != 1) Fail(ErrorCode::kContractViolation, "batch_size must be 1");
  if (k_sources < 1) Fail(ErrorCode::kContractViolation, "k_sources must be >= 1");
  if (downsample_factor < 1) Fail(ErrorCode::kContractViolation, "downsample_factor must be >= 1");
  if (checkpoint_every < 1) Fail(ErrorCode::kContractViolation, "checkpoint_every must be >= 1");
  if (max_resample < 1) Fail(ErrorCode::kContractViolation, "max_resample must be >= 1");
  if (threads < 1) Fail(ErrorCode::kContractViolation, "threads must be >= 1");
  if (!(adam.lr >= 0) || !(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) ||
      !(adam.eps > 0))
    Fail(ErrorCode::kContractViolation, "invalid ADAM hyperparameters");
  loss.Validate();
  model.Validate();
}

nlohmann::json TrainConfig::ToJson() const {
  return {{"iterations", iterations},
          {"batch_size", batch_size},
          {"k_sources", k_sources},
          {"downsample_factor", downsample_factor},
          {"seed", seed},
          {"checkpoint_every", checkpoint_every},
          {"max_resample", max_resample},
          {"threads", threads},
          {"adam", {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
          {"loss", loss.ToJson()},
          {"model", model.ToJson()}};
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.iterations = Get(j, "iterations", c.iterations);
    c.batch_size = Get(j, "batch_size", c.batch_size);
    c.k_sources = Get(j, "k_sources", c.k_sources);
    c.downsample_factor = Get(j, "downsample_factor", c.downsample_factor);
    c.seed = Get(j, "seed", c.seed);
    c.checkpoint_every = Get(j, "checkpoint_every", c.checkpoint_every);
    c.max_resample = Get(j, "max_resample", c.max_resample);
    c.threads = Get(j, "threads", c.threads);
    if (j.contains("adam")) {
      const auto& a = j.at("adam");
      c.adam.lr = Get(a, "lr", c.adam.lr);
      c.adam.beta1 = Get(a, "beta1", c.adam.beta1);
      c.adam.beta2 = Get(a, "beta2", c.adam.beta2);
      c.adam.eps = Get(a, "eps", c.adam.eps);
    }
    if (j.contains("loss")) c.loss = LossConfig::FromJson(j.at("loss"));
    if (j.contains("model")) c.model = ModelConfig::FromJson(j.at("model"));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kUsageError, std::string("bad training config: ") + e.what());
  }
  c.Validate();
  return c;
}

// ---------------------------------------------------------------------------
// Loss

template <typename T>
FrozenFeatureNet<T>::FrozenFeatureNet(const std::array<int, kFeatureLayers>& channels, std::uint64_t seed) {
  std::uint64_t rng = seed;
  int in = 3;
  for (int l = 0; l < kFeatureLayers; ++l) {
    std::array<ConvParams<T>, 2> stage;
    for (int i = 0; i < 2; ++i) {
      const std::string name = "phi" + std::to_string(l + 1) + "." + std::to_string(i);
      stage[i].weight = params_.Add(name + ".weight", KaimingConvWeight<T>(channels[l], in, 3, rng));
      stage[i].bias = params_.Add(name + ".bias", TensorT<T>::Zeros({channels[l]}));
      in = channels[l];
    }
    stages_.push_back(stage);
  }
  for (auto& t : params_.tensors()) t.set_requires_grad(false);
}

template <typename T>
std::vector<TensorT<T>> FrozenFeatureNet<T>::Features(const TensorT<T>& rgb) const {
  if (rgb.rank() != 3 || rgb.dim(0) != 3)
    Fail(ErrorCode::kShapeError, "feature net expects 3×H×W, got " + ad::ShapeString(rgb.shape()));
  const std::int64_t m = std::int64_t(1) << (kFeatureLayers - 1);
  TensorT<T> x = ad::PadReplicate(rgb, (rgb.dim(1) + m - 1) / m * m, (rgb.dim(2) + m - 1) / m * m);
  std::vector<TensorT<T>> out;
  for (int l = 0; l < kFeatureLayers; ++l) {
    if (l > 0) x = ad::AvgPool2(x);
    x = ad::Relu(stages_[l][0](x));
    x = ad::Relu(stages_[l][1](x));
    out.push_back(x);
  }
  return out;
}

template <typename T>
TensorT<T> ComputeLoss(const TensorT<T>& pred, const TensorT<T>& truth, const LossConfig& config,
                       const FrozenFeatureNet<T>* features) {
  if (pred.shape() != truth.shape())
    Fail(ErrorCode::kShapeError, "prediction " + ad::ShapeString(pred.shape()) + " vs truth " +
                                     ad::ShapeString(truth.shape()));
  TensorT<T> loss = ad::Scale(ad::MeanAbsDiff(pred, truth), T(config.l1_weight));
  bool any = false;
  for (double w : config.feature_weights) any = any || w != 0.0;
  if (!config.use_features || !any) return loss;
  if (!features) Fail(ErrorCode::kContractViolation, "feature loss requires a feature net");
  const auto fp = features->Features(pred);
  std::vector<TensorT<T>> ft;
  {
    ad::NoGradGuard guard;
    ft = features->Features(truth);
  }
  for (int l = 0; l < kFeatureLayers; ++l) {
    if (config.feature_weights[l] == 0.0) continue;
    loss = ad::Add(loss, ad::Scale(ad::MeanAbsDiff(fp[l], ft[l]), T(config.feature_weights[l])));
  }
  return loss;
}

template class FrozenFeatureNet<float>;
template class FrozenFeatureNet<double>;
template TensorT<float> ComputeLoss(const TensorT<float>&, const TensorT<float>&, const LossConfig&,
                                    const FrozenFeatureNet<float>*);
template TensorT<double> ComputeLoss(const TensorT<double>&, const TensorT<double>&, const LossConfig&,
                                     const FrozenFeatureNet<double>*);

// ---------------------------------------------------------------------------
// Trainer

std::uint64_t IterationSeed(std::uint64_t seed, std::uint64_t iteration) {
  std::uint64_t s = seed ^ 0x6a09e667f3bcc909ull;
  UniformDraw(s);
  s ^= iteration * 0xd1b54a32d192ed03ull;
  UniformDraw(s);
  return s;
}

Trainer::Trainer(std::vector<const PreparedScene*> scenes, TrainConfig config)
    : scenes_(std::move(scenes)),
      config_(std::move(config)),
      network_(config_.model, config_.seed),
      feature_net_(config_.loss.feature_channels, config_.loss.feature_seed) {
  config_.Validate();
  if (scenes_.empty()) Fail(ErrorCode::kEmptyInput, "training needs at least one scene");
  for (const auto* s : scenes_) {
    if (!s || s->views.size() < static_cast<std::size_t>(config_.k_sources) + 1)
      Fail(ErrorCode::kEmptyInput, "training scenes need at least k_sources + 1 images");
  }
  adam_.config = config_.adam;
  start_time_ = Now();
}

TrainingExample Trainer::Sample(std::uint64_t& rng) {
  TrainingExample ex;
  for (int attempt = 0; attempt < config_.max_resample; ++attempt) {
    ex.scene_index = static_cast<int>(UniformDraw(rng) * static_cast<double>(scenes_.size()));
    const PreparedScene& scene = *scenes_[ex.scene_index];
    const auto& target = scene.views[static_cast<std::size_t>(UniformDraw(rng) * double(scene.views.size()))];
    ex.target_id = target.image_id;
    ex.resamples = attempt;
    const auto key = std::make_pair(ex.scene_index, ex.target_id);
    auto it = selections_.find(key);
    if (it == selections_.end()) {
      std::vector<int> chosen;
      try {
        chosen = SelectSourceViews(scene.Candidates(), target.camera, target.pose, target.depth,
                                   config_.k_sources, {target.image_id}, config_.threads)
                     .chosen;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEmptyOverlap) throw;
      }
      it = selections_.emplace(key, std::move(chosen)).first;
    }
    if (!it->second.empty()) {
      ex.sources = it->second;
      return ex;
    }
  }
  Fail(ErrorCode::kEmptyOverlap, "no training target with overlapping sources after " +
                                     std::to_string(config_.max_resample) + " draws");
}

TrainingExample Trainer::SampleForIteration(int iteration) {
  std::uint64_t rng = IterationSeed(config_.seed, static_cast<std::uint64_t>(iteration));
  return Sample(rng);
}

std::shared_ptr<const WarpPlan> Trainer::Plan(int scene_index, int target_id, int source_id) {
  const auto key = std::make_tuple(scene_index, target_id, source_id);
  auto it = plans_.find(key);
  if (it != plans_.end()) return it->second;
  const PreparedScene& scene = *scenes_[scene_index];
  const auto& t = scene.view(target_id);
  const auto& s = scene.view(source_id);
  auto plan = std::make_shared<const WarpPlan>(PlanWarp(s.camera, s.pose, t.camera, t.pose, t.depth, config_.threads));
  plans_.emplace(key, plan);
  return plan;
}

StepRecord Trainer::Step() {
  const TrainingExample ex = SampleForIteration(iteration_);
  const PreparedScene& scene = *scenes_[ex.scene_index];
  std::vector<WarpedInput<float>> stack;
  for (int id : ex.sources) {
    const auto features = network_.Encode(ImageTensor<float>(scene.view(id).image));
    stack.push_back(WarpSource(features, Plan(ex.scene_index, ex.target_id, id)));
  }
  const auto pred = network_.Blend(stack).composite;
  const auto truth = ImageTensor<float>(scene.view(ex.target_id).image);
  const auto loss = ComputeLoss(pred, truth, config_.loss, &feature_net_);

  auto& params = network_.parameters();
  params.ZeroGrad();
  ad::Backward(loss);
  try {
    ad::AdamStep<float>(params.tensors(), adam_, params.names());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonFiniteGradient) throw;
    Fail(ErrorCode::kNonFiniteGradient,
         "iteration " + std::to_string(iteration_ + 1) + ": " + e.what());
  }
  params.ZeroGrad();
  ++iteration_;
  StepRecord rec{iteration_, static_cast<double>(loss.item()), Now() - start_time_, ex.scene_index,
                 ex.target_id};
  history_.push_back(rec);
  return rec;
}

std::filesystem::path CheckpointPath(const std::filesystem::path& run_dir, int iteration) {
  return run_dir / ("weights-" + std::to_string(iteration) + ".fvsw");
}

std::optional<std::filesystem::path> LatestCheckpoint(const std::filesystem::path& run_dir) {
  std::optional<std::filesystem::path> best;
  long best_iter = -1;
  if (!std::filesystem::is_directory(run_dir)) return best;
  static const std::regex pattern(R"(weights-(\d+)\.fvsw)");
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      const long iter = std::stol(m[1].str());
      if (iter > best_iter) {
        best_iter = iter;
        best = entry.path();
      }
    }
  }
  return best;
}

void Trainer::Run(const std::optional<std::filesystem::path>& run_dir,
                  const std::function<void(const StepRecord&)>& on_step) {
  std::ofstream metrics;
  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    {
      std::ofstream cfg(*run_dir / "config.json");
      cfg << config_.ToJson().dump(2) << "\n";
      if (!cfg) Fail(ErrorCode::kIoError, "cannot write config.json");
    }
    ad::SaveArchive(feature_net_.parameters().ToArchive(ad::Fnv1a(config_.loss.ToJson().dump())),
                    *run_dir / "feature_net.fvsw");
    metrics.open(*run_dir / "metrics.jsonl", iteration_ == 0 ? std::ios::trunc : std::ios::app);
    if (!metrics) Fail(ErrorCode::kIoError, "cannot open metrics.jsonl");
  }
  while (iteration_ < config_.iterations) {
    StepRecord rec;
    try {
      rec = Step();
    } catch (const Error& e) {
      if (metrics.is_open() && e.code() == ErrorCode::kNonFiniteGradient) {
        metrics << nlohmann::json{{"iteration", iteration_ + 1}, {"error", e.what()}}.dump() << "\n";
      }
      throw;
    }
    if (metrics.is_open()) {
      metrics << nlohmann::json{{"iteration", rec.iteration},
                                {"loss", rec.loss},
                                {"wall_time", rec.wall_time},
                                {"scene", rec.scene_index},
                                {"target", rec.target_id}}
                     .dump()
              << "\n";
      metrics.flush();
    }
    if (run_dir && (iteration_ % config_.checkpoint_every == 0 || iteration_ == config_.iterations))
      SaveCheckpoint(CheckpointPath(*run_dir, iteration_));
    if (on_step) on_step(rec);
  }
}

void Trainer::SaveCheckpoint(const std::filesystem::path& path) const {
  const auto& params = network_.parameters();
  ad::TensorArchive archive = params.ToArchive(config_.model.Hash());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params.tensors()[i].shape();
    const std::size_t n = params.tensors()[i].numel();
    std::vector<float> m = i < adam_.m.size() ? adam_.m[i] : std::vector<float>(n, 0.f);
    std::vector<float> v = i < adam_.v.size() ? adam_.v[i] : std::vector<float>(n, 0.f);
    archive.tensors.push_back({kAdamM + params.names()[i], ad::Tensor::FromData(shape, std::move(m))});
    archive.tensors.push_back({kAdamV + params.names()[i], ad::Tensor::FromData(shape, std::move(v))});
  }
  archive.tensors.push_back(
      {kStepTensor, ad::Tensor::FromData({2}, {float(iteration_), float(adam_.step)})});
  ad::SaveArchive(archive, path);
}

void Trainer::LoadCheckpoint(const std::filesystem::path& path) {
  const ad::TensorArchive archive = ad::LoadArchive(path);
  if (archive.config_hash != config_.model.Hash())
    Fail(ErrorCode::kShapeError, "checkpoint config hash does not match the model config");
  auto& params = network_.parameters();
  LoadNetworkTensors(params, archive);
  const ad::Tensor* step = archive.find(kStepTensor);
  if (!step || step->numel() != 2) Fail(ErrorCode::kMalformedFile, "checkpoint lacks trainer state");
  iteration_ = static_cast<int>(step->data()[0]);
  adam_.step = static_cast<std::int64_t>(step->data()[1]);
  adam_.m.assign(params.size(), {});
  adam_.v.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ad::Tensor* m = archive.find(kAdamM + params.names()[i]);
    const ad::Tensor* v = archive.find(kAdamV + params.names()[i]);
    if (!m || !v) Fail(ErrorCode::kMalformedFile, "checkpoint lacks optimizer state for " + params.names()[i]);
    adam_.m[i].assign(m->data().begin(), m->data().end());
    adam_.v[i].assign(v->data().begin(), v->data().end());
  }
  history_.clear();
}

void LoadWeights(Network<float>& network, const std::filesystem::path& path) {
  const ad::TensorArchive archive = ad::LoadArchive(path);
  if (archive.config_hash != network.config().Hash())
    Fail(ErrorCode::kShapeError, "weights file " + path.string() + " was written for a different model config");
  LoadNetworkTensors(network.parameters(), archive);
}

void SaveWeights(const Network<float>& network, const std::filesystem::path& path) {
  ad::SaveArchive(network.parameters().ToArchive(network.config().Hash()), path);
}

}  // namespace fvs
