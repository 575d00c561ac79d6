#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "fvs/ad/optim.hpp"
#include "fvs/model.hpp"
#include "fvs/pipeline.hpp"

namespace fvs {

inline constexpr int kFeatureLayers = 5;

struct LossConfig {
  double l1_weight = 1.0;
  std::array<double, kFeatureLayers> feature_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  // false selects the pure-L1 loss.
  bool use_features = true;
  std::array<int, kFeatureLayers> feature_channels{8, 16, 16, 32, 32};
  std::uint64_t feature_seed = 0x9e3779b97f4a7c15ull;

  void Validate() const;
  nlohmann::json ToJson() const;
  static LossConfig FromJson(const nlohmann::json& j);
};

// Fixed random 5-stage conv pyramid; stage l emits φ_l at stride 2^(l-1).
template <typename T>
class FrozenFeatureNet {
 public:
  FrozenFeatureNet(const std::array<int, kFeatureLayers>& channels, std::uint64_t seed);

  std::vector<TensorT<T>> Features(const TensorT<T>& rgb) const;
  const ParameterStore<T>& parameters() const { return params_; }
  ParameterStore<T>& parameters() { return params_; }

 private:
  ParameterStore<T> params_;
  std::vector<std::array<ConvParams<T>, 2>> stages_;
};

// l1_weight · mean|pred − truth| + Σ_l λ_l · mean|φ_l(pred) − φ_l(truth)|.
// `features` may be null only when the feature terms are disabled or all λ_l
// are zero.
template <typename T>
TensorT<T> ComputeLoss(const TensorT<T>& pred, const TensorT<T>& truth, const LossConfig& config,
                       const FrozenFeatureNet<T>* features);

struct TrainConfig {
  int iterations = 2000;
  int batch_size = 1;
  int k_sources = 4;
  int downsample_factor = 4;
  std::uint64_t seed = 1;
  int checkpoint_every = 500;
  int max_resample = 16;
  int threads = 1;
  ad::AdamConfig adam;
  LossConfig loss;
  ModelConfig model;

  void Validate() const;
  nlohmann::json ToJson() const;
  static TrainConfig FromJson(const nlohmann::json& j);
};

struct TrainingExample {
  int scene_index = 0;
  int target_id = 0;
  std::vector<int> sources;  // descending selection score
  int resamples = 0;
};

struct StepRecord {
  int iteration = 0;  // 1-based index of the completed step
  double loss = 0.0;
  double wall_time = 0.0;  // seconds since the trainer was constructed
  int scene_index = 0;
  int target_id = 0;
};

// Iteration-seeded random stream: draws depend only on (seed, iteration).
std::uint64_t IterationSeed(std::uint64_t seed, std::uint64_t iteration);

class Trainer {
 public:
  Trainer(std::vector<const PreparedScene*> scenes, TrainConfig config);

  // Uniform target over all images of a uniformly chosen scene; sources are
  // selected with the target excluded. Retries on EmptyOverlap.
  TrainingExample Sample(std::uint64_t& rng);
  TrainingExample SampleForIteration(int iteration);

  StepRecord Step();
  // Runs until config.iterations. With a run directory: writes config.json,
  // feature_net.fvsw, metrics.jsonl and weights-<iter>.fvsw checkpoints.
  void Run(const std::optional<std::filesystem::path>& run_dir = std::nullopt,
           const std::function<void(const StepRecord&)>& on_step = {});

  void SaveCheckpoint(const std::filesystem::path& path) const;
  void LoadCheckpoint(const std::filesystem::path& path);

  int iteration() const { return iteration_; }
  const TrainConfig& config() const { return config_; }
  Network<float>& network() { return network_; }
  const Network<float>& network() const { return network_; }
  const FrozenFeatureNet<float>& feature_net() const { return feature_net_; }
  const std::vector<StepRecord>& history() const { return history_; }

 private:
  std::shared_ptr<const WarpPlan> Plan(int scene_index, int target_id, int source_id);

  std::vector<const PreparedScene*> scenes_;
  TrainConfig config_;
  Network<float> network_;
  FrozenFeatureNet<float> feature_net_;
  ad::AdamState<float> adam_;
  int iteration_ = 0;
  std::vector<StepRecord> history_;
  std::map<std::tuple<int, int, int>, std::shared_ptr<const WarpPlan>> plans_;
  std::map<std::pair<int, int>, std::vector<int>> selections_;
  double start_time_ = 0.0;
};

// Path of the checkpoint for `iteration` inside a run directory.
std::filesystem::path CheckpointPath(const std::filesystem::path& run_dir, int iteration);
// Latest weights-<iter>.fvsw in a run directory, if any.
std::optional<std::filesystem::path> LatestCheckpoint(const std::filesystem::path& run_dir);

// Network weights from a checkpoint or plain weights file; the header's config
// hash must match `config`.
void LoadWeights(Network<float>& network, const std::filesystem::path& path);
void SaveWeights(const Network<float>& network, const std::filesystem::path& path);

}  // namespace fvs
