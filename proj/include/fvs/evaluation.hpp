#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "fvs/image.hpp"
#include "fvs/pipeline.hpp"

namespace fvs {

struct PsnrValue {
  double db = 0.0;
  bool identical = false;  // MSE == 0; db is +inf
};

inline constexpr double kPsnrCap = 99.0;

// 10·log10(1/MSE) over all channels and pixels.
PsnrValue Psnr(const ImageF& a, const ImageF& b);
// Mean SSIM: 11×11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03, range 1,
// valid windows only, averaged over channels.
double Ssim(const ImageF& a, const ImageF& b);

struct EvalRow {
  int view_id = 0;
  std::string name;
  bool skipped = false;
  std::string reason;
  PsnrValue psnr;
  double ssim = 0.0;
};

struct Provenance {
  std::string weights_path;
  std::uint64_t weights_hash = 0;
  std::uint64_t config_hash = 0;
};

struct EvalReport {
  std::string protocol;  // "loo" or "seq"
  int k = 0;
  std::string method;
  Provenance provenance;
  std::vector<EvalRow> rows;

  std::size_t scored() const;
  // PSNR aggregates cap identical rows at kPsnrCap.
  double mean_psnr() const;
  double median_psnr() const;
  double mean_ssim() const;
  double median_ssim() const;

  nlohmann::json ToJson() const;
  std::string ToTable() const;
};

// Renders the view `camera`/`pose` with the sources in `exclude` withheld.
using TargetRenderer =
    std::function<ImageF(const CameraIntrinsics& camera, const Pose& pose, const std::set<int>& exclude)>;

struct TargetView {
  int view_id = 0;
  std::string name;
  CameraIntrinsics camera;
  Pose pose;
  ImageF truth;
};

// Each image in turn is withheld and synthesized from the others. EmptyOverlap
// rows are kept as skipped.
EvalReport EvalLeaveOneOut(const PreparedScene& scene, const TargetRenderer& render, int threads = 1);
EvalReport EvalWithheldSequence(const std::vector<TargetView>& targets, const TargetRenderer& render,
                                int threads = 1);

// Learned renderer over a prepared scene. Encodes sources once up front.
TargetRenderer NetworkRenderer(const PreparedScene& scene, const Network<float>& network, int k,
                               bool precompute = true);
// No-learning baseline: per pixel the mean of the bilinearly warped source
// colors over sources whose warp lands inside the image; 0 where none does.
TargetRenderer MeanWarpRenderer(const PreparedScene& scene, int k);
// Ground-truth color rasterizer: renders `mesh` at `factor`× resolution and
// box-downsamples, matching how the synthetic references are produced.
TargetRenderer OracleRenderer(const TriangleMesh& mesh, int factor, std::array<std::uint8_t, 3> background);

struct SweepRow {
  int k = 0;
  std::size_t scored = 0;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

// Leave-one-out per k; k_list must be ascending.
std::vector<SweepRow> SweepNViews(const PreparedScene& scene, const Network<float>& network,
                                  const std::vector<int>& k_list, int threads = 1);

// Trajectory file: JSON list of {qvec, tvec, fx, fy, cx, cy, width, height}
// with an optional "image" path (relative to the file) for the reference.
struct TrajectoryEntry {
  CameraIntrinsics camera;
  Pose pose;
  std::array<double, 4> qvec{1, 0, 0, 0};
  std::optional<std::string> image;
};
std::vector<TrajectoryEntry> ReadTrajectory(const std::filesystem::path& path);
void WriteTrajectory(const std::vector<TrajectoryEntry>& entries, const std::filesystem::path& path);

}  // namespace fvs
