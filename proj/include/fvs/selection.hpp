#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "fvs/geometry.hpp"
#include "fvs/image.hpp"
#include "fvs/scene_io.hpp"

namespace fvs {

// A candidate source: calibration plus its proxy depth map (same size as the
// camera).
struct SourceView {
  int image_id = 0;
  CameraIntrinsics camera;
  Pose pose;
  const DepthMap* depth = nullptr;
};

struct RankedSource {
  int image_id = 0;
  std::int64_t score = 0;
  bool operator==(const RankedSource&) const = default;
};

struct SelectionResult {
  std::vector<RankedSource> ranked;  // non-increasing score, ties by smaller id
  std::vector<int> chosen;           // first min(k, candidates) ids of `ranked`
};

// Counts, per candidate, the valid target pixels whose backprojection lands in
// the source image with positive depth and matches the source's proxy depth
// (nearest-neighbor sample, valid) within 1% of the source depth. Throws
// EmptyOverlap when every score is zero (the partial result is not returned).
SelectionResult SelectSourceViews(const std::vector<SourceView>& candidates,
                                  const CameraIntrinsics& target_camera, const Pose& target_pose,
                                  const DepthMap& target_depth, int k,
                                  const std::set<int>& exclude = {}, int threads = 1);

SelectionResult SelectSourceViews(const SceneBundle& scene, const CameraIntrinsics& target_camera,
                                  const Pose& target_pose, const DepthMap& target_depth,
                                  const std::map<int, DepthMap>& source_depths, int k,
                                  const std::set<int>& exclude = {}, int threads = 1);

// Score of a single candidate (no ranking, no EmptyOverlap).
std::int64_t OverlapScore(const SourceView& source, const CameraIntrinsics& target_camera,
                          const Pose& target_pose, const DepthMap& target_depth);

inline constexpr double kDepthConsistency = 0.01;

}  // namespace fvs
