#include "fvs/selection.hpp"

#include <algorithm>
#include <cmath>

#include "fvs/error.hpp"
#include "fvs/parallel.hpp"

namespace fvs {

namespace {

std::vector<Eigen::Vector3d> TargetPoints(const CameraIntrinsics& camera, const Pose& pose,
                                          const DepthMap& depth) {
  std::vector<Eigen::Vector3d> points;
  points.reserve(depth.valid_count());
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(x, y)) continue;
      points.push_back(Backproject(camera, pose, {x + 0.5, y + 0.5}, depth.at(x, y)).point);
    }
  }
  return points;
}

std::int64_t CountConsistent(const SourceView& source, const std::vector<Eigen::Vector3d>& points) {
  const DepthMap& d = *source.depth;
  std::int64_t score = 0;
  for (const auto& p : points) {
    const Projection proj = Project(source.camera, source.pose, p);
    if (!(proj.depth > 0)) continue;
    const double u = proj.uv.x(), v = proj.uv.y();
    if (!(u >= 0 && u < d.width && v >= 0 && v < d.height)) continue;
    const int px = int(u), py = int(v);
    if (!d.is_valid(px, py)) continue;
    const double ds = d.at(px, py);
    if (std::abs(proj.depth - ds) <= kDepthConsistency * ds) ++score;
  }
  return score;
}

void CheckSource(const SourceView& s) {
  if (!s.depth) Fail(ErrorCode::kContractViolation, "source view without depth map");
  if (s.depth->width != s.camera.width || s.depth->height != s.camera.height) {
    Fail(ErrorCode::kShapeError, "source depth does not match its camera");
  }
}

}  // namespace

std::int64_t OverlapScore(const SourceView& source, const CameraIntrinsics& target_camera,
                          const Pose& target_pose, const DepthMap& target_depth) {
  CheckSource(source);
  return CountConsistent(source, TargetPoints(target_camera, target_pose, target_depth));
}

SelectionResult SelectSourceViews(const std::vector<SourceView>& candidates,
                                  const CameraIntrinsics& target_camera, const Pose& target_pose,
                                  const DepthMap& target_depth, int k,
                                  const std::set<int>& exclude, int threads) {
  if (k < 1) Fail(ErrorCode::kContractViolation, "k must be >= 1");
  if (target_depth.width != target_camera.width || target_depth.height != target_camera.height) {
    Fail(ErrorCode::kShapeError, "target depth does not match the target camera");
  }
  std::vector<const SourceView*> pool;
  for (const auto& c : candidates) {
    if (exclude.count(c.image_id)) continue;
    CheckSource(c);
    pool.push_back(&c);
  }
  const auto points = TargetPoints(target_camera, target_pose, target_depth);
  SelectionResult result;
  result.ranked.resize(pool.size());
  ParallelFor(0, int(pool.size()), threads, [&](int b, int e) {
    for (int i = b; i < e; ++i) {
      result.ranked[i] = {pool[i]->image_id, CountConsistent(*pool[i], points)};
    }
  });
  std::sort(result.ranked.begin(), result.ranked.end(), [](const RankedSource& a, const RankedSource& b) {
    return a.score != b.score ? a.score > b.score : a.image_id < b.image_id;
  });
  const bool any = std::any_of(result.ranked.begin(), result.ranked.end(),
                               [](const RankedSource& r) { return r.score > 0; });
  if (!any) Fail(ErrorCode::kEmptyOverlap, "no candidate source overlaps the target view");
  for (std::size_t i = 0; i < result.ranked.size() && int(i) < k; ++i) {
    result.chosen.push_back(result.ranked[i].image_id);
  }
  return result;
}

SelectionResult SelectSourceViews(const SceneBundle& scene, const CameraIntrinsics& target_camera,
                                  const Pose& target_pose, const DepthMap& target_depth,
                                  const std::map<int, DepthMap>& source_depths, int k,
                                  const std::set<int>& exclude, int threads) {
  std::vector<SourceView> candidates;
  for (const auto& image : scene.images) {
    const auto it = source_depths.find(image.image_id);
    if (it == source_depths.end()) continue;
    candidates.push_back({image.image_id, scene.camera_of(image), image.pose, &it->second});
  }
  return SelectSourceViews(candidates, target_camera, target_pose, target_depth, k, exclude, threads);
}

}  // namespace fvs
