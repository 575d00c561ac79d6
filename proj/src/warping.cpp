#include "fvs/warping.hpp"

#include <cmath>
#include <limits>

#include "fvs/error.hpp"
#include "fvs/parallel.hpp"

namespace fvs {

namespace {

// Fractions this close to a pixel center are snapped onto it, so an identity
// warp reproduces its input exactly despite round-off in the reprojection.
constexpr double kSnap = 1e-9;

void SetTaps(const Eigen::Vector2d& uv, int width, int height, std::array<std::int32_t, 4>& index,
             std::array<double, 4>& weight) {
  double sx = uv.x() - 0.5, sy = uv.y() - 0.5;
  double x0 = std::floor(sx), y0 = std::floor(sy);
  double ax = sx - x0, ay = sy - y0;
  if (ax < kSnap) ax = 0;
  if (ax > 1 - kSnap) {
    ax = 0;
    x0 += 1;
  }
  if (ay < kSnap) ay = 0;
  if (ay > 1 - kSnap) {
    ay = 0;
    y0 += 1;
  }
  const int xs[4] = {int(x0), int(x0) + 1, int(x0), int(x0) + 1};
  const int ys[4] = {int(y0), int(y0), int(y0) + 1, int(y0) + 1};
  const double ws[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  for (int t = 0; t < 4; ++t) {
    const bool inside = xs[t] >= 0 && xs[t] < width && ys[t] >= 0 && ys[t] < height;
    if (inside && ws[t] != 0) {
      index[t] = ys[t] * width + xs[t];
      weight[t] = ws[t];
    } else {
      index[t] = -1;
      weight[t] = 0;
    }
  }
}

}  // namespace

WarpPlan PlanWarp(const CameraIntrinsics& source_camera, const Pose& source_pose,
                  const CameraIntrinsics& target_camera, const Pose& target_pose,
                  const DepthMap& target_depth, int threads) {
  if (target_depth.width != target_camera.width || target_depth.height != target_camera.height) {
    Fail(ErrorCode::kShapeError, "target depth does not match the target camera");
  }
  WarpPlan plan;
  plan.target_width = target_camera.width;
  plan.target_height = target_camera.height;
  plan.source_width = source_camera.width;
  plan.source_height = source_camera.height;
  const std::size_t n = plan.pixel_count();
  plan.positions.resize(n);
  plan.tap_index.resize(n);
  plan.tap_weight.resize(n);
  plan.boundary_mask.assign(n, 0);
  plan.infdepth_mask.assign(n, 0);
  const Pose rel = RelativePose(source_pose, target_pose);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ParallelFor(0, plan.target_height, threads, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < plan.target_width; ++x) {
        const std::size_t i = std::size_t(y) * plan.target_width + x;
        const Eigen::Vector3d ray((x + 0.5 - target_camera.cx) / target_camera.fx,
                                  (y + 0.5 - target_camera.cy) / target_camera.fy, 1.0);
        Eigen::Vector3d p;
        if (target_depth.valid[i]) {
          p = rel.rotation * (ray * double(target_depth.depth[i])) + rel.translation;
          plan.infdepth_mask[i] = 1;
        } else {
          p = rel.rotation * ray;
        }
        plan.tap_index[i] = {-1, -1, -1, -1};
        plan.tap_weight[i] = {0, 0, 0, 0};
        if (!(p.z() > 0)) {
          plan.positions[i] = {nan, nan};
          continue;
        }
        const Eigen::Vector2d uv(source_camera.fx * p.x() / p.z() + source_camera.cx,
                                 source_camera.fy * p.y() / p.z() + source_camera.cy);
        plan.positions[i] = uv;
        if (!(uv.x() >= 0 && uv.x() <= source_camera.width && uv.y() >= 0 &&
              uv.y() <= source_camera.height)) {
          continue;
        }
        plan.boundary_mask[i] = 1;
        SetTaps(uv, source_camera.width, source_camera.height, plan.tap_index[i], plan.tap_weight[i]);
      }
    }
  });
  return plan;
}

template <typename T>
void GatherFeatures(const WarpPlan& plan, int channels, std::span<const T> src, std::span<T> dst) {
  const std::size_t n = plan.pixel_count();
  const std::size_t ns = std::size_t(plan.source_width) * plan.source_height;
  if (src.size() != ns * channels || dst.size() != n * channels) {
    Fail(ErrorCode::kShapeError, "warp gather size mismatch");
  }
  for (int c = 0; c < channels; ++c) {
    const T* s = src.data() + c * ns;
    T* d = dst.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) {
      T acc = 0;
      if (plan.boundary_mask[i]) {
        const auto& idx = plan.tap_index[i];
        const auto& w = plan.tap_weight[i];
        for (int t = 0; t < 4; ++t) {
          if (idx[t] >= 0) acc += T(w[t]) * s[idx[t]];
        }
      }
      d[i] = acc;
    }
  }
}

template <typename T>
void ScatterFeatures(const WarpPlan& plan, int channels, std::span<const T> upstream,
                     std::span<T> src_grad) {
  const std::size_t n = plan.pixel_count();
  const std::size_t ns = std::size_t(plan.source_width) * plan.source_height;
  if (src_grad.size() != ns * channels || upstream.size() != n * channels) {
    Fail(ErrorCode::kShapeError, "warp scatter size mismatch");
  }
  // Fixed pixel order keeps the accumulation bit-stable.
  for (int c = 0; c < channels; ++c) {
    const T* g = upstream.data() + c * n;
    T* s = src_grad.data() + c * ns;
    for (std::size_t i = 0; i < n; ++i) {
      if (!plan.boundary_mask[i]) continue;
      const auto& idx = plan.tap_index[i];
      const auto& w = plan.tap_weight[i];
      for (int t = 0; t < 4; ++t) {
        if (idx[t] >= 0) s[idx[t]] += T(w[t]) * g[i];
      }
    }
  }
}

WarpedEntry WarpToTarget(const FeatureGrid& source_features, const CameraIntrinsics& source_camera,
                         const Pose& source_pose, const CameraIntrinsics& target_camera,
                         const Pose& target_pose, const DepthMap& target_depth) {
  if (source_features.width != source_camera.width || source_features.height != source_camera.height) {
    Fail(ErrorCode::kShapeError, "source features do not match the source camera");
  }
  const WarpPlan plan = PlanWarp(source_camera, source_pose, target_camera, target_pose, target_depth);
  WarpedEntry entry;
  entry.warped = FeatureGrid(source_features.channels, target_camera.height, target_camera.width);
  GatherFeatures<float>(plan, source_features.channels, source_features.values, entry.warped.values);
  entry.boundary_mask = plan.boundary_mask;
  entry.infdepth_mask = plan.infdepth_mask;
  return entry;
}

FeatureGrid WarpGradient(const WarpPlan& plan, const FeatureGrid& upstream) {
  if (upstream.width != plan.target_width || upstream.height != plan.target_height) {
    Fail(ErrorCode::kShapeError, "upstream gradient does not match the warp target");
  }
  FeatureGrid out(upstream.channels, plan.source_height, plan.source_width);
  ScatterFeatures<float>(plan, upstream.channels, upstream.values, out.values);
  return out;
}

template <typename T>
ad::BasicTensor<T> WarpFeatures(const ad::BasicTensor<T>& source, std::shared_ptr<const WarpPlan> plan) {
  if (source.rank() != 3 || source.dim(1) != plan->source_height || source.dim(2) != plan->source_width) {
    Fail(ErrorCode::kShapeError, "warp input " + ad::ShapeString(source.shape()) +
                                     " does not match the source camera");
  }
  const int channels = int(source.dim(0));
  std::vector<T> out(std::size_t(channels) * plan->pixel_count());
  GatherFeatures<T>(*plan, channels, source.data(), out);
  return ad::MakeResult<T>({channels, plan->target_height, plan->target_width}, std::move(out), {source},
                           "warp", [plan, channels](ad::Node<T>& self) {
    ad::Node<T>* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->EnsureGrad();
    ScatterFeatures<T>(*plan, channels, self.grad, p->grad);
  });
}

template <typename T>
ad::BasicTensor<T> MaskTensor(const std::vector<std::uint8_t>& mask, int height, int width) {
  std::vector<T> v(mask.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask[i] ? T(1) : T(0);
  return ad::BasicTensor<T>::FromData({1, height, width}, std::move(v));
}

template void GatherFeatures<float>(const WarpPlan&, int, std::span<const float>, std::span<float>);
template void GatherFeatures<double>(const WarpPlan&, int, std::span<const double>, std::span<double>);
template void ScatterFeatures<float>(const WarpPlan&, int, std::span<const float>, std::span<float>);
template void ScatterFeatures<double>(const WarpPlan&, int, std::span<const double>, std::span<double>);
template ad::BasicTensor<float> WarpFeatures(const ad::BasicTensor<float>&, std::shared_ptr<const WarpPlan>);
template ad::BasicTensor<double> WarpFeatures(const ad::BasicTensor<double>&, std::shared_ptr<const WarpPlan>);
template ad::BasicTensor<float> MaskTensor<float>(const std::vector<std::uint8_t>&, int, int);
template ad::BasicTensor<double> MaskTensor<double>(const std::vector<std::uint8_t>&, int, int);

}  // namespace fvs
