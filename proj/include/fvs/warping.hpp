#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fvs/ad/tensor.hpp"
#include "fvs/geometry.hpp"
#include "fvs/image.hpp"

namespace fvs {

// Channel-major C×H×W float features.
struct FeatureGrid {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  FeatureGrid() = default;
  FeatureGrid(int c, int h, int w) : channels(c), height(h), width(w), values(std::size_t(c) * h * w, 0.f) {}
  float& at(int c, int y, int x) { return values[(std::size_t(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return values[(std::size_t(c) * height + y) * width + x]; }
  bool operator==(const FeatureGrid&) const = default;
};

// Per-target-pixel sampling of a source feature grid: up to four bilinear
// taps (index -1 marks a zero tap) plus the two masks.
struct WarpPlan {
  int target_width = 0;
  int target_height = 0;
  int source_width = 0;
  int source_height = 0;
  // Continuous source coordinates u_k; NaN where the point is behind the source.
  std::vector<Eigen::Vector2d> positions;
  std::vector<std::array<std::int32_t, 4>> tap_index;
  std::vector<std::array<double, 4>> tap_weight;
  std::vector<std::uint8_t> boundary_mask;  // 1 = u_k inside [0,W]×[0,H]
  std::vector<std::uint8_t> infdepth_mask;  // 1 = target depth was valid

  std::size_t pixel_count() const { return std::size_t(target_width) * target_height; }
};

// u_k = K_k (R_r D_t(u_t) K_t^-1 u_t + t_r) with the relative pose taking
// target-camera to source-camera coordinates. Invalid target depth uses the
// +inf limit, i.e. the rotated ray without translation.
WarpPlan PlanWarp(const CameraIntrinsics& source_camera, const Pose& source_pose,
                  const CameraIntrinsics& target_camera, const Pose& target_pose,
                  const DepthMap& target_depth, int threads = 1);

// dst (C×Ht×Wt) = bilinear gather of src (C×Hs×Ws); zero where boundary_mask = 0.
template <typename T>
void GatherFeatures(const WarpPlan& plan, int channels, std::span<const T> src, std::span<T> dst);

// Transpose of GatherFeatures: src_grad += adjoint(upstream).
template <typename T>
void ScatterFeatures(const WarpPlan& plan, int channels, std::span<const T> upstream,
                     std::span<T> src_grad);

struct WarpedEntry {
  FeatureGrid warped;
  std::vector<std::uint8_t> boundary_mask;
  std::vector<std::uint8_t> infdepth_mask;
};

// Throws ShapeError when the features do not match the source camera or the
// depth map does not match the target camera.
WarpedEntry WarpToTarget(const FeatureGrid& source_features, const CameraIntrinsics& source_camera,
                         const Pose& source_pose, const CameraIntrinsics& target_camera,
                         const Pose& target_pose, const DepthMap& target_depth);

// Adjoint of the warp with respect to the source features (geometry fixed).
FeatureGrid WarpGradient(const WarpPlan& plan, const FeatureGrid& upstream);

// Differentiable warp of a C×Hs×Ws tensor into C×Ht×Wt.
template <typename T>
ad::BasicTensor<T> WarpFeatures(const ad::BasicTensor<T>& source,
                                std::shared_ptr<const WarpPlan> plan);

// 1×Ht×Wt tensor from a binary mask.
template <typename T>
ad::BasicTensor<T> MaskTensor(const std::vector<std::uint8_t>& mask, int height, int width);

}  // namespace fvs
