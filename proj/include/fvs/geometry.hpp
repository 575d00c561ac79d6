#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fvs/image.hpp"

namespace fvs {

// Camera model ids as used by COLMAP sparse reconstructions.
enum class CameraModel : int {
  kSimplePinhole = 0,
  kPinhole = 1,
  kSimpleRadial = 2,
};

const char* CameraModelName(CameraModel model);
std::optional<CameraModel> CameraModelFromName(const std::string& name);
std::optional<CameraModel> CameraModelFromId(int id);
int CameraModelParamCount(CameraModel model);

struct CameraIntrinsics {
  CameraModel model = CameraModel::kPinhole;
  int width = 0;
  int height = 0;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  // Radial coefficient of SIMPLE_RADIAL. Distorted normalized coordinates are
  // undistorted * (1 + k1 * r^2).
  std::optional<double> k1;

  Eigen::Matrix3d K() const;
  Eigen::Matrix3d Kinv() const;
  // Throws ContractViolation when fx/fy/size/principal point are out of range.
  void Validate() const;
  // Intrinsics for an image downsampled by an integer box factor.
  CameraIntrinsics Scaled(int factor) const;

  std::vector<double> Params() const;
  static CameraIntrinsics FromParams(CameraModel model, int width, int height,
                                     const std::vector<double>& params);
  bool operator==(const CameraIntrinsics&) const = default;
};

// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d Apply(const Eigen::Vector3d& x_world) const {
    return rotation * x_world + translation;
  }
  Eigen::Vector3d Center() const { return -rotation.transpose() * translation; }
  Pose Inverse() const;
  // Orthonormality and det(R) = 1 within 1e-9.
  bool IsValid(double tol = 1e-9) const;

  static Pose LookAt(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                     const Eigen::Vector3d& up);
};

// qvec is (w, x, y, z); assumed unit.
Eigen::Matrix3d QuaternionToRotation(const std::array<double, 4>& qvec);
std::array<double, 4> RotationToQuaternion(const Eigen::Matrix3d& rotation);

struct Projection {
  Eigen::Vector2d uv;
  double depth = 0.0;
};

// Pixel coordinates are continuous with the center of the top-left pixel at
// (0.5, 0.5). The caller checks depth <= 0 for points behind the camera.
Projection Project(const CameraIntrinsics& camera, const Pose& pose,
                   const Eigen::Vector3d& point_world);

struct Backprojection {
  // World point for finite depth; unit world-frame ray direction otherwise.
  Eigen::Vector3d point;
  bool at_infinity = false;
};

// depth must be > 0 (finite or +inf); anything else throws InvalidDepth.
Backprojection Backproject(const CameraIntrinsics& camera, const Pose& pose,
                           const Eigen::Vector2d& uv, double depth);

// Transform taking target-camera coordinates to source-camera coordinates:
// R_r = R_s * R_t^T, t_r = t_s - R_r * t_t.
Pose RelativePose(const Pose& source, const Pose& target);

// SIMPLE_RADIAL point mapping in pixel units.
Eigen::Vector2d DistortPixel(const CameraIntrinsics& camera, const Eigen::Vector2d& uv);

struct UndistortResult {
  Eigen::Vector2d uv;
  bool converged = false;
  int iterations = 0;
};
// Newton inversion of the radial model; tolerance 1e-9 normalized units,
// at most 50 iterations.
UndistortResult UndistortPixel(const CameraIntrinsics& camera, const Eigen::Vector2d& uv);

struct UndistortedImage {
  ImageRGB8 image;
  std::vector<std::uint8_t> valid;
  CameraIntrinsics camera;  // PINHOLE with the same focal length and center
};

// Resamples a SIMPLE_RADIAL image onto the equivalent pinhole camera by
// bilinear interpolation. Pixels whose source location falls outside the
// input, or where the radial mapping cannot be inverted, are black and marked
// invalid. Pinhole inputs are returned unchanged.
UndistortedImage UndistortImage(const ImageRGB8& image, const CameraIntrinsics& camera);

}  // namespace fvs
