#include "fvs/geometry.hpp"

#include <cmath>
#include <limits>

#include "fvs/error.hpp"

namespace fvs {

const char* CameraModelName(CameraModel model) {
  switch (model) {
    case CameraModel::kSimplePinhole: return "SIMPLE_PINHOLE";
    case CameraModel::kPinhole: return "PINHOLE";
    case CameraModel::kSimpleRadial: return "SIMPLE_RADIAL";
  }
  return "UNKNOWN";
}

std::optional<CameraModel> CameraModelFromName(const std::string& name) {
  if (name == "SIMPLE_PINHOLE") return CameraModel::kSimplePinhole;
  if (name == "PINHOLE") return CameraModel::kPinhole;
  if (name == "SIMPLE_RADIAL") return CameraModel::kSimpleRadial;
  return std::nullopt;
}

std::optional<CameraModel> CameraModelFromId(int id) {
  if (id >= 0 && id <= 2) return static_cast<CameraModel>(id);
  return std::nullopt;
}

int CameraModelParamCount(CameraModel model) {
  switch (model) {
    case CameraModel::kSimplePinhole: return 3;
    case CameraModel::kPinhole: return 4;
    case CameraModel::kSimpleRadial: return 4;
  }
  return 0;
}

Eigen::Matrix3d CameraIntrinsics::K() const {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

Eigen::Matrix3d CameraIntrinsics::Kinv() const {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = 1.0 / fx;
  k(1, 1) = 1.0 / fy;
  k(0, 2) = -cx / fx;
  k(1, 2) = -cy / fy;
  return k;
}

void CameraIntrinsics::Validate() const {
  if (!(fx > 0) || !(fy > 0)) Fail(ErrorCode::kContractViolation, "focal length must be positive");
  if (width < 1 || height < 1) Fail(ErrorCode::kContractViolation, "camera size must be >= 1");
  if (!(cx >= 0 && cx <= width && cy >= 0 && cy <= height)) {
    Fail(ErrorCode::kContractViolation, "principal point outside the image");
  }
}

CameraIntrinsics CameraIntrinsics::Scaled(int factor) const {
  CameraIntrinsics out = *this;
  if (factor == 1) return out;
  const double s = 1.0 / factor;
  out.width = width / factor;
  out.height = height / factor;
  out.fx = fx * s;
  out.fy = fy * s;
  out.cx = cx * s;
  out.cy = cy * s;
  return out;
}

std::vector<double> CameraIntrinsics::Params() const {
  switch (model) {
    case CameraModel::kSimplePinhole: return {fx, cx, cy};
    case CameraModel::kPinhole: return {fx, fy, cx, cy};
    case CameraModel::kSimpleRadial: return {fx, cx, cy, k1.value_or(0.0)};
  }
  return {};
}

CameraIntrinsics CameraIntrinsics::FromParams(CameraModel model, int width, int height,
                                              const std::vector<double>& p) {
  if (int(p.size()) != CameraModelParamCount(model)) {
    Fail(ErrorCode::kMalformedFile, "wrong parameter count for camera model");
  }
  CameraIntrinsics c;
  c.model = model;
  c.width = width;
  c.height = height;
  switch (model) {
    case CameraModel::kSimplePinhole:
      c.fx = c.fy = p[0];
      c.cx = p[1];
      c.cy = p[2];
      break;
    case CameraModel::kPinhole:
      c.fx = p[0];
      c.fy = p[1];
      c.cx = p[2];
      c.cy = p[3];
      break;
    case CameraModel::kSimpleRadial:
      c.fx = c.fy = p[0];
      c.cx = p[1];
      c.cy = p[2];
      c.k1 = p[3];
      break;
  }
  return c;
}

Pose Pose::Inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -inv.rotation * translation;
  return inv;
}

bool Pose::IsValid(double tol) const {
  const Eigen::Matrix3d e = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  return e.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol &&
         translation.allFinite();
}

Pose Pose::LookAt(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                  const Eigen::Vector3d& up) {
  // Camera looks down +z with +y pointing down in the image.
  const Eigen::Vector3d z = (target - eye).normalized();
  const Eigen::Vector3d x = z.cross(up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Pose pose;
  pose.rotation.row(0) = x.transpose();
  pose.rotation.row(1) = y.transpose();
  pose.rotation.row(2) = z.transpose();
  pose.translation = -pose.rotation * eye;
  return pose;
}

Eigen::Matrix3d QuaternionToRotation(const std::array<double, 4>& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

std::array<double, 4> RotationToQuaternion(const Eigen::Matrix3d& rotation) {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  return {q.w(), q.x(), q.y(), q.z()};
}

Projection Project(const CameraIntrinsics& camera, const Pose& pose,
                   const Eigen::Vector3d& point_world) {
  const Eigen::Vector3d x = pose.Apply(point_world);
  Projection p;
  p.depth = x.z();
  p.uv = {camera.fx * x.x() / x.z() + camera.cx, camera.fy * x.y() / x.z() + camera.cy};
  return p;
}

Backprojection Backproject(const CameraIntrinsics& camera, const Pose& pose,
                           const Eigen::Vector2d& uv, double depth) {
  if (!(depth > 0)) Fail(ErrorCode::kInvalidDepth, "backprojection depth must be > 0");
  const Eigen::Vector3d ray((uv.x() - camera.cx) / camera.fx, (uv.y() - camera.cy) / camera.fy,
                            1.0);
  Backprojection b;
  if (std::isinf(depth)) {
    b.at_infinity = true;
    b.point = pose.rotation.transpose() * ray.normalized();
    return b;
  }
  const Eigen::Vector3d x_cam = ray * depth;
  b.point = pose.rotation.transpose() * (x_cam - pose.translation);
  return b;
}

Pose RelativePose(const Pose& source, const Pose& target) {
  Pose r;
  r.rotation = source.rotation * target.rotation.transpose();
  r.translation = source.translation - r.rotation * target.translation;
  return r;
}

Eigen::Vector2d DistortPixel(const CameraIntrinsics& camera, const Eigen::Vector2d& uv) {
  const double k1 = camera.k1.value_or(0.0);
  const double x = (uv.x() - camera.cx) / camera.fx;
  const double y = (uv.y() - camera.cy) / camera.fy;
  const double s = 1.0 + k1 * (x * x + y * y);
  return {camera.fx * x * s + camera.cx, camera.fy * y * s + camera.cy};
}

UndistortResult UndistortPixel(const CameraIntrinsics& camera, const Eigen::Vector2d& uv) {
  const double k1 = camera.k1.value_or(0.0);
  const Eigen::Vector2d d((uv.x() - camera.cx) / camera.fx, (uv.y() - camera.cy) / camera.fy);
  Eigen::Vector2d p = d;
  UndistortResult result;
  for (int it = 1; it <= 50; ++it) {
    const double r2 = p.squaredNorm();
    const Eigen::Vector2d f = p * (1.0 + k1 * r2) - d;
    Eigen::Matrix2d j = (1.0 + k1 * r2) * Eigen::Matrix2d::Identity() + 2.0 * k1 * p * p.transpose();
    const double det = j.determinant();
    if (!(std::abs(det) > 1e-15)) break;
    const Eigen::Vector2d step = j.inverse() * f;
    p -= step;
    result.iterations = it;
    if (!p.allFinite()) break;
    if (step.norm() < 1e-9) {
      result.converged = true;
      break;
    }
  }
  result.uv = {camera.fx * p.x() + camera.cx, camera.fy * p.y() + camera.cy};
  return result;
}

UndistortedImage UndistortImage(const ImageRGB8& image, const CameraIntrinsics& camera) {
  UndistortedImage out;
  out.camera = camera;
  out.camera.k1.reset();
  if (camera.model == CameraModel::kSimpleRadial) out.camera.model = CameraModel::kPinhole;
  if (camera.model != CameraModel::kSimpleRadial) {
    out.image = image;
    out.valid.assign(std::size_t(image.width) * image.height, 1);
    return out;
  }
  const int w = image.width, h = image.height;
  out.image = ImageRGB8(w, h);
  out.valid.assign(std::size_t(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector2d uv(x + 0.5, y + 0.5);
      const Eigen::Vector2d src = DistortPixel(camera, uv);
      // The radial map folds for strong negative k1; reject pixels whose
      // distorted location does not invert back to this pixel.
      const UndistortResult back = UndistortPixel(camera, src);
      if (!back.converged || (back.uv - uv).norm() > 1e-6) continue;
      if (!(src.x() >= 0 && src.x() <= w && src.y() >= 0 && src.y() <= h)) continue;
      const double sx = std::clamp(src.x() - 0.5, 0.0, double(w - 1));
      const double sy = std::clamp(src.y() - 0.5, 0.0, double(h - 1));
      const int x0 = std::min(int(std::floor(sx)), w - 1);
      const int y0 = std::min(int(std::floor(sy)), h - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double ax = sx - x0, ay = sy - y0;
      auto* dst = out.image.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - ax) * (1 - ay) * image.at(x0, y0)[c] + ax * (1 - ay) * image.at(x1, y0)[c] +
                         (1 - ax) * ay * image.at(x0, y1)[c] + ax * ay * image.at(x1, y1)[c];
        dst[c] = std::uint8_t(std::clamp(std::lround(v), 0L, 255L));
      }
      out.valid[std::size_t(y) * w + x] = 1;
    }
  }
  return out;
}

}  // namespace fvs
