#include <gtest/gtest.h>

#include "fvs/error.hpp"
#include "fvs/geometry.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fvs;
using testutil::CodeOf;

namespace {

CameraIntrinsics Pinhole(double f, double cx, double cy, int w = 100, int h = 100) {
  return CameraIntrinsics::FromParams(CameraModel::kPinhole, w, h, {f, f, cx, cy});
}

}  // namespace

TEST(Project, AnalyticPinhole) {
  const auto p0 = Project(Pinhole(1, 0, 0), Pose{}, {0, 0, 2});
  EXPECT_EQ(p0.uv, Eigen::Vector2d(0, 0));
  EXPECT_EQ(p0.depth, 2.0);
  const auto p1 = Project(Pinhole(100, 50, 50), Pose{}, {1, 0, 2});
  EXPECT_EQ(p1.uv, Eigen::Vector2d(100, 50));
  EXPECT_EQ(p1.depth, 2.0);
}

TEST(Project, MatchesOracle) {
  gen::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto cam = gen::RandomPinhole(rng);
    const auto pose = gen::RandomPose(rng);
    const Eigen::Vector3d x(gen::Uniform(rng, -3, 3), gen::Uniform(rng, -3, 3), gen::Uniform(rng, -3, 3));
    const auto p = Project(cam, pose, x);
    const auto o = oracle::ProjectUvz(cam, pose, x);
    EXPECT_NEAR(p.depth, o.z(), 1e-12);
    if (std::abs(o.z()) > 1e-3) {
      EXPECT_NEAR(p.uv.x(), o.x(), 1e-9 * std::max(1.0, std::abs(o.x())));
      EXPECT_NEAR(p.uv.y(), o.y(), 1e-9 * std::max(1.0, std::abs(o.y())));
    }
  }
}

TEST(Backproject, Examples) {
  const auto b = Backproject(Pinhole(1, 0.5, 0.5), Pose{}, {0.5, 0.5}, 1.0);
  EXPECT_FALSE(b.at_infinity);
  EXPECT_EQ(b.point, Eigen::Vector3d(0, 0, 1));
  for (double d : {0.0, -1.0, std::nan("")}) {
    EXPECT_EQ(CodeOf([&] { Backproject(Pinhole(1, 0, 0), Pose{}, {0, 0}, d); }), ErrorCode::kInvalidDepth);
  }
}

TEST(Backproject, InfiniteDepthIsRotatedRay) {
  gen::Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto cam = gen::RandomPinhole(rng);
    const auto pose = gen::RandomPose(rng);
    const Eigen::Vector2d uv(gen::Uniform(rng, 0, cam.width), gen::Uniform(rng, 0, cam.height));
    const auto b = Backproject(cam, pose, uv, std::numeric_limits<double>::infinity());
    EXPECT_TRUE(b.at_infinity);
    const Eigen::Vector3d ray = pose.rotation.transpose() *
                                Eigen::Vector3d((uv.x() - cam.cx) / cam.fx, (uv.y() - cam.cy) / cam.fy, 1).normalized();
    EXPECT_NEAR((b.point - ray).norm(), 0.0, 1e-12);
  }
}

TEST(Backproject, PrincipalPointIsOpticalAxis) {
  gen::Rng rng(3);
  const auto cam = gen::RandomPinhole(rng);
  const auto pose = gen::RandomPose(rng);
  const auto b = Backproject(cam, pose, {cam.cx, cam.cy}, 3.0);
  const Eigen::Vector3d xc = pose.Apply(b.point);
  EXPECT_NEAR(xc.x(), 0.0, 1e-12);
  EXPECT_NEAR(xc.y(), 0.0, 1e-12);
}

TEST(Backproject, ProjectRoundTrip) {
  gen::Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const auto cam = gen::RandomPinhole(rng);
    const auto pose = gen::RandomPose(rng);
    const Eigen::Vector2d uv(gen::Uniform(rng, 0, cam.width), gen::Uniform(rng, 0, cam.height));
    const double d = gen::Uniform(rng, 0.05, 100);
    const auto b = Backproject(cam, pose, uv, d);
    const auto p = Project(cam, pose, b.point);
    ASSERT_NEAR(p.uv.x(), uv.x(), 1e-9 * std::max(1.0, std::abs(uv.x())));
    ASSERT_NEAR(p.uv.y(), uv.y(), 1e-9 * std::max(1.0, std::abs(uv.y())));
    ASSERT_NEAR(p.depth, d, 1e-9 * d);
  }
}

TEST(RelativePose, Examples) {
  gen::Rng rng(5);
  const Pose p = gen::RandomPose(rng);
  const Pose same = RelativePose(p, p);
  EXPECT_NEAR((same.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR(same.translation.norm(), 0.0, 1e-12);
  const Pose from_id = RelativePose(p, Pose{});
  EXPECT_EQ(from_id.rotation, p.rotation);
  EXPECT_EQ(from_id.translation, p.translation);
}

TEST(RelativePose, MatchesDirectTransformAndChains) {
  gen::Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const Pose a = gen::RandomPose(rng), b = gen::RandomPose(rng), c = gen::RandomPose(rng);
    const Eigen::Vector3d x(gen::Uniform(rng, -5, 5), gen::Uniform(rng, -5, 5), gen::Uniform(rng, -5, 5));
    const Pose r = RelativePose(a, b);
    EXPECT_TRUE(r.IsValid());
    EXPECT_NEAR((r.Apply(b.Apply(x)) - a.Apply(x)).norm(), 0.0, 1e-12 * std::max(1.0, x.norm()) * 10);
    const Pose chained = oracle::Compose(RelativePose(a, b), RelativePose(b, c));
    const Pose direct = RelativePose(a, c);
    EXPECT_LT((chained.rotation - direct.rotation).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((chained.translation - direct.translation).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Quaternion, HandComputedAndRoundTrip) {
  const Eigen::Matrix3d r = QuaternionToRotation({0, 1, 0, 0});
  EXPECT_EQ(r, Eigen::Matrix3d(Eigen::Vector3d(1, -1, -1).asDiagonal()));
  // 90° about z: (cos 45°, 0, 0, sin 45°).
  const double s = std::sqrt(0.5);
  Eigen::Matrix3d rz;
  rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((QuaternionToRotation({s, 0, 0, s}) - rz).cwiseAbs().maxCoeff(), 1e-15);
  gen::Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto q = gen::UnitQuaternion(rng);
    const auto back = RotationToQuaternion(QuaternionToRotation(q));
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(back[k], q[k], 1e-12);
  }
}

TEST(Pose, ValidityAndLookAt) {
  Pose p;
  EXPECT_TRUE(p.IsValid());
  p.rotation(0, 0) = 1 + 1e-6;
  EXPECT_FALSE(p.IsValid());
  p.rotation = Eigen::Vector3d(1, 1, -1).asDiagonal();
  EXPECT_FALSE(p.IsValid());
  const Pose look = Pose::LookAt({3, 0, 0}, {0, 0, 0}, {0, 0, 1});
  EXPECT_TRUE(look.IsValid());
  const Eigen::Vector3d center = look.Apply({0, 0, 0});
  EXPECT_NEAR(center.x(), 0, 1e-12);
  EXPECT_NEAR(center.y(), 0, 1e-12);
  EXPECT_NEAR(center.z(), 3, 1e-12);
  // World up maps to image up (negative camera y).
  EXPECT_LT(look.Apply({0, 0, 1}).y(), 0);
  EXPECT_NEAR((look.Center() - Eigen::Vector3d(3, 0, 0)).norm(), 0, 1e-12);
}

TEST(Intrinsics, ValidateAndScale) {
  EXPECT_NO_THROW(Pinhole(10, 50, 50).Validate());
  EXPECT_THROW(Pinhole(-1, 50, 50).Validate(), Error);
  EXPECT_THROW(Pinhole(10, 150, 50).Validate(), Error);
  const auto s = Pinhole(100, 48, 32, 96, 64).Scaled(4);
  EXPECT_EQ(s.width, 24);
  EXPECT_EQ(s.height, 16);
  EXPECT_EQ(s.fx, 25);
  EXPECT_EQ(s.cx, 12);
}

TEST(Undistort, ZeroDistortionIsIdentity) {
  gen::Rng rng(8);
  const auto img = gen::RandomImage(rng);
  auto cam = CameraIntrinsics::FromParams(CameraModel::kSimpleRadial, img.width, img.height,
                                          {30, img.width / 2.0, img.height / 2.0, 0.0});
  const auto out = UndistortImage(img, cam);
  EXPECT_EQ(out.image, img);
  EXPECT_EQ(out.camera.model, CameraModel::kPinhole);
  for (auto v : out.valid) EXPECT_EQ(v, 1);
}

TEST(Undistort, CenterFixedPointAndForwardOracle) {
  const auto cam = CameraIntrinsics::FromParams(CameraModel::kSimpleRadial, 200, 150, {180, 100, 75, -0.08});
  const auto c = UndistortPixel(cam, {100, 75});
  EXPECT_TRUE(c.converged);
  EXPECT_EQ(c.uv, Eigen::Vector2d(100, 75));
  double worst = 0;
  for (double y = 0; y <= 150; y += 7.5) {
    for (double x = 0; x <= 200; x += 10) {
      const Eigen::Vector2d und(x, y);
      // Forward oracle: normalized * (1 + k1 r^2).
      const double nx = (x - 100) / 180, ny = (y - 75) / 180, r2 = nx * nx + ny * ny;
      const Eigen::Vector2d dist(100 + 180 * nx * (1 - 0.08 * r2), 75 + 180 * ny * (1 - 0.08 * r2));
      EXPECT_LT((DistortPixel(cam, und) - dist).norm(), 1e-9);
      const auto back = UndistortPixel(cam, dist);
      ASSERT_TRUE(back.converged);
      EXPECT_LE(back.iterations, 50);
      worst = std::max(worst, (back.uv - und).norm());
    }
  }
  EXPECT_LT(worst, 0.1);
}

TEST(Undistort, ImageResampleAgainstForwardModel) {
  // A smooth ramp image distorted by the forward model is recovered.
  const auto cam = CameraIntrinsics::FromParams(CameraModel::kSimpleRadial, 64, 48, {60, 32, 24, 0.05});
  ImageRGB8 distorted(64, 48);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      const auto u = UndistortPixel(cam, {x + 0.5, y + 0.5}).uv;
      distorted.at(x, y)[0] = std::uint8_t(std::clamp(std::lround(u.x() * 3), 0l, 255l));
      distorted.at(x, y)[1] = std::uint8_t(std::clamp(std::lround(u.y() * 4), 0l, 255l));
    }
  }
  const auto out = UndistortImage(distorted, cam);
  int checked = 0;
  for (int y = 4; y < 44; ++y) {
    for (int x = 4; x < 60; ++x) {
      if (!out.valid[std::size_t(y) * 64 + x]) continue;
      EXPECT_NEAR(out.image.at(x, y)[0], (x + 0.5) * 3, 2.0);
      EXPECT_NEAR(out.image.at(x, y)[1], (y + 0.5) * 4, 2.0);
      ++checked;
    }
  }
  EXPECT_GT(checked, 1500);
}
