#pragma once

// Random instance generators for property tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fvs/geometry.hpp"
#include "fvs/image.hpp"
#include "fvs/scene_io.hpp"

namespace gen {

using Rng = std::mt19937_64;

inline double Uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int Int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::array<double, 4> UnitQuaternion(Rng& rng) {
  std::normal_distribution<double> n;
  std::array<double, 4> q;
  double s = 0;
  do {
    s = 0;
    for (auto& v : q) {
      v = n(rng);
      s += v * v;
    }
  } while (s < 1e-6);
  const double norm = std::sqrt(s);
  for (auto& v : q) v /= norm;
  if (q[0] < 0)
    for (auto& v : q) v = -v;
  return q;
}

inline fvs::Pose RandomPose(Rng& rng, double t_range = 2.0) {
  fvs::Pose p;
  p.rotation = fvs::QuaternionToRotation(UnitQuaternion(rng));
  p.translation = {Uniform(rng, -t_range, t_range), Uniform(rng, -t_range, t_range), Uniform(rng, -t_range, t_range)};
  return p;
}

inline fvs::CameraIntrinsics RandomPinhole(Rng& rng, int w = 0, int h = 0) {
  fvs::CameraIntrinsics c;
  c.model = fvs::CameraModel::kPinhole;
  c.width = w ? w : Int(rng, 8, 640);
  c.height = h ? h : Int(rng, 8, 480);
  c.fx = Uniform(rng, 0.5, 1.5) * c.width;
  c.fy = c.fx * Uniform(rng, 0.9, 1.1);
  c.cx = c.width * Uniform(rng, 0.4, 0.6);
  c.cy = c.height * Uniform(rng, 0.4, 0.6);
  return c;
}

inline fvs::CameraMap RandomCameras(Rng& rng) {
  fvs::CameraMap m;
  const int n = Int(rng, 0, 6);
  for (int i = 0; i < n; ++i) {
    const int id = Int(rng, 1, 1000000);
    const auto model = static_cast<fvs::CameraModel>(Int(rng, 0, 2));
    const int w = Int(rng, 1, 5000), h = Int(rng, 1, 5000);
    std::vector<double> params;
    for (int k = 0; k < fvs::CameraModelParamCount(model); ++k) params.push_back(Uniform(rng, -1e3, 1e3));
    params[0] = Uniform(rng, 1, 5000);
    if (model == fvs::CameraModel::kPinhole) params[1] = Uniform(rng, 1, 5000);
    m[id] = fvs::CameraIntrinsics::FromParams(model, w, h, params);
  }
  return m;
}

inline std::string RandomName(Rng& rng) {
  static const char kChars[] = "abcdefghijklmnopqrstuvwxyz0123456789_-";
  std::string s;
  const int n = Int(rng, 1, 24);
  for (int i = 0; i < n; ++i) s += kChars[Int(rng, 0, int(sizeof(kChars)) - 2)];
  return s + ".ppm";
}

inline std::vector<fvs::ImageRecord> RandomImages(Rng& rng) {
  std::vector<fvs::ImageRecord> out;
  const int n = Int(rng, 0, 5);
  for (int i = 0; i < n; ++i) {
    fvs::ImageRecord r;
    r.image_id = i * 7 + Int(rng, 1, 6);
    r.name = RandomName(rng);
    r.camera_id = Int(rng, 1, 100);
    r.qvec = UnitQuaternion(rng);
    r.pose = fvs::PoseFromColmap(r.qvec, Eigen::Vector3d(Uniform(rng, -10, 10), Uniform(rng, -10, 10),
                                                         Uniform(rng, -10, 10)));
    const int np = Int(rng, 0, 8);
    for (int k = 0; k < np; ++k)
      r.points2d.push_back({Uniform(rng, 0, 4000), Uniform(rng, 0, 3000), Int(rng, 0, 3) ? Int(rng, 1, 1 << 30) : -1});
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<fvs::SparsePoint> RandomPoints(Rng& rng) {
  std::vector<fvs::SparsePoint> out;
  const int n = Int(rng, 0, 10);
  for (int i = 0; i < n; ++i) {
    fvs::SparsePoint p;
    p.point_id = std::int64_t(i) * 3 + Int(rng, 1, 2);
    p.xyz = {Uniform(rng, -100, 100), Uniform(rng, -100, 100), Uniform(rng, -100, 100)};
    p.rgb = {std::uint8_t(Int(rng, 0, 255)), std::uint8_t(Int(rng, 0, 255)), std::uint8_t(Int(rng, 0, 255))};
    p.error = Uniform(rng, 0, 3);
    const int t = Int(rng, 0, 6);
    for (int k = 0; k < t; ++k) p.track.push_back({Int(rng, 1, 500), Int(rng, 0, 2000)});
    out.push_back(std::move(p));
  }
  return out;
}

inline fvs::TriangleMesh RandomMesh(Rng& rng, int max_faces = 50, bool colors = true, double extent = 1.0) {
  fvs::TriangleMesh m;
  const int nv = Int(rng, 3, 3 * max_faces);
  for (int i = 0; i < nv; ++i)
    m.vertices.push_back({Uniform(rng, -extent, extent), Uniform(rng, -extent, extent), Uniform(rng, -extent, extent)});
  const int nf = Int(rng, 1, max_faces);
  for (int i = 0; i < nf; ++i) {
    int a = Int(rng, 0, nv - 1), b, c;
    do b = Int(rng, 0, nv - 1); while (b == a);
    do c = Int(rng, 0, nv - 1); while (c == a || c == b);
    m.faces.push_back({a, b, c});
  }
  if (colors)
    for (int i = 0; i < nv; ++i)
      m.colors.push_back({std::uint8_t(Int(rng, 0, 255)), std::uint8_t(Int(rng, 0, 255)), std::uint8_t(Int(rng, 0, 255))});
  return m;
}

inline fvs::ImageRGB8 RandomImage(Rng& rng, int max_side = 40) {
  fvs::ImageRGB8 img(Int(rng, 1, max_side), Int(rng, 1, max_side));
  for (auto& v : img.pixels) v = std::uint8_t(Int(rng, 0, 255));
  return img;
}

inline fvs::DepthMap RandomDepth(Rng& rng, int max_side = 40) {
  fvs::DepthMap d(Int(rng, 1, max_side), Int(rng, 1, max_side));
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    if (Int(rng, 0, 4)) {
      d.depth[i] = float(Uniform(rng, 1e-3, 1e3));
      d.valid[i] = 1;
    }
  }
  return d;
}

}  // namespace gen
