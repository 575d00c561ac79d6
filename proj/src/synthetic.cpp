#include "fvs/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

#include "fvs/error.hpp"
#include "fvs/model.hpp"
#include "fvs/rasterizer.hpp"

namespace fvs {

namespace {

using Color = std::array<std::uint8_t, 3>;

template <typename T>
T Get(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

double Gaussian(std::uint64_t& rng) {
  const double u1 = 1.0 - UniformDraw(rng);
  const double u2 = UniformDraw(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Color Shade(const Color& base, double f) {
  Color c;
  for (int i = 0; i < 3; ++i) c[i] = std::uint8_t(std::lround(std::clamp(base[i] * f, 0.0, 255.0)));
  return c;
}

void AddQuad(TriangleMesh& mesh, const std::array<Eigen::Vector3d, 4>& corners, const Color& color) {
  const auto base = std::int32_t(mesh.vertices.size());
  for (const auto& c : corners) {
    mesh.vertices.push_back(c);
    mesh.colors.push_back(color);
  }
  mesh.faces.push_back({base, base + 1, base + 2});
  mesh.faces.push_back({base, base + 2, base + 3});
}

TriangleMesh MakeCube(const SyntheticSpec& spec, std::uint64_t& rng) {
  static const Color kFaceColors[6] = {{220, 60, 50},  {60, 180, 75},  {50, 90, 220},
                                       {235, 200, 40}, {200, 70, 200}, {40, 200, 210}};
  TriangleMesh mesh;
  const int n = spec.subdivisions;
  for (int face = 0; face < 6; ++face) {
    const int axis = face / 2;
    const double sign = face % 2 ? 1.0 : -1.0;
    const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        auto corner = [&](int di, int dj) {
          Eigen::Vector3d p;
          p[axis] = 0.5 * sign;
          p[ua] = -0.5 + double(i + di) / n;
          p[va] = -0.5 + double(j + dj) / n;
          return p;
        };
        Color color;
        if (spec.coloring == "checker") {
          const double f = ((i + j) % 2 ? 1.0 : 0.45) * (0.85 + 0.3 * UniformDraw(rng));
          color = Shade(kFaceColors[face], f);
        } else {
          const Eigen::Vector3d c = corner(0, 0) + Eigen::Vector3d::Constant(0.5);
          color = {std::uint8_t(std::lround(40 + 200 * c.x())), std::uint8_t(std::lround(40 + 200 * c.y())),
                   std::uint8_t(std::lround(40 + 200 * c.z()))};
        }
        std::array<Eigen::Vector3d, 4> q = {corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)};
        AddQuad(mesh, q, color);
      }
    }
  }
  return mesh;
}

TriangleMesh MakeIcosphere(const SyntheticSpec& spec, std::uint64_t& rng) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                    {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& p : v) p.normalize();
  for (int level = 0; level < std::min(spec.subdivisions, 4); ++level) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      return mid[key] = int(v.size()) - 1;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  TriangleMesh mesh;
  const double r = 0.6;
  if (spec.coloring == "checker") {
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Eigen::Vector3d n = (v[f[i][0]] + v[f[i][1]] + v[f[i][2]]).normalized();
      const Color base = {std::uint8_t(std::lround(127 + 110 * n.x())), std::uint8_t(std::lround(127 + 110 * n.y())),
                          std::uint8_t(std::lround(127 + 110 * n.z()))};
      const Color c = Shade(base, (i % 2 ? 1.0 : 0.5) * (0.85 + 0.3 * UniformDraw(rng)));
      const auto b = std::int32_t(mesh.vertices.size());
      for (int k = 0; k < 3; ++k) {
        mesh.vertices.push_back(r * v[f[i][k]]);
        mesh.colors.push_back(c);
      }
      mesh.faces.push_back({b, b + 1, b + 2});
    }
  } else {
    for (const auto& p : v) {
      mesh.vertices.push_back(r * p);
      mesh.colors.push_back({std::uint8_t(std::lround(127 + 110 * p.x())), std::uint8_t(std::lround(127 + 110 * p.y())),
                             std::uint8_t(std::lround(127 + 110 * p.z()))});
    }
    for (const auto& tri : f) mesh.faces.push_back({tri[0], tri[1], tri[2]});
  }
  return mesh;
}

// Degrades the exact mesh into a proxy: per-position jitter (shared by
// coincident vertices) and random face deletion.
TriangleMesh MakeProxy(const TriangleMesh& exact, const SyntheticSpec& spec, std::uint64_t& rng) {
  TriangleMesh proxy = exact;
  if (spec.jitter_sigma > 0) {
    std::map<std::array<long long, 3>, Eigen::Vector3d> offsets;
    for (auto& p : proxy.vertices) {
      const std::array<long long, 3> key = {std::llround(p.x() * 1e9), std::llround(p.y() * 1e9),
                                            std::llround(p.z() * 1e9)};
      auto it = offsets.find(key);
      if (it == offsets.end()) {
        const Eigen::Vector3d d(Gaussian(rng), Gaussian(rng), Gaussian(rng));
        it = offsets.emplace(key, spec.jitter_sigma * d).first;
      }
      p += it->second;
    }
  }
  if (spec.deletion_rate > 0) {
    std::vector<std::array<std::int32_t, 3>> kept;
    for (const auto& face : proxy.faces)
      if (UniformDraw(rng) >= spec.deletion_rate) kept.push_back(face);
    proxy.faces = std::move(kept);
  }
  return proxy;
}

CameraIntrinsics SpecCamera(const SyntheticSpec& spec) {
  const double fx = 0.5 * spec.width / std::tan(0.5 * spec.fov_deg * std::numbers::pi / 180.0);
  return CameraIntrinsics::FromParams(CameraModel::kPinhole, spec.width, spec.height,
                                      {fx, fx, 0.5 * spec.width, 0.5 * spec.height});
}

// Rotation as it reads back from disk, so in-memory and re-parsed scenes agree.
Pose StoredPose(const Pose& pose, std::array<double, 4>& qvec) {
  qvec = RotationToQuaternion(pose.rotation);
  return PoseFromColmap(qvec, pose.translation);
}

Pose OrbitPose(double radius, double azimuth, double elevation) {
  const Eigen::Vector3d eye(radius * std::cos(elevation) * std::cos(azimuth),
                            radius * std::cos(elevation) * std::sin(azimuth), radius * std::sin(elevation));
  return Pose::LookAt(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ());
}

std::string IndexedName(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03d.ppm", prefix, i);
  return buf;
}

}  // namespace

void SyntheticSpec::Validate() const {
  if (primitive != "cube" && primitive != "icosphere")
    Fail(ErrorCode::kUsageError, "primitive must be cube or icosphere");
  if (coloring != "checker" && coloring != "vertex") Fail(ErrorCode::kUsageError, "coloring must be checker or vertex");
  if (layout != "orbit" && layout != "hemisphere") Fail(ErrorCode::kUsageError, "layout must be orbit or hemisphere");
  if (subdivisions < 1 || views < 1 || width < 1 || height < 1 || withheld_views < 0)
    Fail(ErrorCode::kUsageError, "synthetic spec sizes must be positive");
  if (!(radius > 1.0) || !(fov_deg > 0 && fov_deg < 180))
    Fail(ErrorCode::kUsageError, "synthetic spec radius/fov out of range");
  if (!(jitter_sigma >= 0) || !(deletion_rate >= 0 && deletion_rate < 1))
    Fail(ErrorCode::kUsageError, "synthetic spec noise options out of range");
}

nlohmann::json SyntheticSpec::ToJson() const {
  return {{"primitive", primitive},     {"coloring", coloring},
          {"subdivisions", subdivisions}, {"views", views},
          {"layout", layout},             {"radius", radius},
          {"elevation_deg", elevation_deg}, {"fov_deg", fov_deg},
          {"width", width},               {"height", height},
          {"jitter_sigma", jitter_sigma}, {"deletion_rate", deletion_rate},
          {"background", background},     {"withheld_views", withheld_views},
          {"seed", seed}};
}

SyntheticSpec SyntheticSpec::FromJson(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    s.primitive = Get(j, "primitive", s.primitive);
    s.coloring = Get(j, "coloring", s.coloring);
    s.subdivisions = Get(j, "subdivisions", s.subdivisions);
    s.views = Get(j, "views", s.views);
    s.layout = Get(j, "layout", s.layout);
    s.radius = Get(j, "radius", s.radius);
    s.elevation_deg = Get(j, "elevation_deg", s.elevation_deg);
    s.fov_deg = Get(j, "fov_deg", s.fov_deg);
    s.width = Get(j, "width", s.width);
    s.height = Get(j, "height", s.height);
    s.jitter_sigma = Get(j, "jitter_sigma", s.jitter_sigma);
    s.deletion_rate = Get(j, "deletion_rate", s.deletion_rate);
    s.background = Get(j, "background", s.background);
    s.withheld_views = Get(j, "withheld_views", s.withheld_views);
    s.seed = Get(j, "seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kUsageError, std::string("bad synthetic spec: ") + e.what());
  }
  s.Validate();
  return s;
}

SyntheticScene GenerateSyntheticScene(const SyntheticSpec& spec) {
  spec.Validate();
  SyntheticScene out;
  out.spec = spec;
  std::uint64_t rng = spec.seed;
  out.exact_mesh = spec.primitive == "cube" ? MakeCube(spec, rng) : MakeIcosphere(spec, rng);
  std::uint64_t noise_rng = spec.seed ^ 0xa0761d6478bd642full;
  out.bundle.mesh = MakeProxy(out.exact_mesh, spec, noise_rng);

  const CameraIntrinsics camera = SpecCamera(spec);
  out.bundle.cameras[1] = camera;
  const double el = spec.elevation_deg * std::numbers::pi / 180.0;
  for (int i = 0; i < spec.views; ++i) {
    ImageRecord rec;
    rec.image_id = i + 1;
    rec.camera_id = 1;
    rec.name = IndexedName("view", i);
    Pose pose;
    if (spec.layout == "orbit") {
      const double az = 2.0 * std::numbers::pi * i / spec.views;
      pose = OrbitPose(spec.radius, az, el + 0.15 * std::sin(2.0 * az));
    } else {
      const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
      const double h = (i + 0.5) / spec.views;
      const double elevation = (10.0 + 60.0 * h) * std::numbers::pi / 180.0;
      pose = OrbitPose(spec.radius, golden * i, elevation);
    }
    rec.pose = StoredPose(pose, rec.qvec);
    rec.pixels = RenderColor(out.exact_mesh, camera, rec.pose, {}, spec.background).image;
    out.truth.push_back(rec.pixels);
    out.depths.push_back(RenderDepth(out.bundle.mesh, camera, rec.pose));
    out.bundle.images.push_back(std::move(rec));
  }

  // Sparse points: distinct exact-mesh positions with visibility tracks.
  std::vector<DepthMap> exact_depths;
  for (const auto& rec : out.bundle.images) exact_depths.push_back(RenderDepth(out.exact_mesh, camera, rec.pose));
  std::map<std::array<long long, 3>, std::size_t> seen;
  std::int64_t next_id = 1;
  for (std::size_t vi = 0; vi < out.exact_mesh.vertices.size(); ++vi) {
    const Eigen::Vector3d& p = out.exact_mesh.vertices[vi];
    const std::array<long long, 3> key = {std::llround(p.x() * 1e9), std::llround(p.y() * 1e9),
                                          std::llround(p.z() * 1e9)};
    if (!seen.emplace(key, vi).second) continue;
    SparsePoint sp;
    sp.point_id = next_id;
    sp.xyz = p;
    sp.rgb = out.exact_mesh.colors[vi];
    for (std::size_t ii = 0; ii < out.bundle.images.size(); ++ii) {
      auto& rec = out.bundle.images[ii];
      const Projection pr = Project(camera, rec.pose, p);
      if (!(pr.depth > 0)) continue;
      const int x = int(std::floor(pr.uv.x())), y = int(std::floor(pr.uv.y()));
      if (x < 0 || y < 0 || x >= camera.width || y >= camera.height) continue;
      const DepthMap& d = exact_depths[ii];
      if (!d.is_valid(x, y) || pr.depth > d.at(x, y) * 1.01) continue;
      sp.track.push_back({rec.image_id, std::int32_t(rec.points2d.size())});
      rec.points2d.push_back({pr.uv.x(), pr.uv.y(), sp.point_id});
    }
    if (sp.track.empty()) continue;
    ++next_id;
    out.bundle.sparse_points.push_back(std::move(sp));
  }

  for (int j = 0; j < spec.withheld_views; ++j) {
    TrajectoryEntry t;
    const double az = 2.0 * std::numbers::pi * (j + 0.5) / spec.views;
    t.pose = StoredPose(OrbitPose(spec.radius, az, el + 0.2), t.qvec);
    t.camera = camera;
    t.image = "withheld/" + IndexedName("target", j);
    out.withheld_truth.push_back(RenderColor(out.exact_mesh, camera, t.pose, {}, spec.background).image);
    out.withheld.push_back(std::move(t));
  }
  out.bundle.Validate();
  return out;
}

void WriteSyntheticScene(const SyntheticScene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "depth");
  WriteSceneBundle(scene.bundle, dir);
  for (std::size_t i = 0; i < scene.bundle.images.size(); ++i) {
    const std::filesystem::path name(scene.bundle.images[i].name);
    WritePfm(scene.depths[i], dir / "depth" / name.stem().concat(".pfm"));
  }
  WritePlyMesh(scene.exact_mesh, dir / "exact_mesh.ply");
  {
    std::ofstream spec(dir / "spec.json");
    spec << scene.spec.ToJson().dump(2) << "\n";
    if (!spec) Fail(ErrorCode::kIoError, "cannot write spec.json");
  }
  if (!scene.withheld.empty()) {
    std::filesystem::create_directories(dir / "withheld");
    for (std::size_t j = 0; j < scene.withheld.size(); ++j)
      WriteImage(scene.withheld_truth[j], dir / *scene.withheld[j].image);
    WriteTrajectory(scene.withheld, dir / "trajectory.json");
  }
}

}  // namespace fvs
