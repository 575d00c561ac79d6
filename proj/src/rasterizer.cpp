#include "fvs/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "fvs/parallel.hpp"

namespace fvs {

namespace {

struct ClipVertex {
  Eigen::Vector3d cam;
  Eigen::Vector3d bary;  // weights of the original triangle's vertices
};

struct ScreenVertex {
  double x, y, inv_z;
  Eigen::Vector3d bary_over_z;
};

// Per-pixel winner record.
struct Fragment {
  double z = std::numeric_limits<double>::infinity();
  Eigen::Vector3d bary = Eigen::Vector3d::Zero();
  std::int32_t face = -1;
};

int ClipNear(const std::array<ClipVertex, 3>& tri, double near, std::array<ClipVertex, 4>& out) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = tri[i];
    const ClipVertex& b = tri[(i + 1) % 3];
    const bool a_in = a.cam.z() >= near;
    const bool b_in = b.cam.z() >= near;
    if (a_in) out[n++] = a;
    if (a_in != b_in) {
      const double t = (near - a.cam.z()) / (b.cam.z() - a.cam.z());
      ClipVertex v;
      v.cam = a.cam + t * (b.cam - a.cam);
      v.cam.z() = near;
      v.bary = a.bary + t * (b.bary - a.bary);
      out[n++] = v;
    }
  }
  return n;
}

inline double Edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

// With interior on the positive side, an edge owns the pixels lying exactly
// on it when it is a top edge (horizontal, pointing +x) or a left edge
// (pointing -y in the y-down image frame).
inline bool IsTopLeft(const ScreenVertex& a, const ScreenVertex& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  return dy < 0 || (dy == 0 && dx > 0);
}

inline bool Inside(double w, bool top_left) { return w > 0 || (w == 0 && top_left); }

void RasterizeTriangle(ScreenVertex v0, ScreenVertex v1, ScreenVertex v2, std::int32_t face,
                       const CameraIntrinsics& camera, double far, int row_begin, int row_end,
                       std::vector<Fragment>& frags) {
  double area = Edge(v0, v1, v2.x, v2.y);
  if (area == 0 || !std::isfinite(area)) return;
  if (area < 0) {
    std::swap(v1, v2);
    area = -area;
  }
  const double min_x = std::min({v0.x, v1.x, v2.x});
  const double max_x = std::max({v0.x, v1.x, v2.x});
  const double min_y = std::min({v0.y, v1.y, v2.y});
  const double max_y = std::max({v0.y, v1.y, v2.y});
  const int x_begin = std::max(0, int(std::ceil(min_x - 0.5)));
  const int x_end = std::min(camera.width - 1, int(std::floor(max_x - 0.5)));
  const int y_begin = std::max(row_begin, int(std::ceil(min_y - 0.5)));
  const int y_end = std::min(row_end - 1, int(std::floor(max_y - 0.5)));
  if (x_begin > x_end || y_begin > y_end) return;
  const bool tl0 = IsTopLeft(v1, v2);
  const bool tl1 = IsTopLeft(v2, v0);
  const bool tl2 = IsTopLeft(v0, v1);
  for (int y = y_begin; y <= y_end; ++y) {
    const double py = y + 0.5;
    for (int x = x_begin; x <= x_end; ++x) {
      const double px = x + 0.5;
      const double w0 = Edge(v1, v2, px, py);
      const double w1 = Edge(v2, v0, px, py);
      const double w2 = Edge(v0, v1, px, py);
      if (!Inside(w0, tl0) || !Inside(w1, tl1) || !Inside(w2, tl2)) continue;
      const double l0 = w0 / area, l1 = w1 / area, l2 = w2 / area;
      const double inv_z = l0 * v0.inv_z + l1 * v1.inv_z + l2 * v2.inv_z;
      if (!(inv_z > 0)) continue;
      const double z = 1.0 / inv_z;
      if (z > far) continue;
      Fragment& f = frags[std::size_t(y - row_begin) * camera.width + x];
      if (z < f.z) {
        f.z = z;
        f.face = face;
        f.bary = (l0 * v0.bary_over_z + l1 * v1.bary_over_z + l2 * v2.bary_over_z) * z;
      }
    }
  }
}

void RasterizeBand(const TriangleMesh& mesh, const CameraIntrinsics& camera, const Pose& pose,
                   const RasterOptions& options, int row_begin, int row_end,
                   std::vector<Fragment>& frags) {
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    std::array<ClipVertex, 3> tri;
    for (int k = 0; k < 3; ++k) {
      tri[k].cam = pose.Apply(mesh.vertices[face[k]]);
      tri[k].bary = Eigen::Vector3d::Zero();
      tri[k].bary[k] = 1.0;
    }
    std::array<ClipVertex, 4> poly;
    const int n = ClipNear(tri, options.near, poly);
    if (n < 3) continue;
    std::array<ScreenVertex, 4> screen;
    for (int k = 0; k < n; ++k) {
      const auto& c = poly[k].cam;
      ScreenVertex& s = screen[k];
      s.inv_z = 1.0 / c.z();
      s.x = camera.fx * c.x() * s.inv_z + camera.cx;
      s.y = camera.fy * c.y() * s.inv_z + camera.cy;
      s.bary_over_z = poly[k].bary * s.inv_z;
    }
    for (int k = 1; k + 1 < n; ++k) {
      RasterizeTriangle(screen[0], screen[k], screen[k + 1], std::int32_t(f), camera, options.far,
                        row_begin, row_end, frags);
    }
  }
}

std::vector<Fragment> Rasterize(const TriangleMesh& mesh, const CameraIntrinsics& camera,
                                const Pose& pose, const RasterOptions& options) {
  std::vector<Fragment> frags(std::size_t(camera.width) * camera.height);
  const int bands = std::max(1, std::min(options.threads, camera.height));
  const int rows_per_band = (camera.height + bands - 1) / bands;
  ParallelFor(0, bands, options.threads, [&](int b0, int b1) {
    for (int b = b0; b < b1; ++b) {
      const int r0 = b * rows_per_band;
      const int r1 = std::min(camera.height, r0 + rows_per_band);
      if (r0 >= r1) continue;
      std::vector<Fragment> band(std::size_t(r1 - r0) * camera.width);
      RasterizeBand(mesh, camera, pose, options, r0, r1, band);
      std::copy(band.begin(), band.end(), frags.begin() + std::ptrdiff_t(r0) * camera.width);
    }
  });
  return frags;
}

DepthMap ToDepth(const std::vector<Fragment>& frags, const CameraIntrinsics& camera) {
  DepthMap depth(camera.width, camera.height);
  for (std::size_t i = 0; i < frags.size(); ++i) {
    if (frags[i].face >= 0) {
      depth.depth[i] = float(frags[i].z);
      depth.valid[i] = 1;
    }
  }
  return depth;
}

}  // namespace

DepthMap RenderDepth(const TriangleMesh& mesh, const CameraIntrinsics& camera, const Pose& pose,
                     const RasterOptions& options) {
  return ToDepth(Rasterize(mesh, camera, pose, options), camera);
}

ColorRender RenderColor(const TriangleMesh& mesh, const CameraIntrinsics& camera, const Pose& pose,
                        const RasterOptions& options, std::array<std::uint8_t, 3> background) {
  const auto frags = Rasterize(mesh, camera, pose, options);
  ColorRender out;
  out.image = ImageRGB8(camera.width, camera.height);
  out.valid.assign(frags.size(), 0);
  out.depth = ToDepth(frags, camera);
  for (std::size_t i = 0; i < frags.size(); ++i) {
    std::uint8_t* px = &out.image.pixels[i * 3];
    const Fragment& f = frags[i];
    if (f.face < 0) {
      std::copy(background.begin(), background.end(), px);
      continue;
    }
    out.valid[i] = 1;
    const auto& face = mesh.faces[std::size_t(f.face)];
    for (int c = 0; c < 3; ++c) {
      double v = 0;
      for (int k = 0; k < 3; ++k) {
        const double vc = mesh.has_colors() ? mesh.colors[std::size_t(face[k])][c] : 255.0;
        v += f.bary[k] * vc;
      }
      px[c] = std::uint8_t(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

}  // namespace fvs
