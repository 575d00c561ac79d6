#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "fvs/geometry.hpp"
#include "fvs/image.hpp"
#include "fvs/scene_io.hpp"

namespace fvs {

struct RasterOptions {
  double near = 0.01;
  double far = std::numeric_limits<double>::infinity();
  int threads = 1;
};

// Z-buffer rendering of camera-frame depth. Each pixel center takes the
// minimum z over covering triangles (top-left fill rule on shared edges, lower
// face index on exact ties). Triangles are clipped at the near plane, no
// backface culling. Uncovered pixels, or pixels only covered beyond `far`, are
// invalid.
DepthMap RenderDepth(const TriangleMesh& mesh, const CameraIntrinsics& camera, const Pose& pose,
                     const RasterOptions& options = {});

struct ColorRender {
  ImageRGB8 image;
  std::vector<std::uint8_t> valid;
  DepthMap depth;
};

// Perspective-correct interpolation of vertex colors at the z-buffer winner.
// Uncovered pixels take `background`.
ColorRender RenderColor(const TriangleMesh& mesh, const CameraIntrinsics& camera, const Pose& pose,
                        const RasterOptions& options = {},
                        std::array<std::uint8_t, 3> background = {0, 0, 0});

}  // namespace fvs
