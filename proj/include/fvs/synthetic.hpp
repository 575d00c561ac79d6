#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fvs/evaluation.hpp"
#include "fvs/image.hpp"
#include "fvs/scene_io.hpp"

namespace fvs {

struct SyntheticSpec {
  std::string primitive = "cube";   // "cube" or "icosphere"
  std::string coloring = "checker";  // "checker" or "vertex"
  int subdivisions = 4;
  int views = 24;
  std::string layout = "orbit";  // "orbit" or "hemisphere"
  double radius = 3.0;
  double elevation_deg = 25.0;
  double fov_deg = 45.0;
  int width = 192;
  int height = 128;
  double jitter_sigma = 0.0;
  double deletion_rate = 0.0;
  std::array<std::uint8_t, 3> background{64, 64, 64};
  int withheld_views = 0;  // extra targets on an offset path, not part of the sources
  std::uint64_t seed = 7;

  void Validate() const;
  nlohmann::json ToJson() const;
  static SyntheticSpec FromJson(const nlohmann::json& j);
};

struct SyntheticScene {
  SyntheticSpec spec;
  SceneBundle bundle;            // proxy mesh, images rendered from the exact mesh
  TriangleMesh exact_mesh;
  std::vector<ImageRGB8> truth;  // ground-truth renders, one per bundle image
  std::vector<DepthMap> depths;  // proxy depth per bundle image
  std::vector<TrajectoryEntry> withheld;
  std::vector<ImageRGB8> withheld_truth;
};

SyntheticScene GenerateSyntheticScene(const SyntheticSpec& spec);

// Scene bundle layout plus depth/<image>.pfm, exact_mesh.ply, spec.json and,
// when targets were withheld, trajectory.json with withheld/<n>.ppm.
void WriteSyntheticScene(const SyntheticScene& scene, const std::filesystem::path& dir);

}  // namespace fvs
