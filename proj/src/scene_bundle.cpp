#include <cmath>
#include <set>

#include "fvs/error.hpp"
#include "fvs/scene_io.hpp"

namespace fvs {

void TriangleMesh::Validate() const {
  for (const auto& v : vertices) {
    if (!v.allFinite()) Fail(ErrorCode::kMalformedFile, "non-finite vertex coordinate");
  }
  const auto n = std::int64_t(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    for (auto idx : face) {
      if (idx < 0 || idx >= n) {
        Fail(ErrorCode::kMalformedFile, "face " + std::to_string(f) + " index out of range");
      }
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      Fail(ErrorCode::kMalformedFile, "degenerate face " + std::to_string(f));
    }
  }
  if (!colors.empty() && colors.size() != vertices.size()) {
    Fail(ErrorCode::kMalformedFile, "vertex color count mismatch");
  }
}

void SceneBundle::Validate() const {
  std::set<int> ids;
  for (const auto& image : images) {
    if (!ids.insert(image.image_id).second) {
      Fail(ErrorCode::kDuplicateId, "image id " + std::to_string(image.image_id));
    }
    const auto it = cameras.find(image.camera_id);
    if (it == cameras.end()) {
      Fail(ErrorCode::kMissingReference,
           "image " + std::to_string(image.image_id) + " references unknown camera " +
               std::to_string(image.camera_id));
    }
    if (!image.pixels.pixels.empty() &&
        (image.pixels.width != it->second.width || image.pixels.height != it->second.height)) {
      Fail(ErrorCode::kShapeError, "image " + image.name + " size does not match its camera");
    }
  }
  std::set<std::int64_t> point_ids;
  for (const auto& p : sparse_points) {
    if (!point_ids.insert(p.point_id).second) {
      Fail(ErrorCode::kDuplicateId, "point id " + std::to_string(p.point_id));
    }
  }
  mesh.Validate();
}

const ImageRecord& SceneBundle::image_by_id(int image_id) const {
  for (const auto& image : images) {
    if (image.image_id == image_id) return image;
  }
  Fail(ErrorCode::kMissingReference, "no image with id " + std::to_string(image_id));
}

const CameraIntrinsics& SceneBundle::camera_of(const ImageRecord& image) const {
  const auto it = cameras.find(image.camera_id);
  if (it == cameras.end()) {
    Fail(ErrorCode::kMissingReference, "unknown camera " + std::to_string(image.camera_id));
  }
  return it->second;
}

namespace {

std::filesystem::path Pick(const std::filesystem::path& dir, const std::string& stem) {
  const auto bin = dir / (stem + ".bin");
  if (std::filesystem::exists(bin)) return bin;
  const auto txt = dir / (stem + ".txt");
  if (std::filesystem::exists(txt)) return txt;
  Fail(ErrorCode::kIoError, "missing " + bin.string());
}

}  // namespace

SceneBundle ReadSceneBundle(const std::filesystem::path& dir) {
  SceneBundle scene;
  const auto sparse = dir / "sparse";
  scene.cameras = ReadColmapCameras(Pick(sparse, "cameras"));
  scene.images = ReadColmapImages(Pick(sparse, "images"));
  scene.sparse_points = ReadColmapPoints3D(Pick(sparse, "points3D"));
  scene.mesh = ReadPlyMesh(dir / "mesh.ply");
  for (auto& image : scene.images) {
    const auto path = dir / "images" / image.name;
    if (std::filesystem::exists(path)) image.pixels = ReadImage(path);
  }
  scene.Validate();
  return scene;
}

void WriteSceneBundle(const SceneBundle& scene, const std::filesystem::path& dir) {
  scene.Validate();
  const auto sparse = dir / "sparse";
  std::filesystem::create_directories(sparse);
  WriteColmapCameras(scene.cameras, sparse / "cameras.bin");
  WriteColmapImages(scene.images, sparse / "images.bin");
  WriteColmapPoints3D(scene.sparse_points, sparse / "points3D.bin");
  WritePlyMesh(scene.mesh, dir / "mesh.ply");
  for (const auto& image : scene.images) {
    if (image.pixels.pixels.empty()) continue;
    const auto path = dir / "images" / image.name;
    std::filesystem::create_directories(path.parent_path());
    WriteImage(image.pixels, path);
  }
}

}  // namespace fvs
