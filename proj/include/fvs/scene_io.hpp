#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fvs/geometry.hpp"
#include "fvs/image.hpp"

namespace fvs {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

struct Point2D {
  double x = 0;
  double y = 0;
  std::int64_t point3d_id = -1;
  bool operator==(const Point2D&) const = default;
};

struct ImageRecord {
  int image_id = 0;
  std::string name;
  int camera_id = 0;
  Pose pose;
  // Quaternion exactly as stored on disk (w, x, y, z); pose.rotation is the
  // normalized interpretation.
  std::array<double, 4> qvec{1, 0, 0, 0};
  std::vector<Point2D> points2d;
  ImageRGB8 pixels;
};

struct TrackElement {
  std::int32_t image_id = 0;
  std::int32_t point2d_idx = 0;
  bool operator==(const TrackElement&) const = default;
};

struct SparsePoint {
  std::int64_t point_id = 0;
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  std::array<std::uint8_t, 3> rgb{0, 0, 0};
  double error = 0;
  std::vector<TrackElement> track;
  bool operator==(const SparsePoint&) const = default;
};

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<std::int32_t, 3>> faces;
  // Either empty or one RGB triple per vertex.
  std::vector<std::array<std::uint8_t, 3>> colors;

  bool has_colors() const { return !colors.empty(); }
  // Index range, degenerate faces, finite coordinates, color count.
  void Validate() const;
  bool operator==(const TriangleMesh&) const = default;
};

using CameraMap = std::map<int, CameraIntrinsics>;

struct SceneBundle {
  std::vector<ImageRecord> images;
  CameraMap cameras;
  TriangleMesh mesh;
  std::vector<SparsePoint> sparse_points;

  // Referential integrity: camera references, unique ids, mesh indices and
  // pixel buffer sizes matching their cameras.
  void Validate() const;
  const ImageRecord& image_by_id(int image_id) const;
  const CameraIntrinsics& camera_of(const ImageRecord& image) const;
};

// Binary layouts are little-endian. All decoders throw fvs::Error with
// MalformedFile (and the failing byte offset) on truncated or inconsistent
// input.
CameraMap DecodeCamerasBinary(ByteView bytes);
Bytes EncodeCamerasBinary(const CameraMap& cameras);
CameraMap DecodeCamerasText(const std::string& text);
std::string EncodeCamerasText(const CameraMap& cameras);

std::vector<ImageRecord> DecodeImagesBinary(ByteView bytes);
Bytes EncodeImagesBinary(const std::vector<ImageRecord>& images);
std::vector<ImageRecord> DecodeImagesText(const std::string& text);
std::string EncodeImagesText(const std::vector<ImageRecord>& images);

std::vector<SparsePoint> DecodePoints3DBinary(ByteView bytes);
Bytes EncodePoints3DBinary(const std::vector<SparsePoint>& points);
std::vector<SparsePoint> DecodePoints3DText(const std::string& text);
std::string EncodePoints3DText(const std::vector<SparsePoint>& points);

// Path-based entry points pick the text parser for ".txt" and binary otherwise.
CameraMap ReadColmapCameras(const std::filesystem::path& path);
void WriteColmapCameras(const CameraMap& cameras, const std::filesystem::path& path);
std::vector<ImageRecord> ReadColmapImages(const std::filesystem::path& path);
void WriteColmapImages(const std::vector<ImageRecord>& images, const std::filesystem::path& path);
std::vector<SparsePoint> ReadColmapPoints3D(const std::filesystem::path& path);
void WriteColmapPoints3D(const std::vector<SparsePoint>& points,
                         const std::filesystem::path& path);

// Pose from an on-disk quaternion (renormalized when within 1e-6 of unit
// length, MalformedFile otherwise) and translation.
Pose PoseFromColmap(const std::array<double, 4>& qvec, const Eigen::Vector3d& tvec);

enum class PlyFormat { kAscii, kBinaryLittleEndian };

TriangleMesh DecodePly(ByteView bytes);
Bytes EncodePly(const TriangleMesh& mesh, PlyFormat format = PlyFormat::kBinaryLittleEndian);
TriangleMesh ReadPlyMesh(const std::filesystem::path& path);
void WritePlyMesh(const TriangleMesh& mesh, const std::filesystem::path& path,
                  PlyFormat format = PlyFormat::kBinaryLittleEndian);

ImageRGB8 DecodePpm(ByteView bytes);
Bytes EncodePpm(const ImageRGB8& image);
ImageRGB8 ReadImage(const std::filesystem::path& path);
void WriteImage(const ImageRGB8& image, const std::filesystem::path& path);

// Grayscale PFM. Rows are stored bottom-to-top; a negative scale marks
// little-endian data. NaN on disk encodes an invalid pixel.
DepthMap DecodePfm(ByteView bytes);
Bytes EncodePfm(const DepthMap& depth);
// Single-channel float plane written as PFM (no validity semantics).
Bytes EncodePfmPlane(int width, int height, std::span<const float> values);
DepthMap ReadPfm(const std::filesystem::path& path);
void WritePfm(const DepthMap& depth, const std::filesystem::path& path);

Bytes ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, ByteView bytes);

// Scene directory layout:
//   <dir>/sparse/{cameras,images,points3D}.bin (or .txt)
//   <dir>/mesh.ply
//   <dir>/images/<image name>
SceneBundle ReadSceneBundle(const std::filesystem::path& dir);
void WriteSceneBundle(const SceneBundle& scene, const std::filesystem::path& dir);

}  // namespace fvs
