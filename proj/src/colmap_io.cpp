#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "byte_stream.hpp"
#include "fvs/scene_io.hpp"

namespace fvs {

namespace detail {

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

namespace {

using detail::ByteReader;
using detail::ByteWriter;
using detail::FormatDouble;

Pose PoseFromQvec(const std::array<double, 4>& qvec, const Eigen::Vector3d& t, std::size_t offset) {
  const double norm = std::sqrt(qvec[0] * qvec[0] + qvec[1] * qvec[1] + qvec[2] * qvec[2] +
                                qvec[3] * qvec[3]);
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-6) {
    throw Error(ErrorCode::kMalformedFile, "quaternion is not normalizable", offset);
  }
  std::array<double, 4> q = qvec;
  for (double& c : q) c /= norm;
  Pose pose;
  pose.rotation = QuaternionToRotation(q);
  pose.translation = t;
  return pose;
}

// Strips comments and blank lines; returns the remaining lines in order.
std::vector<std::string> DataLines(const std::string& text, bool keep_blank = false) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') continue;
    if (line.find_first_not_of(" \t") == std::string::npos && !keep_blank) continue;
    lines.push_back(line);
  }
  return lines;
}

template <typename T>
T ParseField(std::istringstream& in, std::size_t line_no) {
  T v;
  if (!(in >> v)) {
    Fail(ErrorCode::kMalformedFile, "bad field on line " + std::to_string(line_no));
  }
  return v;
}

}  // namespace

CameraMap DecodeCamerasBinary(ByteView bytes) {
  ByteReader r(bytes);
  const auto count = r.Read<std::uint64_t>();
  CameraMap cameras;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t record_offset = r.offset();
    const auto camera_id = r.Read<std::int32_t>();
    const auto model_id = r.Read<std::int32_t>();
    const auto model = CameraModelFromId(model_id);
    if (!model) {
      throw Error(ErrorCode::kUnsupportedCameraModel,
                  "camera model id " + std::to_string(model_id), record_offset);
    }
    const auto width = r.Read<std::uint64_t>();
    const auto height = r.Read<std::uint64_t>();
    std::vector<double> params(CameraModelParamCount(*model));
    for (double& p : params) p = r.Read<double>();
    if (width > (1u << 30) || height > (1u << 30)) {
      throw Error(ErrorCode::kMalformedFile, "implausible camera size", record_offset);
    }
    if (cameras.count(camera_id)) {
      throw Error(ErrorCode::kDuplicateId, "camera id " + std::to_string(camera_id), record_offset);
    }
    cameras[camera_id] = CameraIntrinsics::FromParams(*model, int(width), int(height), params);
  }
  if (!r.done()) throw Error(ErrorCode::kMalformedFile, "trailing bytes", r.offset());
  return cameras;
}

Bytes EncodeCamerasBinary(const CameraMap& cameras) {
  ByteWriter w;
  w.Write<std::uint64_t>(cameras.size());
  for (const auto& [id, cam] : cameras) {
    w.Write<std::int32_t>(id);
    w.Write<std::int32_t>(static_cast<int>(cam.model));
    w.Write<std::uint64_t>(std::uint64_t(cam.width));
    w.Write<std::uint64_t>(std::uint64_t(cam.height));
    for (double p : cam.Params()) w.Write<double>(p);
  }
  return w.Take();
}

CameraMap DecodeCamerasText(const std::string& text) {
  CameraMap cameras;
  std::size_t line_no = 0;
  for (const auto& line : DataLines(text)) {
    ++line_no;
    std::istringstream in(line);
    const int id = ParseField<int>(in, line_no);
    const std::string model_name = ParseField<std::string>(in, line_no);
    const auto model = CameraModelFromName(model_name);
    if (!model) Fail(ErrorCode::kUnsupportedCameraModel, "camera model " + model_name);
    const int width = ParseField<int>(in, line_no);
    const int height = ParseField<int>(in, line_no);
    std::vector<double> params(CameraModelParamCount(*model));
    for (double& p : params) p = ParseField<double>(in, line_no);
    if (cameras.count(id)) Fail(ErrorCode::kDuplicateId, "camera id " + std::to_string(id));
    cameras[id] = CameraIntrinsics::FromParams(*model, width, height, params);
  }
  return cameras;
}

std::string EncodeCamerasText(const CameraMap& cameras) {
  std::string out = "# Camera list with one line of data per camera:\n"
                    "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
  for (const auto& [id, cam] : cameras) {
    out += std::to_string(id) + " " + CameraModelName(cam.model) + " " +
           std::to_string(cam.width) + " " + std::to_string(cam.height);
    for (double p : cam.Params()) out += " " + FormatDouble(p);
    out += "\n";
  }
  return out;
}

std::vector<ImageRecord> DecodeImagesBinary(ByteView bytes) {
  ByteReader r(bytes);
  const auto count = r.Read<std::uint64_t>();
  std::vector<ImageRecord> images;
  images.reserve(detail::SafeReserve(count, r.remaining(), 4 + 64 + 4 + 1 + 8));
  std::set<int> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t record_offset = r.offset();
    ImageRecord rec;
    rec.image_id = r.Read<std::int32_t>();
    for (double& q : rec.qvec) q = r.Read<double>();
    Eigen::Vector3d t;
    for (int k = 0; k < 3; ++k) t[k] = r.Read<double>();
    rec.camera_id = r.Read<std::int32_t>();
    rec.name = r.ReadCString();
    const auto num_points = r.Read<std::uint64_t>();
    rec.points2d.reserve(detail::SafeReserve(num_points, r.remaining(), 24));
    for (std::uint64_t p = 0; p < num_points; ++p) {
      Point2D pt;
      pt.x = r.Read<double>();
      pt.y = r.Read<double>();
      pt.point3d_id = r.Read<std::int64_t>();
      rec.points2d.push_back(pt);
    }
    rec.pose = PoseFromQvec(rec.qvec, t, record_offset);
    if (!seen.insert(rec.image_id).second) {
      throw Error(ErrorCode::kDuplicateId, "image id " + std::to_string(rec.image_id),
                  record_offset);
    }
    images.push_back(std::move(rec));
  }
  if (!r.done()) throw Error(ErrorCode::kMalformedFile, "trailing bytes", r.offset());
  return images;
}

Bytes EncodeImagesBinary(const std::vector<ImageRecord>& images) {
  ByteWriter w;
  w.Write<std::uint64_t>(images.size());
  for (const auto& rec : images) {
    w.Write<std::int32_t>(rec.image_id);
    for (double q : rec.qvec) w.Write<double>(q);
    for (int k = 0; k < 3; ++k) w.Write<double>(rec.pose.translation[k]);
    w.Write<std::int32_t>(rec.camera_id);
    w.WriteCString(rec.name);
    w.Write<std::uint64_t>(rec.points2d.size());
    for (const auto& p : rec.points2d) {
      w.Write<double>(p.x);
      w.Write<double>(p.y);
      w.Write<std::int64_t>(p.point3d_id);
    }
  }
  return w.Take();
}

std::vector<ImageRecord> DecodeImagesText(const std::string& text) {
  // Two lines per image; the second (points) line may be empty.
  const auto rows = DataLines(text, true);
  std::vector<ImageRecord> images;
  std::set<int> seen;
  std::size_t i = 0;
  while (i < rows.size()) {
    if (rows[i].find_first_not_of(" \t") == std::string::npos) {
      ++i;
      continue;
    }
    std::istringstream in(rows[i]);
    ImageRecord rec;
    rec.image_id = ParseField<int>(in, i + 1);
    for (double& q : rec.qvec) q = ParseField<double>(in, i + 1);
    Eigen::Vector3d t;
    for (int k = 0; k < 3; ++k) t[k] = ParseField<double>(in, i + 1);
    rec.camera_id = ParseField<int>(in, i + 1);
    rec.name = ParseField<std::string>(in, i + 1);
    rec.pose = PoseFromQvec(rec.qvec, t, 0);
    if (i + 1 < rows.size()) {
      std::istringstream pts(rows[i + 1]);
      double x, y;
      std::int64_t id;
      while (pts >> x >> y >> id) rec.points2d.push_back({x, y, id});
      i += 2;
    } else {
      i += 1;
    }
    if (!seen.insert(rec.image_id).second) {
      Fail(ErrorCode::kDuplicateId, "image id " + std::to_string(rec.image_id));
    }
    images.push_back(std::move(rec));
  }
  return images;
}

std::string EncodeImagesText(const std::vector<ImageRecord>& images) {
  std::string out = "# Image list with two lines of data per image:\n"
                    "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
                    "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
  for (const auto& rec : images) {
    out += std::to_string(rec.image_id);
    for (double q : rec.qvec) out += " " + FormatDouble(q);
    for (int k = 0; k < 3; ++k) out += " " + FormatDouble(rec.pose.translation[k]);
    out += " " + std::to_string(rec.camera_id) + " " + rec.name + "\n";
    bool first = true;
    for (const auto& p : rec.points2d) {
      if (!first) out += " ";
      first = false;
      out += FormatDouble(p.x) + " " + FormatDouble(p.y) + " " + std::to_string(p.point3d_id);
    }
    out += "\n";
  }
  return out;
}

std::vector<SparsePoint> DecodePoints3DBinary(ByteView bytes) {
  ByteReader r(bytes);
  const auto count = r.Read<std::uint64_t>();
  std::vector<SparsePoint> points;
  points.reserve(detail::SafeReserve(count, r.remaining(), 8 + 24 + 3 + 8 + 8));
  std::set<std::int64_t> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t record_offset = r.offset();
    SparsePoint p;
    p.point_id = r.Read<std::int64_t>();
    for (int k = 0; k < 3; ++k) p.xyz[k] = r.Read<double>();
    for (auto& c : p.rgb) c = r.Read<std::uint8_t>();
    p.error = r.Read<double>();
    const auto track_len = r.Read<std::uint64_t>();
    p.track.reserve(detail::SafeReserve(track_len, r.remaining(), 8));
    for (std::uint64_t t = 0; t < track_len; ++t) {
      TrackElement e;
      e.image_id = r.Read<std::int32_t>();
      e.point2d_idx = r.Read<std::int32_t>();
      p.track.push_back(e);
    }
    if (!seen.insert(p.point_id).second) {
      throw Error(ErrorCode::kDuplicateId, "point id " + std::to_string(p.point_id),
                  record_offset);
    }
    points.push_back(std::move(p));
  }
  if (!r.done()) throw Error(ErrorCode::kMalformedFile, "trailing bytes", r.offset());
  return points;
}

Bytes EncodePoints3DBinary(const std::vector<SparsePoint>& points) {
  ByteWriter w;
  w.Write<std::uint64_t>(points.size());
  for (const auto& p : points) {
    w.Write<std::int64_t>(p.point_id);
    for (int k = 0; k < 3; ++k) w.Write<double>(p.xyz[k]);
    for (auto c : p.rgb) w.Write<std::uint8_t>(c);
    w.Write<double>(p.error);
    w.Write<std::uint64_t>(p.track.size());
    for (const auto& e : p.track) {
      w.Write<std::int32_t>(e.image_id);
      w.Write<std::int32_t>(e.point2d_idx);
    }
  }
  return w.Take();
}

std::vector<SparsePoint> DecodePoints3DText(const std::string& text) {
  std::vector<SparsePoint> points;
  std::set<std::int64_t> seen;
  std::size_t line_no = 0;
  for (const auto& line : DataLines(text)) {
    ++line_no;
    std::istringstream in(line);
    SparsePoint p;
    p.point_id = ParseField<std::int64_t>(in, line_no);
    for (int k = 0; k < 3; ++k) p.xyz[k] = ParseField<double>(in, line_no);
    for (auto& c : p.rgb) {
      const int v = ParseField<int>(in, line_no);
      if (v < 0 || v > 255) Fail(ErrorCode::kMalformedFile, "color out of range");
      c = std::uint8_t(v);
    }
    p.error = ParseField<double>(in, line_no);
    std::int32_t image_id, idx;
    while (in >> image_id >> idx) p.track.push_back({image_id, idx});
    if (!seen.insert(p.point_id).second) {
      Fail(ErrorCode::kDuplicateId, "point id " + std::to_string(p.point_id));
    }
    points.push_back(std::move(p));
  }
  return points;
}

std::string EncodePoints3DText(const std::vector<SparsePoint>& points) {
  std::string out = "# 3D point list with one line of data per point:\n"
                    "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
  for (const auto& p : points) {
    out += std::to_string(p.point_id);
    for (int k = 0; k < 3; ++k) out += " " + FormatDouble(p.xyz[k]);
    for (auto c : p.rgb) out += " " + std::to_string(int(c));
    out += " " + FormatDouble(p.error);
    for (const auto& e : p.track) {
      out += " " + std::to_string(e.image_id) + " " + std::to_string(e.point2d_idx);
    }
    out += "\n";
  }
  return out;
}

namespace {

bool IsText(const std::filesystem::path& path) { return path.extension() == ".txt"; }

std::string AsString(const Bytes& b) { return std::string(b.begin(), b.end()); }

Bytes AsBytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

}  // namespace

CameraMap ReadColmapCameras(const std::filesystem::path& path) {
  const Bytes b = ReadFileBytes(path);
  return IsText(path) ? DecodeCamerasText(AsString(b)) : DecodeCamerasBinary(b);
}

void WriteColmapCameras(const CameraMap& cameras, const std::filesystem::path& path) {
  WriteFileBytes(path, IsText(path) ? AsBytes(EncodeCamerasText(cameras))
                                    : EncodeCamerasBinary(cameras));
}

std::vector<ImageRecord> ReadColmapImages(const std::filesystem::path& path) {
  const Bytes b = ReadFileBytes(path);
  return IsText(path) ? DecodeImagesText(AsString(b)) : DecodeImagesBinary(b);
}

void WriteColmapImages(const std::vector<ImageRecord>& images, const std::filesystem::path& path) {
  WriteFileBytes(path, IsText(path) ? AsBytes(EncodeImagesText(images))
                                    : EncodeImagesBinary(images));
}

std::vector<SparsePoint> ReadColmapPoints3D(const std::filesystem::path& path) {
  const Bytes b = ReadFileBytes(path);
  return IsText(path) ? DecodePoints3DText(AsString(b)) : DecodePoints3DBinary(b);
}

void WriteColmapPoints3D(const std::vector<SparsePoint>& points,
                         const std::filesystem::path& path) {
  WriteFileBytes(path, IsText(path) ? AsBytes(EncodePoints3DText(points))
                                    : EncodePoints3DBinary(points));
}

Bytes ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoError, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::filesystem::path& path, ByteView bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) Fail(ErrorCode::kIoError, "short write to " + path.string());
}

Pose PoseFromColmap(const std::array<double, 4>& qvec, const Eigen::Vector3d& tvec) {
  return PoseFromQvec(qvec, tvec, 0);
}

}  // namespace fvs
