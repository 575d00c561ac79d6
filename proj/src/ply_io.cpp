#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <optional>
#include <sstream>

#include "byte_stream.hpp"
#include "fvs/scene_io.hpp"

namespace fvs {

namespace {

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

std::optional<PlyType> ParsePlyType(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::kInt8;
  if (s == "uchar" || s == "uint8") return PlyType::kUint8;
  if (s == "short" || s == "int16") return PlyType::kInt16;
  if (s == "ushort" || s == "uint16") return PlyType::kUint16;
  if (s == "int" || s == "int32") return PlyType::kInt32;
  if (s == "uint" || s == "uint32") return PlyType::kUint32;
  if (s == "float" || s == "float32") return PlyType::kFloat32;
  if (s == "double" || s == "float64") return PlyType::kFloat64;
  return std::nullopt;
}

std::size_t PlyTypeSize(PlyType t) {
  switch (t) {
    case PlyType::kInt8:
    case PlyType::kUint8: return 1;
    case PlyType::kInt16:
    case PlyType::kUint16: return 2;
    case PlyType::kInt32:
    case PlyType::kUint32:
    case PlyType::kFloat32: return 4;
    case PlyType::kFloat64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat32;
  bool is_list = false;
  PlyType count_type = PlyType::kUint8;
};

struct PlyElement {
  std::string name;
  std::uint64_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool ascii = false;
  std::vector<PlyElement> elements;
  std::size_t body_offset = 0;
};

PlyHeader ParseHeader(ByteView bytes) {
  PlyHeader header;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size()) throw Error(ErrorCode::kMalformedFile, "unterminated PLY header", start);
    std::string line(reinterpret_cast<const char*>(bytes.data()) + start, pos - start);
    ++pos;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line() != "ply") throw Error(ErrorCode::kMalformedFile, "missing ply magic", 0);
  bool have_format = false;
  while (true) {
    const std::size_t line_offset = pos;
    const std::string line = next_line();
    std::istringstream in(line);
    std::string keyword;
    in >> keyword;
    if (keyword == "end_header") break;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "format") {
      std::string fmt, version;
      in >> fmt >> version;
      if (fmt == "ascii") {
        header.ascii = true;
      } else if (fmt == "binary_little_endian") {
        header.ascii = false;
      } else {
        throw Error(ErrorCode::kMalformedFile, "unsupported PLY format " + fmt, line_offset);
      }
      have_format = true;
    } else if (keyword == "element") {
      PlyElement e;
      if (!(in >> e.name >> e.count)) {
        throw Error(ErrorCode::kMalformedFile, "bad element line", line_offset);
      }
      header.elements.push_back(e);
    } else if (keyword == "property") {
      if (header.elements.empty()) {
        throw Error(ErrorCode::kMalformedFile, "property before element", line_offset);
      }
      PlyProperty p;
      std::string type;
      in >> type;
      if (type == "list") {
        std::string count_type, item_type;
        in >> count_type >> item_type >> p.name;
        const auto ct = ParsePlyType(count_type);
        const auto it = ParsePlyType(item_type);
        if (!ct || !it || p.name.empty()) {
          throw Error(ErrorCode::kMalformedFile, "bad list property", line_offset);
        }
        p.is_list = true;
        p.count_type = *ct;
        p.type = *it;
      } else {
        const auto t = ParsePlyType(type);
        in >> p.name;
        if (!t || p.name.empty()) throw Error(ErrorCode::kMalformedFile, "bad property", line_offset);
        p.type = *t;
      }
      header.elements.back().properties.push_back(p);
    } else {
      throw Error(ErrorCode::kMalformedFile, "unknown header keyword " + keyword, line_offset);
    }
  }
  if (!have_format) throw Error(ErrorCode::kMalformedFile, "missing PLY format line", 0);
  header.body_offset = pos;
  return header;
}

// Uniform value source for ascii and binary bodies.
class PlyBody {
 public:
  PlyBody(ByteView bytes, std::size_t offset, bool ascii)
      : bytes_(bytes), pos_(offset), ascii_(ascii) {}

  double Read(PlyType type) {
    if (ascii_) return ReadAscii();
    if (PlyTypeSize(type) > remaining()) {
      throw Error(ErrorCode::kMalformedFile, "unexpected end of PLY body", pos_);
    }
    detail::ByteReader r(bytes_.subspan(pos_));
    double v = 0;
    switch (type) {
      case PlyType::kInt8: v = r.Read<std::int8_t>(); break;
      case PlyType::kUint8: v = r.Read<std::uint8_t>(); break;
      case PlyType::kInt16: v = r.Read<std::int16_t>(); break;
      case PlyType::kUint16: v = r.Read<std::uint16_t>(); break;
      case PlyType::kInt32: v = r.Read<std::int32_t>(); break;
      case PlyType::kUint32: v = r.Read<std::uint32_t>(); break;
      case PlyType::kFloat32: v = r.Read<float>(); break;
      case PlyType::kFloat64: v = r.Read<double>(); break;
    }
    pos_ += PlyTypeSize(type);
    return v;
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  double ReadAscii() {
    while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) ++pos_;
    if (start == pos_) throw Error(ErrorCode::kMalformedFile, "unexpected end of PLY body", start);
    const char* first = reinterpret_cast<const char*>(bytes_.data()) + start;
    const char* last = reinterpret_cast<const char*>(bytes_.data()) + pos_;
    double v = 0;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
      throw Error(ErrorCode::kMalformedFile, "bad PLY number", start);
    }
    return v;
  }

  ByteView bytes_;
  std::size_t pos_;
  bool ascii_;
};

}  // namespace

TriangleMesh DecodePly(ByteView bytes) {
  const PlyHeader header = ParseHeader(bytes);
  PlyBody body(bytes, header.body_offset, header.ascii);
  TriangleMesh mesh;
  bool saw_vertex = false;
  for (const auto& element : header.elements) {
    if (element.name == "vertex") {
      saw_vertex = true;
      int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
      for (std::size_t i = 0; i < element.properties.size(); ++i) {
        const auto& n = element.properties[i].name;
        const int k = int(i);
        if (element.properties[i].is_list) continue;
        if (n == "x") ix = k;
        if (n == "y") iy = k;
        if (n == "z") iz = k;
        if (n == "red") ir = k;
        if (n == "green") ig = k;
        if (n == "blue") ib = k;
      }
      if (ix < 0 || iy < 0 || iz < 0) {
        throw Error(ErrorCode::kMalformedFile, "vertex element lacks x/y/z", header.body_offset);
      }
      const bool colors = ir >= 0 && ig >= 0 && ib >= 0;
      mesh.vertices.reserve(detail::SafeReserve(element.count, body.remaining(), 2));
      std::vector<double> row(element.properties.size());
      for (std::uint64_t v = 0; v < element.count; ++v) {
        for (std::size_t i = 0; i < element.properties.size(); ++i) {
          const auto& p = element.properties[i];
          if (p.is_list) {
            const auto n = std::uint64_t(body.Read(p.count_type));
            for (std::uint64_t j = 0; j < n; ++j) body.Read(p.type);
            row[i] = 0;
          } else {
            row[i] = body.Read(p.type);
          }
        }
        mesh.vertices.emplace_back(row[ix], row[iy], row[iz]);
        if (colors) {
          mesh.colors.push_back({std::uint8_t(row[ir]), std::uint8_t(row[ig]), std::uint8_t(row[ib])});
        }
      }
    } else if (element.name == "face") {
      int list_index = -1;
      for (std::size_t i = 0; i < element.properties.size(); ++i) {
        const auto& p = element.properties[i];
        if (p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index")) list_index = int(i);
      }
      if (list_index < 0) {
        throw Error(ErrorCode::kMalformedFile, "face element lacks vertex_indices",
                    header.body_offset);
      }
      mesh.faces.reserve(detail::SafeReserve(element.count, body.remaining(), 2));
      for (std::uint64_t f = 0; f < element.count; ++f) {
        for (std::size_t i = 0; i < element.properties.size(); ++i) {
          const auto& p = element.properties[i];
          if (!p.is_list) {
            body.Read(p.type);
            continue;
          }
          const std::size_t at = body.offset();
          const auto n = std::uint64_t(body.Read(p.count_type));
          if (int(i) != list_index) {
            for (std::uint64_t j = 0; j < n; ++j) body.Read(p.type);
            continue;
          }
          if (n != 3) {
            throw Error(ErrorCode::kNonTriangulated,
                        "face with " + std::to_string(n) + " vertices", at);
          }
          std::array<std::int32_t, 3> face{};
          for (auto& idx : face) {
            const double v = body.Read(p.type);
            if (v < 0 || v > 2147483647.0) {
              throw Error(ErrorCode::kMalformedFile, "vertex index out of range", at);
            }
            idx = std::int32_t(v);
          }
          mesh.faces.push_back(face);
        }
      }
    } else {
      for (std::uint64_t r = 0; r < element.count; ++r) {
        for (const auto& p : element.properties) {
          if (p.is_list) {
            const auto n = std::uint64_t(body.Read(p.count_type));
            for (std::uint64_t j = 0; j < n; ++j) body.Read(p.type);
          } else {
            body.Read(p.type);
          }
        }
      }
    }
  }
  if (!saw_vertex) throw Error(ErrorCode::kMalformedFile, "PLY has no vertex element", 0);
  try {
    mesh.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedFile, e.what(), body.offset());
  }
  return mesh;
}

Bytes EncodePly(const TriangleMesh& mesh, PlyFormat format) {
  detail::ByteWriter w;
  std::string header = "ply\n";
  header += format == PlyFormat::kAscii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
  header += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
  header += "property double x\nproperty double y\nproperty double z\n";
  if (mesh.has_colors()) header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  header += "element face " + std::to_string(mesh.faces.size()) + "\n";
  header += "property list uchar int vertex_indices\nend_header\n";
  w.WriteText(header);
  if (format == PlyFormat::kAscii) {
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const auto& v = mesh.vertices[i];
      std::string line = detail::FormatDouble(v.x()) + " " + detail::FormatDouble(v.y()) + " " +
                         detail::FormatDouble(v.z());
      if (mesh.has_colors()) {
        for (auto c : mesh.colors[i]) line += " " + std::to_string(int(c));
      }
      w.WriteText(line + "\n");
    }
    for (const auto& f : mesh.faces) {
      w.WriteText("3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " +
                  std::to_string(f[2]) + "\n");
    }
  } else {
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      for (int k = 0; k < 3; ++k) w.Write<double>(mesh.vertices[i][k]);
      if (mesh.has_colors()) {
        for (auto c : mesh.colors[i]) w.Write<std::uint8_t>(c);
      }
    }
    for (const auto& f : mesh.faces) {
      w.Write<std::uint8_t>(3);
      for (auto idx : f) w.Write<std::int32_t>(idx);
    }
  }
  return w.Take();
}

TriangleMesh ReadPlyMesh(const std::filesystem::path& path) { return DecodePly(ReadFileBytes(path)); }

void WritePlyMesh(const TriangleMesh& mesh, const std::filesystem::path& path, PlyFormat format) {
  WriteFileBytes(path, EncodePly(mesh, format));
}

}  // namespace fvs
