#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "synthview/error.hpp"
#include "synthview/mesh.hpp"

namespace synthview {

enum class MeshFormat { ply, obj };
enum class PlyEncoding { binary_little_endian, ascii };

struct SaveOptions {
  PlyEncoding ply_encoding = PlyEncoding::binary_little_endian;
};

struct SaveResult {
  /// Set when the target format cannot carry vertex colors and they were omitted.
  bool colors_dropped = false;
};

/// Picks the format from the file extension (case-insensitive).
inline MeshFormat mesh_format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".ply") return MeshFormat::ply;
  if (ext == ".obj") return MeshFormat::obj;
  throw InputError("cannot infer mesh format from extension of '" + path.string() + "'");
}

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) {
    throw IoError("read failure on '" + path.string() + "'");
  }
  return std::move(ss).str();
}

template <typename T>
T load_le(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    value = std::bit_cast<T>(bytes);
  }
  return value;
}

template <typename T>
void store_le(std::string& out, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.append(bytes.data(), bytes.size());
}

enum class PlyType { int8, uint8, int16, uint16, int32, uint32, float32, float64 };

inline std::optional<PlyType> parse_ply_type(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::int8;
  if (name == "uchar" || name == "uint8") return PlyType::uint8;
  if (name == "short" || name == "int16") return PlyType::int16;
  if (name == "ushort" || name == "uint16") return PlyType::uint16;
  if (name == "int" || name == "int32") return PlyType::int32;
  if (name == "uint" || name == "uint32") return PlyType::uint32;
  if (name == "float" || name == "float32") return PlyType::float32;
  if (name == "double" || name == "float64") return PlyType::float64;
  return std::nullopt;
}

inline std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::int8:
    case PlyType::uint8: return 1;
    case PlyType::int16:
    case PlyType::uint16: return 2;
    case PlyType::int32:
    case PlyType::uint32:
    case PlyType::float32: return 4;
    case PlyType::float64: return 8;
  }
  return 0;
}

inline bool is_float_type(PlyType t) { return t == PlyType::float32 || t == PlyType::float64; }

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::float32;
  bool is_list = false;
  PlyType count_type = PlyType::uint8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

/// Value source for the PLY body; ascii tokens or little-endian binary.
class PlyBodyReader {
 public:
  PlyBodyReader(std::string_view body, bool ascii, std::size_t body_offset, std::size_t first_line)
      : body_(body), ascii_(ascii), base_offset_(body_offset), line_(first_line) {}

  double read(PlyType type) {
    return ascii_ ? read_ascii(type) : read_binary(type);
  }

  [[nodiscard]] std::string where() const {
    if (ascii_) return "line " + std::to_string(line_);
    return "byte offset " + std::to_string(base_offset_ + pos_);
  }

 private:
  double read_ascii(PlyType type) {
    while (pos_ < body_.size() && std::isspace(static_cast<unsigned char>(body_[pos_]))) {
      if (body_[pos_] == '\n') ++line_;
      ++pos_;
    }
    if (pos_ >= body_.size()) {
      throw InputError("PLY: unexpected end of data at " + where());
    }
    std::size_t end = pos_;
    while (end < body_.size() && !std::isspace(static_cast<unsigned char>(body_[end]))) ++end;
    const std::string_view tok = body_.substr(pos_, end - pos_);
    double value = 0.0;
    if (!parse_double(tok, value)) {
      throw InputError("PLY: malformed number '" + std::string(tok) + "' at " + where());
    }
    if (!is_float_type(type) && value != std::floor(value)) {
      throw InputError("PLY: expected integer, got '" + std::string(tok) + "' at " + where());
    }
    pos_ = end;
    return value;
  }

  double read_binary(PlyType type) {
    const std::size_t n = ply_type_size(type);
    if (pos_ + n > body_.size()) {
      throw InputError("PLY: unexpected end of data at " + where());
    }
    const char* p = body_.data() + pos_;
    double value = 0.0;
    switch (type) {
      case PlyType::int8: value = load_le<std::int8_t>(p); break;
      case PlyType::uint8: value = load_le<std::uint8_t>(p); break;
      case PlyType::int16: value = load_le<std::int16_t>(p); break;
      case PlyType::uint16: value = load_le<std::uint16_t>(p); break;
      case PlyType::int32: value = load_le<std::int32_t>(p); break;
      case PlyType::uint32: value = load_le<std::uint32_t>(p); break;
      case PlyType::float32: value = load_le<float>(p); break;
      case PlyType::float64: value = load_le<double>(p); break;
    }
    pos_ += n;
    return value;
  }

  std::string_view body_;
  bool ascii_;
  std::size_t base_offset_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

inline std::uint8_t color_channel(double v, PlyType type) {
  if (is_float_type(type)) v *= 255.0;
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

/// Appends the fan triangulation of a polygon, validating indices.
inline void append_polygon(Mesh& mesh, const std::vector<std::int64_t>& poly, const std::string& where) {
  if (poly.size() < 3) {
    throw InputError("face with fewer than 3 vertices at " + where);
  }
  const auto n = static_cast<std::int64_t>(mesh.vertices.size());
  for (std::int64_t idx : poly) {
    if (idx < 0 || idx >= n) {
      throw InputError("face index " + std::to_string(idx) + " out of range [0, " + std::to_string(n) + ") at " +
                       where);
    }
  }
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
    mesh.triangles.push_back({static_cast<std::uint32_t>(poly[0]), static_cast<std::uint32_t>(poly[k]),
                              static_cast<std::uint32_t>(poly[k + 1])});
  }
}

inline Mesh parse_ply(const std::string& data) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string_view {
    if (pos >= data.size()) {
      throw InputError("PLY: header ends before end_header (line " + std::to_string(line_no + 1) + ")");
    }
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    std::string_view line(data.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = std::min(end + 1, data.size());
    ++line_no;
    return line;
  };

  if (next_line() != "ply") {
    throw InputError("PLY: missing 'ply' magic on line 1");
  }
  bool ascii = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  for (;;) {
    const std::string_view line = next_line();
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    const std::string where = "line " + std::to_string(line_no);
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 3) throw InputError("PLY: malformed format at " + where);
      if (tok[1] == "ascii") {
        ascii = true;
      } else if (tok[1] == "binary_little_endian") {
        ascii = false;
      } else if (tok[1] == "binary_big_endian") {
        throw InputError("PLY: binary_big_endian is not supported (" + where + ")");
      } else {
        throw InputError("PLY: unknown format '" + std::string(tok[1]) + "' at " + where);
      }
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw InputError("PLY: malformed element at " + where);
      PlyElement el;
      el.name = std::string(tok[1]);
      const auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), el.count);
      if (ec != std::errc{} || ptr != tok[2].data() + tok[2].size()) {
        throw InputError("PLY: bad element count at " + where);
      }
      elements.push_back(std::move(el));
    } else if (tok[0] == "property") {
      if (elements.empty()) throw InputError("PLY: property before any element at " + where);
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = parse_ply_type(tok[2]);
        auto it = parse_ply_type(tok[3]);
        if (!ct || !it || is_float_type(*ct)) throw InputError("PLY: bad list property types at " + where);
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
        prop.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        auto t = parse_ply_type(tok[1]);
        if (!t) throw InputError("PLY: unknown property type '" + std::string(tok[1]) + "' at " + where);
        prop.type = *t;
        prop.name = std::string(tok[2]);
      } else {
        throw InputError("PLY: malformed property at " + where);
      }
      elements.back().properties.push_back(std::move(prop));
    } else {
      throw InputError("PLY: unexpected header keyword '" + std::string(tok[0]) + "' at " + where);
    }
  }
  if (!have_format) throw InputError("PLY: header has no format line");

  Mesh mesh;
  PlyBodyReader reader(std::string_view(data).substr(pos), ascii, pos, line_no + 1);
  bool seen_vertex = false;
  for (const PlyElement& el : elements) {
    if (el.name == "vertex") {
      seen_vertex = true;
      int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
      for (std::size_t k = 0; k < el.properties.size(); ++k) {
        const auto& p = el.properties[k];
        if (p.is_list) continue;
        const int ki = static_cast<int>(k);
        if (p.name == "x") ix = ki;
        else if (p.name == "y") iy = ki;
        else if (p.name == "z") iz = ki;
        else if (p.name == "red" || p.name == "diffuse_red") ir = ki;
        else if (p.name == "green" || p.name == "diffuse_green") ig = ki;
        else if (p.name == "blue" || p.name == "diffuse_blue") ib = ki;
      }
      if (ix < 0 || iy < 0 || iz < 0) throw InputError("PLY: vertex element lacks x/y/z properties");
      const bool with_color = ir >= 0 && ig >= 0 && ib >= 0;
      mesh.vertices.reserve(el.count);
      if (with_color) mesh.colors.emplace().reserve(el.count);
      std::vector<double> values(el.properties.size());
      for (std::size_t v = 0; v < el.count; ++v) {
        for (std::size_t k = 0; k < el.properties.size(); ++k) {
          const auto& p = el.properties[k];
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(reader.read(p.count_type));
            for (std::size_t j = 0; j < n; ++j) reader.read(p.type);
          } else {
            values[k] = reader.read(p.type);
          }
        }
        const Vec3 xyz(values[ix], values[iy], values[iz]);
        if (!xyz.allFinite()) {
          throw InputError("PLY: non-finite coordinate on vertex " + std::to_string(v) + " before " + reader.where());
        }
        mesh.vertices.push_back(xyz);
        if (with_color) {
          const auto& props = el.properties;
          mesh.colors->push_back({color_channel(values[ir], props[ir].type), color_channel(values[ig], props[ig].type),
                                  color_channel(values[ib], props[ib].type)});
        }
      }
    } else if (el.name == "face") {
      if (!seen_vertex) throw InputError("PLY: face element precedes vertex element");
      int list_index = -1;
      for (std::size_t k = 0; k < el.properties.size(); ++k) {
        const auto& p = el.properties[k];
        if (p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index")) list_index = static_cast<int>(k);
      }
      if (list_index < 0) throw InputError("PLY: face element lacks a vertex_indices list");
      mesh.triangles.reserve(el.count);
      std::vector<std::int64_t> poly;
      for (std::size_t f = 0; f < el.count; ++f) {
        const std::string where = reader.where();
        for (std::size_t k = 0; k < el.properties.size(); ++k) {
          const auto& p = el.properties[k];
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(reader.read(p.count_type));
            if (static_cast<int>(k) == list_index) poly.resize(n);
            for (std::size_t j = 0; j < n; ++j) {
              const double value = reader.read(p.type);
              if (static_cast<int>(k) == list_index) poly[j] = static_cast<std::int64_t>(value);
            }
          } else {
            reader.read(p.type);
          }
        }
        append_polygon(mesh, poly, where);
      }
    } else {
      for (std::size_t i = 0; i < el.count; ++i) {
        for (const auto& p : el.properties) {
          const std::size_t n = p.is_list ? static_cast<std::size_t>(reader.read(p.count_type)) : 1;
          for (std::size_t j = 0; j < n; ++j) reader.read(p.type);
        }
      }
    }
  }
  validate(mesh);
  return mesh;
}

inline Mesh parse_obj(const std::string& data) {
  Mesh mesh;
  struct PendingFace {
    std::vector<std::int64_t> indices;
    std::size_t line;
  };
  std::vector<PendingFace> faces;
  std::istringstream in(data);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const std::string where = "line " + std::to_string(line_no);
    if (tok[0] == "v") {
      if (tok.size() < 4) throw InputError("OBJ: vertex needs 3 coordinates at " + where);
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        if (!parse_double(tok[k + 1], p[k])) {
          throw InputError("OBJ: malformed number '" + std::string(tok[k + 1]) + "' at " + where);
        }
      }
      if (!p.allFinite()) throw InputError("OBJ: non-finite coordinate at " + where);
      mesh.vertices.push_back(p);
    } else if (tok[0] == "f") {
      PendingFace face{{}, line_no};
      const auto n_so_far = static_cast<std::int64_t>(mesh.vertices.size());
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const std::string_view ref = tok[k].substr(0, tok[k].find('/'));
        std::int64_t idx = 0;
        const auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), idx);
        if (ec != std::errc{} || ptr != ref.data() + ref.size() || idx == 0) {
          throw InputError("OBJ: malformed face index '" + std::string(tok[k]) + "' at " + where);
        }
        face.indices.push_back(idx > 0 ? idx - 1 : n_so_far + idx);
      }
      faces.push_back(std::move(face));
    }
    // vt, vn, g, o, s, usemtl, mtllib and unknown records are ignored.
  }
  for (const auto& face : faces) {
    append_polygon(mesh, face.indices, "line " + std::to_string(face.line));
  }
  validate(mesh);
  return mesh;
}

inline std::string encode_ply(const Mesh& mesh, PlyEncoding encoding) {
  const bool ascii = encoding == PlyEncoding::ascii;
  std::ostringstream header;
  header << "ply\n"
         << "format " << (ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
         << "comment synthview\n"
         << "element vertex " << mesh.vertices.size() << "\n"
         << "property double x\nproperty double y\nproperty double z\n";
  if (mesh.colors) header << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  header << "element face " << mesh.triangles.size() << "\n"
         << "property list uchar int vertex_indices\n"
         << "end_header\n";
  std::string out = header.str();
  if (ascii) {
    std::ostringstream body;
    body << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const Vec3& v = mesh.vertices[i];
      body << v.x() << ' ' << v.y() << ' ' << v.z();
      if (mesh.colors) {
        const Rgb8 c = (*mesh.colors)[i];
        body << ' ' << int(c.r) << ' ' << int(c.g) << ' ' << int(c.b);
      }
      body << '\n';
    }
    for (const Triangle& t : mesh.triangles) body << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out += body.str();
  } else {
    out.reserve(out.size() + mesh.vertices.size() * 27 + mesh.triangles.size() * 13);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const Vec3& v = mesh.vertices[i];
      store_le(out, v.x());
      store_le(out, v.y());
      store_le(out, v.z());
      if (mesh.colors) {
        const Rgb8 c = (*mesh.colors)[i];
        out.push_back(static_cast<char>(c.r));
        out.push_back(static_cast<char>(c.g));
        out.push_back(static_cast<char>(c.b));
      }
    }
    for (const Triangle& t : mesh.triangles) {
      out.push_back(3);
      for (std::uint32_t idx : t) store_le(out, static_cast<std::int32_t>(idx));
    }
  }
  return out;
}

inline std::string encode_obj(const Mesh& mesh) {
  std::ostringstream body;
  body << "# synthview\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const Vec3& v : mesh.vertices) body << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const Triangle& t : mesh.triangles) body << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  return body.str();
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

}  // namespace detail

/// Parses an in-memory mesh file.
inline Mesh parse_mesh(const std::string& bytes, MeshFormat format) {
  return format == MeshFormat::ply ? detail::parse_ply(bytes) : detail::parse_obj(bytes);
}

inline Mesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  const std::string bytes = detail::read_file_bytes(path);
  try {
    return parse_mesh(bytes, format);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline Mesh load_mesh(const std::filesystem::path& path) { return load_mesh(path, mesh_format_from_path(path)); }

/// Binary PLY stores coordinates as doubles so positions round-trip exactly.
/// OBJ has no standard vertex-color record; colors are dropped and flagged.
inline SaveResult save_mesh(const Mesh& mesh, const std::filesystem::path& path, MeshFormat format,
                            const SaveOptions& options = {}) {
  validate(mesh);
  SaveResult result;
  if (format == MeshFormat::ply) {
    detail::write_file_bytes(path, detail::encode_ply(mesh, options.ply_encoding));
  } else {
    result.colors_dropped = mesh.has_colors();
    detail::write_file_bytes(path, detail::encode_obj(mesh));
  }
  return result;
}

inline SaveResult save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  return save_mesh(mesh, path, mesh_format_from_path(path));
}

struct DemeanResult {
  Mesh mesh;
  Vec3 centroid = Vec3::Zero();
};

/// Translates the mesh so its vertex mean sits at the origin.
inline DemeanResult demean(const Mesh& mesh) {
  if (mesh.vertices.empty()) throw InputError("cannot demean an empty mesh");
  Vec3 sum = Vec3::Zero();
  for (const Vec3& v : mesh.vertices) sum += v;
  DemeanResult result{mesh, sum / static_cast<double>(mesh.vertices.size())};
  for (Vec3& v : result.mesh.vertices) v -= result.centroid;
  return result;
}

}  // namespace synthview
