#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthview/camera.hpp"
#include "synthview/error.hpp"
#include "synthview/mesh_io.hpp"
#include "synthview/metrics.hpp"
#include "synthview/texturing.hpp"

namespace synthview {

using Json = nlohmann::ordered_json;

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
}

/// Writes pretty-printed JSON with a trailing newline.
inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

inline Json to_json(const Pose& p) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({p.rotation(r, 0), p.rotation(r, 1), p.rotation(r, 2)});
  return Json{{"rotation", rot}, {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

inline Pose pose_from_json(const Json& j) {
  try {
    const Json& rot = j.at("rotation");
    const Json& tr = j.at("translation");
    if (!rot.is_array() || rot.size() != 3 || !tr.is_array() || tr.size() != 3) {
      throw InputError("pose: rotation must be 3x3 and translation a 3-vector");
    }
    Pose p;
    for (int r = 0; r < 3; ++r) {
      if (!rot[r].is_array() || rot[r].size() != 3) throw InputError("pose: rotation must be 3x3");
      for (int c = 0; c < 3; ++c) p.rotation(r, c) = rot[r][c].get<double>();
      p.translation[r] = tr[r].get<double>();
    }
    p.validate();
    return p;
  } catch (const Json::exception& e) {
    throw InputError(std::string("pose: ") + e.what());
  }
}

inline Json to_json(const CameraIntrinsics& k) {
  return Json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

inline CameraIntrinsics intrinsics_from_json(const Json& j) {
  try {
    CameraIntrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    k.validate();
    return k;
  } catch (const Json::exception& e) {
    throw InputError(std::string("intrinsics: ") + e.what());
  }
}

inline Pose load_pose(const std::filesystem::path& path) {
  try {
    return pose_from_json(read_json_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline CameraIntrinsics load_intrinsics(const std::filesystem::path& path) {
  try {
    return intrinsics_from_json(read_json_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline Json to_json(const TexturingReport& r) {
  return Json{{"visible_count", r.visible_count},
              {"occluded_count", r.occluded_count},
              {"out_of_frame_count", r.out_of_frame_count},
              {"behind_camera_count", r.behind_camera_count}};
}

inline Json to_json(const MetricReport& r) {
  Json j;
  j["fid"] = r.fid ? Json(*r.fid) : Json(nullptr);
  j["kid"] = r.kid ? Json(*r.kid) : Json(nullptr);
  j["ssim_mean"] = r.ssim_mean;
  j["per_pair_ssim"] = r.per_pair_ssim;
  return j;
}

inline Json to_json(const Rgb8& c) { return Json::array({c.r, c.g, c.b}); }

inline Rgb8 rgb_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw InputError("color must be an [r, g, b] array");
  Rgb8 c;
  std::array<std::uint8_t*, 3> ch{&c.r, &c.g, &c.b};
  for (int i = 0; i < 3; ++i) {
    const int v = j[i].get<int>();
    if (v < 0 || v > 255) throw InputError("color channel out of [0, 255]");
    *ch[i] = static_cast<std::uint8_t>(v);
  }
  return c;
}

namespace detail {

/// Splits "<json header line>\n<payload>".
inline std::pair<Json, std::string> read_header_and_payload(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string header;
  if (!std::getline(in, header)) throw InputError(path.string() + ": missing JSON header line");
  Json j;
  try {
    j = Json::parse(header);
  } catch (const Json::parse_error& e) {
    throw InputError(path.string() + ": invalid JSON header: " + e.what());
  }
  std::ostringstream rest;
  rest << in.rdbuf();
  return {std::move(j), std::move(rest).str()};
}

inline void write_header_and_floats(const std::filesystem::path& path, const Json& header,
                                    std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << header.dump() << '\n';
  for (double v : values) {
    auto bytes = std::bit_cast<std::array<char, 4>>(static_cast<float>(v));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), 4);
  }
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

inline std::vector<double> decode_floats(const std::string& payload, std::size_t expected, const std::string& what) {
  if (payload.size() != expected * 4) {
    throw InputError(what + ": payload has " + std::to_string(payload.size()) + " bytes, expected " +
                     std::to_string(expected * 4));
  }
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::array<char, 4> bytes;
    std::memcpy(bytes.data(), payload.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    values[i] = std::bit_cast<float>(bytes);
  }
  return values;
}

}  // namespace detail

/// Feature files: `.csv` holds one comma-separated vector per row; anything else is a
/// one-line JSON header {"count": N, "dim": D} followed by N*D little-endian float32.
inline FeatureSet load_features(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        const auto first = cell.find_first_not_of(" \t");
        const auto last = cell.find_last_not_of(" \t");
        double v = 0.0;
        if (first == std::string::npos || !detail::parse_double(std::string_view(cell).substr(first, last - first + 1), v)) {
          throw InputError(path.string() + ": malformed number on line " + std::to_string(line_no));
        }
        row.push_back(v);
      }
      rows.push_back(std::move(row));
    }
    try {
      return FeatureSet::from_rows(rows);
    } catch (const InputError& e) {
      throw InputError(path.string() + ": " + e.what());
    }
  }
  auto [header, payload] = detail::read_header_and_payload(path);
  std::size_t count = 0, dim = 0;
  try {
    count = header.at("count").get<std::size_t>();
    dim = header.at("dim").get<std::size_t>();
  } catch (const Json::exception& e) {
    throw InputError(path.string() + ": feature header: " + e.what());
  }
  try {
    return FeatureSet(dim, detail::decode_floats(payload, count * dim, "features"));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline void save_features(const std::filesystem::path& path, const FeatureSet& set) {
  if (path.extension() == ".csv") {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.precision(17);
    const auto values = set.values();
    for (std::size_t i = 0; i < set.count(); ++i) {
      for (std::size_t k = 0; k < set.dim(); ++k) out << (k ? "," : "") << values[i * set.dim() + k];
      out << '\n';
    }
    if (!out) throw IoError("write failure on '" + path.string() + "'");
    return;
  }
  detail::write_header_and_floats(path, Json{{"count", set.count()}, {"dim", set.dim()}}, set.values());
}

/// Depth export: one-line JSON header, then width*height little-endian float32, row-major.
/// Uncovered pixels hold +infinity.
inline void save_depth(const std::filesystem::path& path, const DepthRaster& depth) {
  const Json header{{"width", depth.width()}, {"height", depth.height()}, {"dtype", "float32"}, {"order", "row-major"}};
  detail::write_header_and_floats(path, header, depth.data());
}

inline DepthRaster load_depth(const std::filesystem::path& path) {
  auto [header, payload] = detail::read_header_and_payload(path);
  int w = 0, h = 0;
  try {
    w = header.at("width").get<int>();
    h = header.at("height").get<int>();
  } catch (const Json::exception& e) {
    throw InputError(path.string() + ": depth header: " + e.what());
  }
  DepthRaster out(w, h);
  const auto values = detail::decode_floats(payload, out.size(), path.string());
  std::copy(values.begin(), values.end(), out.data().begin());
  return out;
}

}  // namespace synthview
