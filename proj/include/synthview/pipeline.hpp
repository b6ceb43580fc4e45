#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "synthview/camera.hpp"
#include "synthview/error.hpp"
#include "synthview/mesh_io.hpp"
#include "synthview/metrics.hpp"
#include "synthview/parallel.hpp"
#include "synthview/phantom.hpp"
#include "synthview/png_io.hpp"
#include "synthview/pose_sampler.hpp"
#include "synthview/rasterizer.hpp"
#include "synthview/serialization.hpp"
#include "synthview/texturing.hpp"

namespace synthview {

inline constexpr const char* kToolVersion = "synthview 0.1.0";

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path mesh_path;
  fs::path frame_path;
  fs::path pose_path;
  fs::path intrinsics_path;
  bool demean_mesh = false;
  int pose_count = 1;
  double max_rotation = 0.0;     // degrees
  double max_translation = 0.0;  // millimeters
  std::uint64_t seed = 0;
  Backend backend = Backend::edge_function;
  Rgb8 fallback_color{96, 96, 96};
  double depth_epsilon = 0.5;
  Rgb8 background{0, 0, 0};
  double near_clip = 1.0;
  fs::path output_dir = ".";
  /// 0 = auto. Excluded from the manifest echo since it never changes outputs.
  int threads = 0;

  void validate() const {
    if (mesh_path.empty() || frame_path.empty() || pose_path.empty() || intrinsics_path.empty() ||
        output_dir.empty()) {
      throw InputError("config: mesh_path, frame_path, pose_path, intrinsics_path and output_dir are required");
    }
    if (pose_count < 1) throw InputError("config: pose_count must be >= 1");
    if (!(depth_epsilon >= 0.0)) throw InputError("config: depth_epsilon must be >= 0");
  }

  [[nodiscard]] RenderSettings render_settings(int render_threads) const {
    RenderSettings s;
    s.background = background;
    s.backend = backend;
    s.near_clip = near_clip;
    s.threads = render_threads;
    return s;
  }
};

inline std::string backend_name(Backend b) { return b == Backend::edge_function ? "edge_function" : "scanline"; }

inline Backend parse_backend(const std::string& name) {
  if (name == "edge_function") return Backend::edge_function;
  if (name == "scanline") return Backend::scanline;
  throw InputError("unknown backend '" + name + "' (expected edge_function or scanline)");
}

inline Json to_json(const PipelineConfig& c, bool include_output_dir = true) {
  Json j{{"mesh_path", c.mesh_path.generic_string()},
              {"frame_path", c.frame_path.generic_string()},
              {"pose_path", c.pose_path.generic_string()},
              {"intrinsics_path", c.intrinsics_path.generic_string()},
              {"demean_mesh", c.demean_mesh},
              {"pose_count", c.pose_count},
              {"max_rotation", c.max_rotation},
              {"max_translation", c.max_translation},
              {"seed", c.seed},
              {"backend", backend_name(c.backend)},
              {"fallback_color", to_json(c.fallback_color)},
              {"depth_epsilon", c.depth_epsilon},
              {"background", to_json(c.background)},
              {"near_clip", c.near_clip}};
  if (include_output_dir) j["output_dir"] = c.output_dir.generic_string();
  return j;
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
inline PipelineConfig config_from_json(const Json& j, PipelineConfig base = {}) {
  if (!j.is_object()) throw InputError("config: expected a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "mesh_path") base.mesh_path = value.get<std::string>();
      else if (key == "frame_path") base.frame_path = value.get<std::string>();
      else if (key == "pose_path") base.pose_path = value.get<std::string>();
      else if (key == "intrinsics_path") base.intrinsics_path = value.get<std::string>();
      else if (key == "demean_mesh") base.demean_mesh = value.get<bool>();
      else if (key == "pose_count") base.pose_count = value.get<int>();
      else if (key == "max_rotation") base.max_rotation = value.get<double>();
      else if (key == "max_translation") base.max_translation = value.get<double>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "backend") base.backend = parse_backend(value.get<std::string>());
      else if (key == "fallback_color") base.fallback_color = rgb_from_json(value);
      else if (key == "depth_epsilon") base.depth_epsilon = value.get<double>();
      else if (key == "background") base.background = rgb_from_json(value);
      else if (key == "near_clip") base.near_clip = value.get<double>();
      else if (key == "output_dir") base.output_dir = value.get<std::string>();
      else if (key == "threads") base.threads = value.get<int>();
      else throw InputError("config: unknown key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return base;
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
  }
}

/// Registration inputs after optional demeaning: the mesh is expressed about its centroid and
/// the pose is re-expressed so every vertex projects exactly where it did before.
struct Scene {
  Mesh mesh;
  Pose registration_pose;
  CameraIntrinsics intrinsics;
  std::optional<Vec3> centroid;
};

inline Scene load_scene(const PipelineConfig& config) {
  Scene scene;
  scene.mesh = load_mesh(config.mesh_path);
  scene.registration_pose = load_pose(config.pose_path);
  scene.intrinsics = load_intrinsics(config.intrinsics_path);
  if (config.demean_mesh) {
    DemeanResult d = demean(scene.mesh);
    scene.mesh = std::move(d.mesh);
    scene.centroid = d.centroid;
    scene.registration_pose.translation += scene.registration_pose.rotation * d.centroid;
  }
  return scene;
}

struct TexturedScene {
  Scene scene;  // scene.mesh carries the sampled colors
  TexturingResult texturing;
};

inline TexturedScene texture_scene(const PipelineConfig& config) {
  config.validate();
  Scene scene = load_scene(config);
  const FrameImage frame = read_png(config.frame_path);
  TexturingOptions opts;
  opts.fallback_color = config.fallback_color;
  opts.depth_epsilon = config.depth_epsilon;
  opts.depth_pass = config.render_settings(config.threads);
  opts.threads = config.threads;
  TexturingResult result;
  try {
    result = texture_mesh(scene.mesh, frame, scene.registration_pose, scene.intrinsics, opts);
  } catch (const InputError& e) {
    throw InputError(config.frame_path.string() + ": " + e.what());
  }
  scene.mesh = result.mesh;
  return {std::move(scene), std::move(result)};
}

inline Json centroid_json(const std::optional<Vec3>& c) {
  return c ? Json::array({c->x(), c->y(), c->z()}) : Json(nullptr);
}

inline void write_texturing_outputs(const TexturedScene& ts, const fs::path& dir) {
  ensure_directory(dir);
  save_mesh(ts.scene.mesh, dir / "textured_mesh.ply", MeshFormat::ply);
  Json vis = Json::array();
  for (bool v : ts.texturing.visibility()) vis.push_back(v);
  write_json_file(dir / "visibility.json", vis);
  Json report = to_json(ts.texturing.report);
  report["registration_pose"] = to_json(ts.scene.registration_pose);
  report["mesh_centroid"] = centroid_json(ts.scene.centroid);
  write_json_file(dir / "texturing_report.json", report);
  if (ts.scene.centroid) {
    write_json_file(dir / "centroid.json", Json{{"centroid", centroid_json(ts.scene.centroid)},
                                                {"registration_pose", to_json(ts.scene.registration_pose)}});
  }
}

/// Textures the mesh from the registered frame and writes textured_mesh.ply,
/// visibility.json, texturing_report.json (and centroid.json when demeaning).
inline TexturingReport run_texture(const PipelineConfig& config) {
  const TexturedScene ts = texture_scene(config);
  write_texturing_outputs(ts, config.output_dir);
  return ts.texturing.report;
}

struct ManifestEntry {
  int index = 0;
  std::string image_file;
  Pose pose;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  CameraIntrinsics intrinsics;
  Pose registration_pose;
  std::optional<Vec3> mesh_centroid;
  /// Echoed without output_dir and threads, which never change the generated bytes.
  PipelineConfig config_echo;
  std::string tool_version = kToolVersion;
};

inline std::string frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.png", index);
  return buf;
}

inline Json to_json(const DatasetManifest& m) {
  Json entries = Json::array();
  for (const auto& e : m.entries) {
    entries.push_back(Json{{"index", e.index}, {"image_file", e.image_file}, {"pose", to_json(e.pose)}});
  }
  return Json{{"tool_version", m.tool_version},
              {"intrinsics", to_json(m.intrinsics)},
              {"registration_pose", to_json(m.registration_pose)},
              {"mesh_centroid", centroid_json(m.mesh_centroid)},
              {"config", to_json(m.config_echo, false)},
              {"entries", entries}};
}

inline DatasetManifest manifest_from_json(const Json& j) {
  try {
    DatasetManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    m.registration_pose = pose_from_json(j.at("registration_pose"));
    if (const Json& c = j.at("mesh_centroid"); !c.is_null()) {
      m.mesh_centroid = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    }
    m.config_echo = config_from_json(j.at("config"));
    for (const Json& e : j.at("entries")) {
      m.entries.push_back({e.at("index").get<int>(), e.at("image_file").get<std::string>(), pose_from_json(e.at("pose"))});
    }
    return m;
  } catch (const Json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
}

/// Textures the mesh, samples pose_count poses around the registration pose, renders
/// frame_NNNNNN.png for each, and writes manifest.json. Poses in the manifest are
/// world-to-camera transforms of the (demeaned, when enabled) textured mesh.
inline DatasetManifest run_dataset(const PipelineConfig& config) {
  const TexturedScene ts = texture_scene(config);
  write_texturing_outputs(ts, config.output_dir);

  const std::vector<Pose> poses = sample_poses(
      ts.scene.registration_pose,
      {config.pose_count, config.max_rotation, config.max_translation, config.seed});

  DatasetManifest manifest;
  manifest.intrinsics = ts.scene.intrinsics;
  manifest.registration_pose = ts.scene.registration_pose;
  manifest.mesh_centroid = ts.scene.centroid;
  manifest.config_echo = config;
  manifest.entries.resize(poses.size());

  const RenderSettings settings = config.render_settings(1);
  parallel_for(poses.size(), resolve_thread_count(config.threads), [&](std::size_t i) {
    const RenderOutput out = render(ts.scene.mesh, poses[i], ts.scene.intrinsics, settings);
    ManifestEntry& e = manifest.entries[i];
    e.index = static_cast<int>(i);
    e.image_file = frame_file_name(e.index);
    e.pose = poses[i];
    write_png(config.output_dir / e.image_file, out.color);
  });
  write_json_file(config.output_dir / "manifest.json", to_json(manifest));
  return manifest;
}

/// Keeps frame pixels covered by the mesh at the registration pose; everything else turns
/// black. Writes masked_frame.png and mask.png.
inline RgbImage run_mask(const PipelineConfig& config) {
  config.validate();
  const Scene scene = load_scene(config);
  const FrameImage frame = read_png(config.frame_path);
  if (frame.width() != scene.intrinsics.width || frame.height() != scene.intrinsics.height) {
    throw InputError(config.frame_path.string() + ": frame size does not match intrinsics");
  }
  const MaskRaster mask =
      render_mask(scene.mesh, scene.registration_pose, scene.intrinsics, config.render_settings(config.threads));
  RgbImage masked(frame.width(), frame.height());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      if (mask(x, y)) masked.set(x, y, frame.at(x, y));
    }
  }
  ensure_directory(config.output_dir);
  write_png(config.output_dir / "masked_frame.png", masked);
  write_png(config.output_dir / "mask.png", mask_to_image(mask));
  return masked;
}

struct MetricsConfig {
  fs::path real_dir;
  fs::path synthetic_dir;
  std::optional<fs::path> mask_dir;
  std::optional<fs::path> real_features;
  std::optional<fs::path> synthetic_features;
  std::optional<fs::path> output_path;
  int threads = 0;
};

/// PNG files in `dir`, sorted by file name.
inline std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return out;
}

/// Pairs images by sorted file name and writes the MetricReport JSON (when output_path is set).
inline MetricReport run_metrics(const MetricsConfig& config) {
  const auto real_files = list_pngs(config.real_dir);
  const auto synth_files = list_pngs(config.synthetic_dir);
  if (real_files.size() != synth_files.size()) {
    throw InputError("metrics: " + std::to_string(real_files.size()) + " images in '" + config.real_dir.string() +
                     "' but " + std::to_string(synth_files.size()) + " in '" + config.synthetic_dir.string() + "'");
  }
  std::vector<RgbImage> real(real_files.size()), synth(synth_files.size());
  std::vector<MaskRaster> masks;
  const int threads = resolve_thread_count(config.threads);
  parallel_for(real_files.size(), threads, [&](std::size_t i) {
    real[i] = read_png(real_files[i]);
    synth[i] = read_png(synth_files[i]);
    if (real[i].width() != synth[i].width() || real[i].height() != synth[i].height()) {
      throw InputError("metrics: size mismatch between '" + real_files[i].string() + "' and '" +
                       synth_files[i].string() + "'");
    }
  });
  if (config.mask_dir) {
    const auto mask_files = list_pngs(*config.mask_dir);
    if (mask_files.size() != real_files.size()) {
      throw InputError("metrics: mask count " + std::to_string(mask_files.size()) + " does not match pair count " +
                       std::to_string(real_files.size()));
    }
    for (const auto& f : mask_files) masks.push_back(image_to_mask(read_png(f)));
  }
  if (config.real_features.has_value() != config.synthetic_features.has_value()) {
    throw InputError("metrics: --real-features and --synthetic-features must be given together");
  }
  EvaluationInputs in;
  in.real_images = real;
  in.synthetic_images = synth;
  in.masks = masks;
  if (config.real_features) {
    in.real_features = load_features(*config.real_features);
    in.synthetic_features = load_features(*config.synthetic_features);
  }
  in.threads = threads;
  const MetricReport report = evaluate_set(in);
  if (config.output_path) write_json_file(*config.output_path, to_json(report));
  return report;
}

/// Writes phantom.ply (uncolored), phantom_colored.ply, intrinsics.json,
/// registration_pose.json and frame.png (ground-truth render at the registration pose).
inline Phantom run_phantom(PhantomKind kind, int resolution, std::uint64_t seed, const fs::path& dir) {
  Phantom p = make_phantom(kind, resolution, seed);
  ensure_directory(dir);
  save_mesh(p.mesh, dir / "phantom.ply", MeshFormat::ply);
  save_mesh(p.colored, dir / "phantom_colored.ply", MeshFormat::ply);
  const CameraIntrinsics k = phantom_intrinsics();
  const Pose pose = phantom_registration_pose();
  write_json_file(dir / "intrinsics.json", to_json(k));
  write_json_file(dir / "registration_pose.json", to_json(pose));
  write_png(dir / "frame.png", render(p.colored, pose, k).color);
  return p;
}

}  // namespace synthview
