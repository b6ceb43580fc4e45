// Command-line front end: texture, dataset, mask, metrics, phantom, render.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "synthview/pipeline.hpp"

namespace {

using namespace synthview;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitIo = 3;

/// Flags shared by the subcommands that run on a PipelineConfig. Unset flags leave the
/// --config values (or defaults) untouched.
struct PipelineFlags {
  std::string config_path;
  std::string mesh, frame, pose, intrinsics, output_dir, backend;
  bool demean = false;
  int pose_count = 0;
  double max_rotation = 0.0, max_translation = 0.0, depth_epsilon = 0.0, near_clip = 0.0;
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<int> fallback_color, background;

  CLI::Option* demean_opt = nullptr;
  CLI::Option* pose_count_opt = nullptr;
  CLI::Option* max_rotation_opt = nullptr;
  CLI::Option* max_translation_opt = nullptr;
  CLI::Option* depth_epsilon_opt = nullptr;
  CLI::Option* near_clip_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file; flags override its values");
    app->add_option("--mesh", mesh, "Input mesh (.ply or .obj)");
    app->add_option("--frame", frame, "Registered frame (PNG)");
    app->add_option("--pose", pose, "Registration pose JSON");
    app->add_option("--intrinsics", intrinsics, "Camera intrinsics JSON");
    app->add_option("-o,--output-dir", output_dir, "Output directory");
    app->add_option("--backend", backend, "Rasterizer backend: edge_function | scanline");
    demean_opt = app->add_flag("--demean", demean, "Center the mesh on its vertex mean first");
    pose_count_opt = app->add_option("--pose-count", pose_count, "Number of poses to sample");
    max_rotation_opt = app->add_option("--max-rotation", max_rotation, "Max perturbation angle, degrees");
    max_translation_opt = app->add_option("--max-translation", max_translation, "Max perturbation per axis, mm");
    seed_opt = app->add_option("--seed", seed, "Pose sampling seed");
    depth_epsilon_opt = app->add_option("--depth-epsilon", depth_epsilon, "Visibility depth tolerance, mm");
    near_clip_opt = app->add_option("--near-clip", near_clip, "Near clipping plane, mm");
    app->add_option("--fallback-color", fallback_color, "Color for unseen vertices: R G B")->expected(3);
    app->add_option("--background", background, "Background color: R G B")->expected(3);
    threads_opt = app->add_option("--threads", threads, "Worker threads (0 = auto)");
  }

  [[nodiscard]] PipelineConfig resolve() const {
    PipelineConfig c;
    if (!config_path.empty()) c = config_from_json(read_json_file(config_path));
    if (!mesh.empty()) c.mesh_path = mesh;
    if (!frame.empty()) c.frame_path = frame;
    if (!pose.empty()) c.pose_path = pose;
    if (!intrinsics.empty()) c.intrinsics_path = intrinsics;
    if (!output_dir.empty()) c.output_dir = output_dir;
    if (!backend.empty()) c.backend = parse_backend(backend);
    if (demean_opt->count()) c.demean_mesh = demean;
    if (pose_count_opt->count()) c.pose_count = pose_count;
    if (max_rotation_opt->count()) c.max_rotation = max_rotation;
    if (max_translation_opt->count()) c.max_translation = max_translation;
    if (seed_opt->count()) c.seed = seed;
    if (depth_epsilon_opt->count()) c.depth_epsilon = depth_epsilon;
    if (near_clip_opt->count()) c.near_clip = near_clip;
    if (threads_opt->count()) c.threads = threads;
    if (!fallback_color.empty()) c.fallback_color = rgb_from_json(Json(fallback_color));
    if (!background.empty()) c.background = rgb_from_json(Json(background));
    return c;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Texture a mesh from a registered frame and render synthetic multi-view datasets."};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  PipelineFlags texture_flags, dataset_flags, mask_flags;
  auto* texture_cmd = app.add_subcommand("texture", "Color mesh vertices from the registered frame");
  texture_flags.attach(texture_cmd);
  auto* dataset_cmd = app.add_subcommand("dataset", "Texture, sample poses, render frames and a manifest");
  dataset_flags.attach(dataset_cmd);
  auto* mask_cmd = app.add_subcommand("mask", "Black out frame pixels not covered by the registered mesh");
  mask_flags.attach(mask_cmd);

  MetricsConfig metrics;
  std::string mask_dir, real_features, synthetic_features, metrics_out;
  auto* metrics_cmd = app.add_subcommand("metrics", "SSIM over paired images, FID/KID over feature files");
  metrics_cmd->add_option("--real-dir", metrics.real_dir, "Directory of real PNGs")->required();
  metrics_cmd->add_option("--synthetic-dir", metrics.synthetic_dir, "Directory of synthetic PNGs")->required();
  metrics_cmd->add_option("--mask-dir", mask_dir, "Directory of mask PNGs (nonzero = in mask)");
  metrics_cmd->add_option("--real-features", real_features, "Real embeddings (.csv or binary)");
  metrics_cmd->add_option("--synthetic-features", synthetic_features, "Synthetic embeddings (.csv or binary)");
  metrics_cmd->add_option("-o,--output", metrics_out, "Report JSON path");
  metrics_cmd->add_option("--threads", metrics.threads, "Worker threads (0 = auto)");

  std::string phantom_kind = "hemisphere_cavity", phantom_dir;
  int phantom_resolution = 32;
  std::uint64_t phantom_seed = 0;
  auto* phantom_cmd = app.add_subcommand("phantom", "Write a procedural test scene");
  phantom_cmd->add_option("--kind", phantom_kind, "hemisphere_cavity | quad | two_triangles")->capture_default_str();
  phantom_cmd->add_option("--resolution", phantom_resolution, "Tessellation level")->capture_default_str();
  phantom_cmd->add_option("--seed", phantom_seed, "Color field seed")->capture_default_str();
  phantom_cmd->add_option("-o,--output-dir", phantom_dir, "Output directory")->required();

  std::string render_mesh, render_pose, render_intrinsics, render_out, render_depth_out, render_mask_out;
  std::string render_backend = "edge_function";
  std::vector<int> render_background;
  double render_near = 1.0;
  int render_threads = 0;
  auto* render_cmd = app.add_subcommand("render", "Render a colored mesh at a single pose");
  render_cmd->add_option("--mesh", render_mesh, "Colored mesh (.ply)")->required();
  render_cmd->add_option("--pose", render_pose, "Pose JSON")->required();
  render_cmd->add_option("--intrinsics", render_intrinsics, "Intrinsics JSON")->required();
  render_cmd->add_option("-o,--output", render_out, "Output PNG")->required();
  render_cmd->add_option("--depth", render_depth_out, "Also write the depth raster (float32 + JSON header)");
  render_cmd->add_option("--mask", render_mask_out, "Also write the coverage mask PNG");
  render_cmd->add_option("--backend", render_backend, "edge_function | scanline")->capture_default_str();
  render_cmd->add_option("--background", render_background, "Background color: R G B")->expected(3);
  render_cmd->add_option("--near-clip", render_near, "Near clipping plane, mm")->capture_default_str();
  render_cmd->add_option("--threads", render_threads, "Worker threads (0 = auto)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*texture_cmd) {
      const TexturingReport report = run_texture(texture_flags.resolve());
      std::cout << to_json(report).dump(2) << '\n';
    } else if (*dataset_cmd) {
      const DatasetManifest m = run_dataset(dataset_flags.resolve());
      std::cout << "wrote " << m.entries.size() << " frames and manifest.json to "
                << m.config_echo.output_dir.string() << '\n';
    } else if (*mask_cmd) {
      const PipelineConfig c = mask_flags.resolve();
      run_mask(c);
      std::cout << "wrote " << (c.output_dir / "masked_frame.png").string() << '\n';
    } else if (*metrics_cmd) {
      if (!mask_dir.empty()) metrics.mask_dir = mask_dir;
      if (!real_features.empty()) metrics.real_features = real_features;
      if (!synthetic_features.empty()) metrics.synthetic_features = synthetic_features;
      if (!metrics_out.empty()) metrics.output_path = metrics_out;
      std::cout << to_json(run_metrics(metrics)).dump(2) << '\n';
    } else if (*phantom_cmd) {
      const Phantom p = run_phantom(parse_phantom_kind(phantom_kind), phantom_resolution, phantom_seed, phantom_dir);
      std::cout << "phantom: " << p.mesh.vertices.size() << " vertices, " << p.mesh.triangles.size()
                << " triangles\n";
    } else if (*render_cmd) {
      const Mesh mesh = load_mesh(render_mesh);
      RenderSettings s;
      s.backend = parse_backend(render_backend);
      s.near_clip = render_near;
      s.threads = render_threads;
      if (!render_background.empty()) s.background = rgb_from_json(Json(render_background));
      const RenderOutput out = render(mesh, load_pose(render_pose), load_intrinsics(render_intrinsics), s);
      write_png(render_out, out.color);
      if (!render_depth_out.empty()) save_depth(render_depth_out, out.depth);
      if (!render_mask_out.empty()) write_png(render_mask_out, mask_to_image(out.mask));
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
}
