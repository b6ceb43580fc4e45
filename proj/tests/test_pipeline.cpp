#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "synthview/pipeline.hpp"
#include "test_util.hpp"

using namespace synthview;
using testutil::read_bytes;
using testutil::TempDir;

namespace {

PipelineConfig phantom_config(const fs::path& dir, const fs::path& out) {
  PipelineConfig c;
  c.mesh_path = dir / "phantom.ply";
  c.frame_path = dir / "frame.png";
  c.pose_path = dir / "registration_pose.json";
  c.intrinsics_path = dir / "intrinsics.json";
  c.output_dir = out;
  return c;
}

/// Writes mesh, pose and intrinsics for a custom scene, with a caller-supplied frame.
PipelineConfig custom_config(const fs::path& dir, const Mesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                             const RgbImage& frame) {
  save_mesh(mesh, dir / "mesh.ply");
  write_json_file(dir / "pose.json", to_json(pose));
  write_json_file(dir / "intrinsics.json", to_json(k));
  write_png(dir / "frame.png", frame);
  PipelineConfig c;
  c.mesh_path = dir / "mesh.ply";
  c.frame_path = dir / "frame.png";
  c.pose_path = dir / "pose.json";
  c.intrinsics_path = dir / "intrinsics.json";
  c.output_dir = dir / "out";
  return c;
}

std::vector<std::string> dir_listing(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

TEST(Phantom, CountFormulas) {
  for (int r = 1; r <= 8; ++r) {
    const Phantom p = make_phantom(PhantomKind::hemisphere_cavity, r, 0);
    EXPECT_EQ(p.mesh.vertices.size(), hemisphere_vertex_count(r));
    EXPECT_EQ(p.mesh.triangles.size(), hemisphere_triangle_count(r));
    EXPECT_NO_THROW(validate(p.mesh));
    for (const auto& t : p.mesh.triangles) EXPECT_FALSE(has_repeated_index(t));
  }
}

TEST(Phantom, ClosedMeshEdgesSharedTwice) {
  // Each interior edge of the open surface is shared by exactly two triangles; only the
  // outer plate rim is a boundary, with 4r edges.
  const int r = 6;
  const Phantom p = make_phantom(PhantomKind::hemisphere_cavity, r, 0);
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> uses;
  for (const auto& t : p.mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      const auto a = t[i], b = t[(i + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  int boundary = 0;
  for (const auto& [e, n] : uses) {
    EXPECT_LE(n, 2);
    boundary += n == 1;
  }
  EXPECT_EQ(boundary, 4 * r);
}

TEST(Phantom, QuadAndTwoTriangles) {
  const Phantom q = make_phantom(PhantomKind::quad, 5, 0);
  EXPECT_EQ(q.mesh.vertices.size(), 4u);
  EXPECT_EQ(q.mesh.triangles.size(), 2u);
  const Phantom t = make_phantom(PhantomKind::two_triangles, 1, 0);
  EXPECT_EQ(t.mesh.vertices.size(), 6u);
  EXPECT_EQ(t.mesh.triangles.size(), 2u);
  EXPECT_EQ(parse_phantom_kind("quad"), PhantomKind::quad);
  EXPECT_THROW(parse_phantom_kind("sphere"), InputError);
  EXPECT_THROW(make_phantom(PhantomKind::hemisphere_cavity, 0, 0), InputError);
}

TEST(Phantom, Deterministic) {
  const Phantom a = make_phantom(PhantomKind::hemisphere_cavity, 10, 42);
  const Phantom b = make_phantom(PhantomKind::hemisphere_cavity, 10, 42);
  const Phantom c = make_phantom(PhantomKind::hemisphere_cavity, 10, 43);
  EXPECT_EQ(a.colored.vertices, b.colored.vertices);
  EXPECT_EQ(a.colored.triangles, b.colored.triangles);
  EXPECT_EQ(a.colored.colors, b.colored.colors);
  EXPECT_NE(a.colored.colors, c.colored.colors);
  EXPECT_FALSE(a.mesh.has_colors());
}

TEST(Phantom, RunWritesFiles) {
  TempDir dir;
  run_phantom(PhantomKind::hemisphere_cavity, 8, 1, dir.path());
  EXPECT_EQ(dir_listing(dir.path()), (std::vector<std::string>{"frame.png", "intrinsics.json", "phantom.ply",
                                                               "phantom_colored.ply", "registration_pose.json"}));
  EXPECT_EQ(load_intrinsics(dir.path() / "intrinsics.json"), phantom_intrinsics());
  EXPECT_EQ(load_pose(dir.path() / "registration_pose.json"), phantom_registration_pose());
  EXPECT_TRUE(load_mesh(dir.path() / "phantom_colored.ply").has_colors());
  EXPECT_EQ(read_png(dir.path() / "frame.png").width(), 640);
}

TEST(RunTexture, ConstantGrayQuadAllVisible) {
  TempDir dir;
  const Phantom q = make_phantom(PhantomKind::quad, 1, 0);
  const PipelineConfig c = custom_config(dir.path(), q.mesh, phantom_registration_pose(), phantom_intrinsics(),
                                         RgbImage(640, 480, Rgb8{128, 128, 128}));
  const TexturingReport r = run_texture(c);
  EXPECT_EQ(r.visible_count, 4u);
  const Mesh textured = load_mesh(c.output_dir / "textured_mesh.ply");
  ASSERT_TRUE(textured.has_colors());
  for (const Rgb8& col : *textured.colors) EXPECT_EQ(col, (Rgb8{128, 128, 128}));
  const Json vis = read_json_file(c.output_dir / "visibility.json");
  EXPECT_EQ(vis, Json::parse("[true, true, true, true]"));
  const Json report = read_json_file(c.output_dir / "texturing_report.json");
  EXPECT_EQ(report.at("visible_count"), 4);
  EXPECT_TRUE(report.at("mesh_centroid").is_null());
  EXPECT_FALSE(fs::exists(c.output_dir / "centroid.json"));
}

TEST(RunTexture, FrameSizeMismatch) {
  TempDir dir;
  const Phantom q = make_phantom(PhantomKind::quad, 1, 0);
  const PipelineConfig c = custom_config(dir.path(), q.mesh, phantom_registration_pose(), phantom_intrinsics(),
                                         RgbImage(320, 240, Rgb8{128, 128, 128}));
  EXPECT_THROW(run_texture(c), InputError);
}

TEST(RunTexture, CavityCountsMatchOracle) {
  TempDir dir;
  run_phantom(PhantomKind::hemisphere_cavity, 16, 3, dir.path());
  const PipelineConfig c = phantom_config(dir.path(), dir.path() / "out");
  const TexturingReport r = run_texture(c);
  const Phantom p = make_phantom(PhantomKind::hemisphere_cavity, 16, 3);
  const CameraIntrinsics k = phantom_intrinsics();
  const auto occluded = oracle::occluded_vertices(p.mesh, phantom_registration_pose());
  std::size_t out_of_frame = 0, hidden = 0;
  for (std::size_t i = 0; i < p.mesh.vertices.size(); ++i) {
    const Eigen::Vector3d h = oracle::project_homogeneous(p.mesh.vertices[i], phantom_registration_pose(), k);
    const double x = h.x(), y = h.y();
    if (!(x >= 0.5 && x <= k.width - 0.5 && y >= 0.5 && y <= k.height - 0.5)) {
      ++out_of_frame;
    } else if (occluded[i]) {
      ++hidden;
    }
  }
  EXPECT_EQ(r.out_of_frame_count, out_of_frame);
  EXPECT_EQ(r.occluded_count, hidden);
  EXPECT_EQ(r.behind_camera_count, 0u);
  EXPECT_EQ(r.total(), p.mesh.vertices.size());
}

TEST(RunTexture, DemeanWritesCentroidAndPreservesProjection) {
  TempDir dir;
  Mesh m = make_phantom(PhantomKind::quad, 1, 0).mesh;
  for (Vec3& v : m.vertices) v += Vec3(3, -2, 1);
  const Pose pose = Pose::from_translation({-3, 2, 39});
  PipelineConfig c = custom_config(dir.path(), m, pose, phantom_intrinsics(), RgbImage(640, 480, Rgb8{9, 9, 9}));
  c.demean_mesh = true;
  const TexturingReport r = run_texture(c);
  EXPECT_EQ(r.visible_count, 4u);
  const Json centroid = read_json_file(c.output_dir / "centroid.json").at("centroid");
  ASSERT_TRUE(centroid.is_array());
  EXPECT_NEAR(centroid[0].get<double>(), 3.0, 1e-12);
  EXPECT_NEAR(centroid[1].get<double>(), -2.0, 1e-12);
  EXPECT_NEAR(centroid[2].get<double>(), 1.0, 1e-12);
  const Json report = read_json_file(c.output_dir / "texturing_report.json");
  const Pose adjusted = pose_from_json(report.at("registration_pose"));
  EXPECT_NEAR(adjusted.translation.z(), 40.0, 1e-12);
}

TEST(RunDataset, ZeroPerturbationMatchesRegistrationRender) {
  TempDir dir;
  run_phantom(PhantomKind::hemisphere_cavity, 16, 5, dir.path());
  const PipelineConfig c = phantom_config(dir.path(), dir.path() / "ds");
  const DatasetManifest m = run_dataset(c);
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].pose, phantom_registration_pose());
  const Mesh textured = load_mesh(c.output_dir / "textured_mesh.ply");
  const RgbImage expect = render(textured, phantom_registration_pose(), phantom_intrinsics()).color;
  EXPECT_EQ(read_png(c.output_dir / "frame_000000.png"), expect);
}

TEST(RunDataset, ByteIdenticalAcrossRunsAndThreads) {
  TempDir dir;
  run_phantom(PhantomKind::hemisphere_cavity, 12, 6, dir.path());
  PipelineConfig c = phantom_config(dir.path(), dir.path() / "a");
  c.pose_count = 6;
  c.max_rotation = 15;
  c.max_translation = 4;
  c.seed = 99;
  c.threads = 1;
  run_dataset(c);
  c.output_dir = dir.path() / "b";
  c.threads = 4;
  run_dataset(c);
  const auto names = dir_listing(dir.path() / "a");
  EXPECT_EQ(names, dir_listing(dir.path() / "b"));
  EXPECT_EQ(std::count_if(names.begin(), names.end(), [](const std::string& n) { return n.starts_with("frame_"); }), 6);
  for (const auto& n : names) {
    EXPECT_EQ(read_bytes(dir.path() / "a" / n), read_bytes(dir.path() / "b" / n)) << n;
  }
  c.output_dir = dir.path() / "c";
  c.seed = 100;
  run_dataset(c);
  EXPECT_NE(read_bytes(dir.path() / "a" / "frame_000001.png"), read_bytes(dir.path() / "c" / "frame_000001.png"));
}

TEST(RunDataset, ManifestRoundTripReRenders) {
  TempDir dir;
  run_phantom(PhantomKind::hemisphere_cavity, 12, 7, dir.path());
  PipelineConfig c = phantom_config(dir.path(), dir.path() / "ds");
  c.pose_count = 5;
  c.max_rotation = 20;
  c.max_translation = 5;
  c.seed = 3;
  c.backend = Backend::scanline;
  c.background = {10, 20, 30};
  c.demean_mesh = true;
  run_dataset(c);
  const DatasetManifest m = manifest_from_json(read_json_file(c.output_dir / "manifest.json"));
  EXPECT_EQ(m.tool_version, kToolVersion);
  EXPECT_EQ(m.config_echo.seed, 3u);
  EXPECT_EQ(m.config_echo.backend, Backend::scanline);
  ASSERT_TRUE(m.mesh_centroid);
  const Mesh textured = load_mesh(c.output_dir / "textured_mesh.ply");
  const RenderSettings s = m.config_echo.render_settings(1);
  for (const auto& e : m.entries) {
    EXPECT_EQ(read_png(c.output_dir / e.image_file), render(textured, e.pose, m.intrinsics, s).color) << e.index;
  }
  // Re-serializing the parsed manifest reproduces the file.
  EXPECT_EQ(to_json(m).dump(2) + "\n", read_bytes(c.output_dir / "manifest.json"));
}

TEST(RunDataset, HundredPoseInvariantSweep) {
  TempDir dir;
  run_phantom(PhantomKind::hemisphere_cavity, 16, 8, dir.path());
  PipelineConfig c = phantom_config(dir.path(), dir.path() / "ds");
  c.pose_count = 100;
  c.max_rotation = 30;
  c.max_translation = 5;
  c.seed = 17;
  const DatasetManifest m = run_dataset(c);
  const DatasetManifest loaded = manifest_from_json(read_json_file(c.output_dir / "manifest.json"));
  ASSERT_EQ(loaded.entries.size(), 100u);
  for (int i = 0; i < 100; ++i) {
    const ManifestEntry& e = loaded.entries[static_cast<std::size_t>(i)];
    EXPECT_EQ(e.index, i);
    EXPECT_EQ(e.image_file, frame_file_name(i));
    EXPECT_TRUE(fs::exists(c.output_dir / e.image_file));
    EXPECT_TRUE(e.pose.is_valid(1e-9));
    EXPECT_LE(rotation_angle(compose(e.pose, invert(loaded.registration_pose)).rotation) * 180.0 / std::numbers::pi,
              30.0 + 1e-9);
  }
}

TEST(RunDataset, UnwritableOutput) {
  TempDir dir;
  run_phantom(PhantomKind::quad, 1, 0, dir.path());
  testutil::write_text(dir.path() / "blocker", "x");
  const PipelineConfig c = phantom_config(dir.path(), dir.path() / "blocker" / "sub");
  EXPECT_THROW(run_dataset(c), IoError);
}

TEST(RunMask, FullViewKeepsFrame) {
  TempDir dir;
  Mesh big;
  big.vertices = {{-100, -100, 0}, {100, -100, 0}, {100, 100, 0}, {-100, 100, 0}};
  big.triangles = {{0, 1, 2}, {0, 2, 3}};
  std::mt19937_64 gen(1);
  RgbImage frame(64, 48, Rgb8{});
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x)
      frame.set(x, y, {static_cast<std::uint8_t>(gen()), static_cast<std::uint8_t>(gen()),
                       static_cast<std::uint8_t>(gen())});
  const PipelineConfig c =
      custom_config(dir.path(), big, Pose::from_translation({0, 0, 40}), {80, 80, 32, 24, 64, 48}, frame);
  EXPECT_EQ(run_mask(c), frame);
  EXPECT_EQ(read_png(c.output_dir / "masked_frame.png"), frame);
  EXPECT_EQ(read_png(c.output_dir / "mask.png"), RgbImage(64, 48, Rgb8{255, 255, 255}));
}

TEST(RunMask, OutOfViewIsBlack) {
  TempDir dir;
  const Phantom q = make_phantom(PhantomKind::quad, 1, 0);
  const PipelineConfig c = custom_config(dir.path(), q.mesh, Pose::from_translation({500, 0, 40}),
                                         {80, 80, 32, 24, 64, 48}, RgbImage(64, 48, Rgb8{200, 100, 50}));
  EXPECT_EQ(run_mask(c), RgbImage(64, 48, Rgb8{0, 0, 0}));
}

TEST(RunMask, HalfViewTriangleMatchesCoverageOracle) {
  TempDir dir;
  // Unit-focal camera at depth 1: camera-space (x, y, 1) lands on screen (x, y).
  Mesh tri;
  tri.vertices = {{0, 0, 1}, {32, 0, 1}, {0, 32, 1}};
  tri.triangles = {{0, 1, 2}};
  const RgbImage frame(32, 32, Rgb8{77, 88, 99});
  PipelineConfig c = custom_config(dir.path(), tri, Pose::identity(), {1, 1, 0, 0, 32, 32}, frame);
  c.near_clip = 0.5;
  const RgbImage masked = run_mask(c);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const bool in = oracle::covers_top_left({0, 0}, {32, 0}, {0, 32}, {x + 0.5, y + 0.5});
      EXPECT_EQ(masked.at(x, y), (in ? Rgb8{77, 88, 99} : Rgb8{0, 0, 0})) << x << "," << y;
    }
  }
}

TEST(RunMetrics, DirectoryAgainstItself) {
  TempDir dir;
  run_phantom(PhantomKind::hemisphere_cavity, 8, 2, dir.path());
  PipelineConfig c = phantom_config(dir.path(), dir.path() / "ds");
  c.pose_count = 30;
  c.max_rotation = 10;
  c.seed = 1;
  run_dataset(c);
  fs::create_directories(dir.path() / "imgs");
  for (int i = 0; i < 30; ++i) fs::copy_file(c.output_dir / frame_file_name(i), dir.path() / "imgs" / frame_file_name(i));
  MetricsConfig mc;
  mc.real_dir = dir.path() / "imgs";
  mc.synthetic_dir = dir.path() / "imgs";
  mc.output_path = dir.path() / "metrics.json";
  const MetricReport r = run_metrics(mc);
  EXPECT_EQ(r.per_pair_ssim.size(), 30u);
  EXPECT_NEAR(r.ssim_mean, 1.0, 1e-9);
  const Json j = read_json_file(dir.path() / "metrics.json");
  EXPECT_TRUE(j.at("fid").is_null());
  EXPECT_TRUE(j.at("kid").is_null());
  EXPECT_EQ(j.at("per_pair_ssim").size(), 30u);
}

TEST(RunMetrics, MasksFeaturesAndErrors) {
  TempDir dir;
  const fs::path real = dir.path() / "real", synth = dir.path() / "synth", masks = dir.path() / "masks";
  for (const auto& d : {real, synth, masks}) fs::create_directories(d);
  std::mt19937_64 gen(4);
  for (int i = 0; i < 3; ++i) {
    RgbImage a(24, 24, Rgb8{}), b(24, 24, Rgb8{});
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) {
        const auto v = static_cast<std::uint8_t>(gen());
        a.set(x, y, {v, v, v});
        b.set(x, y, x < 12 ? Rgb8{v, v, v} : Rgb8{static_cast<std::uint8_t>(gen()), 0, 0});
      }
    MaskRaster m(24, 24, 0);
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 7; ++x) m(x, y) = 1;
    write_png(real / frame_file_name(i), a);
    write_png(synth / frame_file_name(i), b);
    write_png(masks / frame_file_name(i), mask_to_image(m));
  }
  save_features(dir.path() / "r.csv", FeatureSet(2, {0, 1, 1, 0, 2, 2}));
  save_features(dir.path() / "s.csv", FeatureSet(2, {0, 1, 1, 0, 2, 2}));
  MetricsConfig mc;
  mc.real_dir = real;
  mc.synthetic_dir = synth;
  mc.mask_dir = masks;
  mc.real_features = dir.path() / "r.csv";
  mc.synthetic_features = dir.path() / "s.csv";
  const MetricReport r = run_metrics(mc);
  // Masked-in window centers (x = 5, 6) only see the identical left half.
  EXPECT_NEAR(r.ssim_mean, 1.0, 1e-9);
  ASSERT_TRUE(r.fid);
  EXPECT_NEAR(*r.fid, 0.0, 1e-9);
  mc.mask_dir.reset();
  EXPECT_LT(run_metrics(mc).ssim_mean, 0.9);

  mc.synthetic_features.reset();
  EXPECT_THROW(run_metrics(mc), InputError);
  mc.real_features.reset();
  fs::remove(synth / frame_file_name(2));
  EXPECT_THROW(run_metrics(mc), InputError);
  mc.synthetic_dir = dir.path() / "nope";
  EXPECT_THROW(run_metrics(mc), IoError);
}

TEST(Config, JsonRoundTripAndValidation) {
  PipelineConfig c;
  c.mesh_path = "m.ply";
  c.frame_path = "f.png";
  c.pose_path = "p.json";
  c.intrinsics_path = "k.json";
  c.seed = 12345678901234ULL;
  c.backend = Backend::scanline;
  c.fallback_color = {1, 2, 3};
  c.max_rotation = 12.5;
  const PipelineConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(config_from_json(Json::parse(R"({"mesh_pathh": "x"})")), InputError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"backend": "opengl"})")), InputError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"pose_count": "many"})")), InputError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"fallback_color": [1, 2, 300]})")), InputError);
  EXPECT_THROW(config_from_json(Json::parse("[1]")), InputError);
  PipelineConfig bad = c;
  bad.pose_count = 0;
  EXPECT_THROW(bad.validate(), InputError);
  bad = c;
  bad.mesh_path.clear();
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(Config, MissingInputsAreIoErrors) {
  TempDir dir;
  PipelineConfig c = phantom_config(dir.path(), dir.path() / "out");
  EXPECT_THROW(run_texture(c), IoError);
}
