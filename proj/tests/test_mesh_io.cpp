#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "synthview/mesh_io.hpp"
#include "test_util.hpp"

using namespace synthview;
using testutil::TempDir;
using testutil::write_text;

namespace {

constexpr const char* kAsciiTriangle =
    "ply\n"
    "format ascii 1.0\n"
    "comment one triangle\n"
    "element vertex 3\n"
    "property float x\nproperty float y\nproperty float z\n"
    "element face 1\n"
    "property list uchar int vertex_indices\n"
    "end_header\n"
    "0 0 0\n1 0 0\n0 1 0\n"
    "3 0 1 2\n";

// Reference binary PLY writer, assembled byte by byte, with float positions and uchar colors
// interleaved with an extra property the loader must skip.
std::string reference_binary_ply(const std::vector<std::array<float, 3>>& pos, const std::vector<Rgb8>& col,
                                 const std::vector<std::array<int, 3>>& faces) {
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(pos.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\nproperty float confidence\n"
                    "property uchar red\nproperty uchar green\nproperty uchar blue\n"
                    "element face " + std::to_string(faces.size()) +
                    "\nproperty list uchar uint vertex_indices\nend_header\n";
  auto put = [&](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
  for (std::size_t i = 0; i < pos.size(); ++i) {
    put(pos[i].data(), 12);
    const float conf = 0.25f;
    put(&conf, 4);
    out.push_back(static_cast<char>(col[i].r));
    out.push_back(static_cast<char>(col[i].g));
    out.push_back(static_cast<char>(col[i].b));
  }
  for (const auto& f : faces) {
    out.push_back(3);
    for (int idx : f) {
      const auto u = static_cast<std::uint32_t>(idx);
      put(&u, 4);
    }
  }
  return out;
}

}  // namespace

TEST(MeshIo, AsciiPlySingleTriangle) {
  const Mesh m = parse_mesh(kAsciiTriangle, MeshFormat::ply);
  ASSERT_EQ(m.vertices.size(), 3u);
  ASSERT_EQ(m.triangles.size(), 1u);
  EXPECT_FALSE(m.has_colors());
  EXPECT_EQ(m.vertices[1], Vec3(1, 0, 0));
  EXPECT_EQ(m.triangles[0], (Triangle{0, 1, 2}));
}

TEST(MeshIo, ObjOutOfRangeFaceIndex) {
  const std::string obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 7\n";
  try {
    parse_mesh(obj, MeshFormat::obj);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("out of range"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos);
  }
}

TEST(MeshIo, ObjNegativeIndicesSlashesAndFanTriangulation) {
  const std::string obj =
      "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf -4/1/1 -3/1/1 -2//1 -1\n";
  const Mesh m = parse_mesh(obj, MeshFormat::obj);
  ASSERT_EQ(m.triangles.size(), 2u);
  EXPECT_EQ(m.triangles[0], (Triangle{0, 1, 2}));
  EXPECT_EQ(m.triangles[1], (Triangle{0, 2, 3}));
}

TEST(MeshIo, ObjZeroIndexRejected) {
  EXPECT_THROW(parse_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", MeshFormat::obj), InputError);
}

TEST(MeshIo, BinaryPlyWithColorsMatchesReferenceWriter) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<float> u(-100.f, 100.f);
  std::uniform_int_distribution<int> ch(0, 255);
  std::vector<std::array<float, 3>> pos;
  std::vector<Rgb8> col;
  for (int i = 0; i < 50; ++i) {
    pos.push_back({u(gen), u(gen), u(gen)});
    col.push_back({static_cast<std::uint8_t>(ch(gen)), static_cast<std::uint8_t>(ch(gen)),
                   static_cast<std::uint8_t>(ch(gen))});
  }
  std::vector<std::array<int, 3>> faces;
  for (int i = 0; i + 2 < 50; i += 3) faces.push_back({i, i + 1, i + 2});

  TempDir dir;
  write_text(dir / "ref.ply", reference_binary_ply(pos, col, faces));
  const Mesh m = load_mesh(dir / "ref.ply");
  ASSERT_TRUE(m.has_colors());
  ASSERT_EQ(m.vertices.size(), pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_EQ(m.vertices[i][k], static_cast<double>(pos[i][k]));
    EXPECT_EQ((*m.colors)[i], col[i]);
  }
  ASSERT_EQ(m.triangles.size(), faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) EXPECT_EQ(m.triangles[f][k], static_cast<std::uint32_t>(faces[f][k]));
  }
}

TEST(MeshIo, BigEndianPlyRejected) {
  const std::string ply =
      "ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\n"
      "property float z\nend_header\n";
  try {
    parse_mesh(ply, MeshFormat::ply);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("big_endian"), std::string::npos);
  }
}

TEST(MeshIo, MalformedAsciiReportsLine) {
  std::string bad = kAsciiTriangle;
  bad.replace(bad.find("1 0 0\n"), 6, "1 zz 0\n");
  try {
    parse_mesh(bad, MeshFormat::ply);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("line 12"), std::string::npos) << e.what();
  }
}

TEST(MeshIo, TruncatedBinaryReportsByteOffset) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.triangles = {{0, 1, 2}};
  std::string bytes = detail::encode_ply(m, PlyEncoding::binary_little_endian);
  bytes.resize(bytes.size() - 5);
  try {
    parse_mesh(bytes, MeshFormat::ply);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos) << e.what();
  }
}

TEST(MeshIo, NonFiniteCoordinateRejected) {
  EXPECT_THROW(parse_mesh("v 0 0 nan\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", MeshFormat::obj), InputError);
  std::string ply = kAsciiTriangle;
  ply.replace(ply.find("0 1 0\n"), 6, "0 inf 0\n");
  EXPECT_THROW(parse_mesh(ply, MeshFormat::ply), InputError);
}

TEST(MeshIo, PlyFaceIndexOutOfRange) {
  std::string ply = kAsciiTriangle;
  ply.replace(ply.find("3 0 1 2"), 7, "3 0 1 3");
  EXPECT_THROW(parse_mesh(ply, MeshFormat::ply), InputError);
}

TEST(MeshIo, DegenerateTrianglesAcceptedAtLoad) {
  const Mesh m = parse_mesh("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 1 2\nf 1 2 3\n", MeshFormat::obj);
  EXPECT_EQ(m.triangles.size(), 2u);
}

TEST(MeshIo, MissingFileIsIoError) {
  EXPECT_THROW(load_mesh("/nonexistent/mesh.ply"), IoError);
}

TEST(MeshIo, BinaryRoundTripIsBitExact) {
  Mesh m;
  m.vertices = {{0.1, 0.2, 0.30000000000000004}, {1e-300, -7.25, 3.0}, {1.0 / 3.0, 2.0 / 3.0, -1e10}};
  m.triangles = {{0, 1, 2}};
  TempDir dir;
  save_mesh(m, dir / "m.ply");
  const Mesh back = load_mesh(dir / "m.ply");
  ASSERT_EQ(back.vertices.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(std::memcmp(back.vertices[i].data(), m.vertices[i].data(), sizeof(double) * 3), 0);
  }
  EXPECT_EQ(back.triangles, m.triangles);
}

TEST(MeshIo, ObjDropsColorsWithFlag) {
  std::mt19937_64 gen(3);
  const Mesh m = oracle::random_mesh(gen, 10, 5, true);
  TempDir dir;
  EXPECT_TRUE(save_mesh(m, dir / "m.obj").colors_dropped);
  const Mesh back = load_mesh(dir / "m.obj");
  EXPECT_FALSE(back.has_colors());
  EXPECT_EQ(back.vertices, m.vertices);
  EXPECT_EQ(back.triangles, m.triangles);

  Mesh plain = m;
  plain.colors.reset();
  EXPECT_FALSE(save_mesh(plain, dir / "p.obj").colors_dropped);
}

TEST(MeshIo, RandomMeshRoundTripProperty) {
  std::mt19937_64 gen(2024);
  TempDir dir;
  for (int trial = 0; trial < 3; ++trial) {
    const Mesh m = oracle::random_mesh(gen, 10000, 15000, trial != 1);
    for (PlyEncoding enc : {PlyEncoding::binary_little_endian, PlyEncoding::ascii}) {
      save_mesh(m, dir / "r.ply", MeshFormat::ply, {enc});
      const Mesh back = load_mesh(dir / "r.ply");
      EXPECT_EQ(back.vertices, m.vertices);
      EXPECT_EQ(back.triangles, m.triangles);
      EXPECT_EQ(back.colors, m.colors);
    }
  }
}

TEST(Demean, TwoPointExample) {
  Mesh m;
  m.vertices = {{1, 1, 1}, {3, 3, 3}};
  const DemeanResult d = demean(m);
  EXPECT_EQ(d.centroid, Vec3(2, 2, 2));
  EXPECT_EQ(d.mesh.vertices[0], Vec3(-1, -1, -1));
  EXPECT_EQ(d.mesh.vertices[1], Vec3(1, 1, 1));
}

TEST(Demean, CenteredMeshUnchanged) {
  Mesh m;
  m.vertices = {{-1, 2, 0}, {1, -2, 0}, {0, 0, 3}, {0, 0, -3}};
  m.triangles = {{0, 1, 2}};
  const DemeanResult d = demean(m);
  EXPECT_LT(d.centroid.norm(), 1e-15);
  EXPECT_EQ(d.mesh.vertices, m.vertices);
}

TEST(Demean, EmptyMeshRejected) { EXPECT_THROW(demean(Mesh{}), InputError); }

TEST(Demean, RandomMeshProperties) {
  std::mt19937_64 gen(77);
  Mesh m = oracle::random_mesh(gen, 1000, 10, true);
  for (Vec3& v : m.vertices) v += Vec3(1234.5, -987.25, 42.0);
  const DemeanResult d = demean(m);

  Vec3 mean = Vec3::Zero();
  for (const Vec3& v : d.mesh.vertices) mean += v;
  mean /= static_cast<double>(d.mesh.vertices.size());
  EXPECT_LT(mean.norm(), 1e-9);

  EXPECT_EQ(d.mesh.triangles, m.triangles);
  EXPECT_EQ(d.mesh.colors, m.colors);
  EXPECT_LT(demean(d.mesh).centroid.norm(), 1e-9);

  for (int k = 0; k < 200; ++k) {
    const std::size_t i = gen() % 1000, j = gen() % 1000;
    const double before = (m.vertices[i] - m.vertices[j]).norm();
    const double after = (d.mesh.vertices[i] - d.mesh.vertices[j]).norm();
    EXPECT_NEAR(before, after, 1e-9 * std::max(1.0, before));
  }
}
