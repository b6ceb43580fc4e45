#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

#include "synthview/camera.hpp"
#include "synthview/error.hpp"
#include "synthview/mesh.hpp"
#include "synthview/pose_sampler.hpp"

namespace synthview {

enum class PhantomKind { hemisphere_cavity, quad, two_triangles };

inline PhantomKind parse_phantom_kind(std::string_view name) {
  if (name == "hemisphere_cavity") return PhantomKind::hemisphere_cavity;
  if (name == "quad") return PhantomKind::quad;
  if (name == "two_triangles") return PhantomKind::two_triangles;
  throw InputError("unknown phantom kind '" + std::string(name) + "' (expected hemisphere_cavity, quad, two_triangles)");
}

struct Phantom {
  Mesh mesh;     // uncolored
  Mesh colored;  // same geometry with the ground-truth color field
};

/// Cavity geometry, millimeters.
inline constexpr double kCavityRadius = 10.0;
inline constexpr double kPlateRadius = 25.0;

/// hemisphere_cavity at resolution r: one pole vertex plus 2r rings of 4r vertices.
inline std::size_t hemisphere_vertex_count(int r) { return 1 + 8 * static_cast<std::size_t>(r) * r; }
/// 4r fan triangles plus 2 per quad over (2r - 1) ring gaps: 4r(4r - 1).
inline std::size_t hemisphere_triangle_count(int r) { return 4 * static_cast<std::size_t>(r) * (4 * r - 1); }

namespace detail {

/// Smooth RGB field over (x, y) with seed-dependent phases.
struct ColorField {
  double phase[3];

  explicit ColorField(std::uint64_t seed) {
    Rng rng(seed);
    for (double& p : phase) p = 2.0 * std::numbers::pi * rng.uniform();
  }

  [[nodiscard]] Rgb8 operator()(const Vec3& p) const {
    const auto q = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
    return {q(128.0 + 100.0 * std::sin(0.15 * p.x() + phase[0])),
            q(128.0 + 100.0 * std::sin(0.13 * p.y() + phase[1])),
            q(128.0 + 80.0 * std::sin(0.09 * (p.x() - p.y()) + phase[2]))};
  }
};

/// A spherical bowl of radius kCavityRadius opening toward -z (rim at z = 0, floor at
/// z = +kCavityRadius), surrounded by a flat annular plate out to kPlateRadius.
inline Mesh hemisphere_cavity(int r) {
  const int segments = 4 * r;
  Mesh mesh;
  mesh.vertices.reserve(hemisphere_vertex_count(r));
  mesh.vertices.emplace_back(0.0, 0.0, kCavityRadius);
  for (int ring = 1; ring <= 2 * r; ++ring) {
    double radius = 0.0, z = 0.0;
    if (ring <= r) {
      const double theta = 0.5 * std::numbers::pi * ring / r;
      radius = kCavityRadius * std::sin(theta);
      z = ring == r ? 0.0 : kCavityRadius * std::cos(theta);
    } else {
      radius = kCavityRadius + (kPlateRadius - kCavityRadius) * (ring - r) / r;
    }
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / segments;
      mesh.vertices.emplace_back(radius * std::cos(phi), radius * std::sin(phi), z);
    }
  }
  const auto at = [segments](int ring, int s) {
    return static_cast<std::uint32_t>(1 + (ring - 1) * segments + (s % segments));
  };
  mesh.triangles.reserve(hemisphere_triangle_count(r));
  for (int s = 0; s < segments; ++s) mesh.triangles.push_back({0, at(1, s), at(1, s + 1)});
  for (int ring = 1; ring < 2 * r; ++ring) {
    for (int s = 0; s < segments; ++s) {
      const auto a = at(ring, s), b = at(ring, s + 1), c = at(ring + 1, s + 1), d = at(ring + 1, s);
      mesh.triangles.push_back({a, d, c});
      mesh.triangles.push_back({a, c, b});
    }
  }
  return mesh;
}

inline Mesh quad() {
  Mesh mesh;
  mesh.vertices = {{-10.0, -10.0, 0.0}, {10.0, -10.0, 0.0}, {10.0, 10.0, 0.0}, {-10.0, 10.0, 0.0}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  return mesh;
}

/// A large triangle at z = 0 in front of a smaller parallel one at z = 5.
inline Mesh two_triangles() {
  Mesh mesh;
  mesh.vertices = {{-10.0, -10.0, 0.0}, {10.0, -10.0, 0.0}, {0.0, 10.0, 0.0},
                   {-4.0, -4.0, 5.0},   {4.0, -4.0, 5.0},   {0.0, 4.0, 5.0}};
  mesh.triangles = {{0, 1, 2}, {3, 4, 5}};
  return mesh;
}

}  // namespace detail

/// Procedural stand-in surfaces. `resolution` only shapes hemisphere_cavity; `seed` picks
/// the phases of the ground-truth color field.
inline Phantom make_phantom(PhantomKind kind, int resolution, std::uint64_t seed) {
  if (resolution < 1) throw InputError("phantom resolution must be >= 1");
  Phantom out;
  switch (kind) {
    case PhantomKind::hemisphere_cavity: out.mesh = detail::hemisphere_cavity(resolution); break;
    case PhantomKind::quad: out.mesh = detail::quad(); break;
    case PhantomKind::two_triangles: out.mesh = detail::two_triangles(); break;
  }
  out.colored = out.mesh;
  const detail::ColorField field(seed);
  auto& colors = out.colored.colors.emplace();
  colors.reserve(out.mesh.vertices.size());
  for (const Vec3& v : out.mesh.vertices) colors.push_back(field(v));
  return out;
}

/// 640x480 camera looking down +z at the phantom origin from 40 mm.
inline CameraIntrinsics phantom_intrinsics() { return {800.0, 800.0, 320.0, 240.0, 640, 480}; }
inline Pose phantom_registration_pose() { return Pose::from_translation({0.0, 0.0, 40.0}); }

}  // namespace synthview
