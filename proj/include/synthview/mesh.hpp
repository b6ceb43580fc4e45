#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "synthview/error.hpp"
#include "synthview/image.hpp"

namespace synthview {

using Vec3 = Eigen::Vector3d;
using Triangle = std::array<std::uint32_t, 3>;

/// Triangle mesh with optional per-vertex colors. Units are millimeters.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::optional<std::vector<Rgb8>> colors;

  [[nodiscard]] std::size_t vertex_count() const noexcept { return vertices.size(); }
  [[nodiscard]] bool has_colors() const noexcept { return colors.has_value(); }
};

/// Throws InputError if any structural invariant is violated.
inline void validate(const Mesh& mesh) {
  const std::size_t n = mesh.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& v = mesh.vertices[i];
    if (!std::isfinite(v.x()) || !std::isfinite(v.y()) || !std::isfinite(v.z())) {
      throw InputError("vertex " + std::to_string(i) + " has a non-finite coordinate");
    }
  }
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (std::uint32_t idx : mesh.triangles[t]) {
      if (idx >= n) {
        throw InputError("triangle " + std::to_string(t) + " references vertex " + std::to_string(idx) +
                         " but the mesh has " + std::to_string(n) + " vertices");
      }
    }
  }
  if (mesh.colors && mesh.colors->size() != n) {
    throw InputError("color count " + std::to_string(mesh.colors->size()) + " does not match vertex count " +
                     std::to_string(n));
  }
}

/// validate() plus the size requirements for rendering.
inline void validate_renderable(const Mesh& mesh) {
  validate(mesh);
  if (mesh.vertices.size() < 3 || mesh.triangles.empty()) {
    throw InputError("a renderable mesh needs at least 3 vertices and 1 triangle");
  }
}

/// Repeated indices make a triangle degenerate regardless of geometry.
[[nodiscard]] inline bool has_repeated_index(const Triangle& t) noexcept {
  return t[0] == t[1] || t[1] == t[2] || t[0] == t[2];
}

}  // namespace synthview
