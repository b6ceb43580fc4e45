#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "synthview/error.hpp"
#include "synthview/mesh.hpp"

namespace synthview {

using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics in pixels. Pixel (i, j) has its center at (i + 0.5, j + 0.5),
/// x to the right, y down.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
      throw InputError("intrinsics: fx and fy must be positive and finite");
    }
    if (!std::isfinite(cx) || !std::isfinite(cy)) {
      throw InputError("intrinsics: principal point must be finite");
    }
    if (width < 1 || height < 1) {
      throw InputError("intrinsics: width and height must be at least 1");
    }
  }

  /// 3x3 upper-triangular K.
  [[nodiscard]] Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Rigid world-to-camera transform: p_cam = rotation * p_world + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  static Pose from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  /// True when the rotation is orthonormal with det +1 and everything is finite.
  [[nodiscard]] bool is_valid(double tol = 1e-9) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const Mat3 gram = rotation.transpose() * rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol;
  }

  void validate(double tol = 1e-9) const {
    if (!is_valid(tol)) {
      throw InputError("pose: rotation must be orthonormal with determinant +1 and all entries finite");
    }
  }

  bool operator==(const Pose& other) const {
    return rotation == other.rotation && translation == other.translation;
  }
};

/// Pose that applies b first, then a.
inline Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline Pose invert(const Pose& p) {
  const Mat3 rt = p.rotation.transpose();
  return {rt, -(rt * p.translation)};
}

/// Rotation angle of R in radians, in [0, pi]. Stable near 0 and pi.
inline double rotation_angle(const Mat3& r) {
  const Vec3 axis_sin(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * axis_sin.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

struct ProjectedVertex {
  double x = 0.0;
  double y = 0.0;
  /// Camera-space z (the homogeneous w of the projection).
  double depth = 0.0;
  /// False when depth <= 0; x and y are then meaningless.
  bool valid = false;
};

inline ProjectedVertex project_point(const Vec3& world, const Pose& pose, const CameraIntrinsics& k) {
  const Vec3 p = pose.apply(world);
  const double u = k.fx * p.x() + k.cx * p.z();
  const double v = k.fy * p.y() + k.cy * p.z();
  const double w = p.z();
  ProjectedVertex out;
  out.depth = w;
  if (w > 0.0) {
    out.x = u / w;
    out.y = v / w;
    out.valid = true;
  }
  return out;
}

inline std::vector<ProjectedVertex> project_vertices(std::span<const Vec3> vertices, const Pose& pose,
                                                     const CameraIntrinsics& intrinsics) {
  std::vector<ProjectedVertex> out;
  out.reserve(vertices.size());
  for (const Vec3& v : vertices) out.push_back(project_point(v, pose, intrinsics));
  return out;
}

}  // namespace synthview
