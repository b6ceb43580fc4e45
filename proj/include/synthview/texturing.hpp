#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthview/camera.hpp"
#include "synthview/error.hpp"
#include "synthview/image.hpp"
#include "synthview/mesh.hpp"
#include "synthview/parallel.hpp"
#include "synthview/rasterizer.hpp"

namespace synthview {

using FrameImage = RgbImage;
using RgbSample = std::array<double, 3>;

namespace detail {

struct AxisTaps {
  int i0;
  int i1;
  double t;  // weight of i1
};

/// Neighboring pixel centers around continuous coordinate `v` along an axis of n pixels.
inline std::optional<AxisTaps> axis_taps(double v, int n) {
  const double s = v - 0.5;
  if (!(s >= 0.0 && s <= static_cast<double>(n - 1))) return std::nullopt;
  const int i0 = std::min(static_cast<int>(std::floor(s)), std::max(n - 2, 0));
  const int i1 = std::min(i0 + 1, n - 1);
  return AxisTaps{i0, i1, s - static_cast<double>(i0)};
}

}  // namespace detail

/// Bilinear interpolation between the four surrounding pixel centers. Returns nullopt when
/// (x, y) lies outside the hull of pixel centers, [0.5, w - 0.5] x [0.5, h - 0.5].
inline std::optional<RgbSample> bilinear_sample(const FrameImage& image, double x, double y) {
  const auto tx = detail::axis_taps(x, image.width());
  const auto ty = detail::axis_taps(y, image.height());
  if (!tx || !ty) return std::nullopt;
  RgbSample out{};
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - tx->t) * image.channel(tx->i0, ty->i0, c) + tx->t * image.channel(tx->i1, ty->i0, c);
    const double bottom = (1.0 - tx->t) * image.channel(tx->i0, ty->i1, c) + tx->t * image.channel(tx->i1, ty->i1, c);
    out[c] = (1.0 - ty->t) * top + ty->t * bottom;
  }
  return out;
}

struct TexturingReport {
  std::size_t visible_count = 0;
  std::size_t occluded_count = 0;
  std::size_t out_of_frame_count = 0;
  std::size_t behind_camera_count = 0;

  [[nodiscard]] std::size_t total() const noexcept {
    return visible_count + occluded_count + out_of_frame_count + behind_camera_count;
  }
  bool operator==(const TexturingReport&) const = default;
};

enum class VertexVisibility : std::uint8_t { visible, occluded, out_of_frame, behind_camera };

struct TexturingOptions {
  Rgb8 fallback_color{96, 96, 96};
  /// Slack allowed between a vertex's depth and the depth buffer, millimeters.
  double depth_epsilon = 0.5;
  /// Settings for the depth pre-pass (backend, near plane, threads).
  RenderSettings depth_pass{};
  /// Threads for per-vertex sampling; 0 = auto.
  int threads = 1;
};

struct TexturingResult {
  Mesh mesh;
  std::vector<VertexVisibility> classes;
  TexturingReport report;

  [[nodiscard]] std::vector<bool> visibility() const {
    std::vector<bool> v(classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) v[i] = classes[i] == VertexVisibility::visible;
    return v;
  }
};

/// Classifies one projected vertex against the frame bounds and the depth pre-pass.
inline VertexVisibility classify_vertex(const ProjectedVertex& pv, const DepthRaster& depth, double depth_epsilon) {
  if (!pv.valid) return VertexVisibility::behind_camera;
  const int w = depth.width();
  const int h = depth.height();
  if (!(pv.x >= 0.5 && pv.x <= w - 0.5 && pv.y >= 0.5 && pv.y <= h - 0.5)) return VertexVisibility::out_of_frame;
  const int px = std::min(static_cast<int>(std::floor(pv.x)), w - 1);
  const int py = std::min(static_cast<int>(std::floor(pv.y)), h - 1);
  return pv.depth <= depth(px, py) + depth_epsilon ? VertexVisibility::visible : VertexVisibility::occluded;
}

/// Colors every vertex with the frame color at its projection. Vertices that are behind
/// the camera, outside the sampleable frame area, or hidden by nearer geometry in the
/// depth pre-pass receive the fallback color instead.
inline TexturingResult texture_mesh(const Mesh& mesh, const FrameImage& frame, const Pose& registration_pose,
                                    const CameraIntrinsics& intrinsics, const TexturingOptions& options = {}) {
  validate(mesh);
  intrinsics.validate();
  registration_pose.validate();
  if (frame.width() != intrinsics.width || frame.height() != intrinsics.height) {
    throw InputError("frame is " + std::to_string(frame.width()) + "x" + std::to_string(frame.height()) +
                     " but intrinsics specify " + std::to_string(intrinsics.width) + "x" +
                     std::to_string(intrinsics.height));
  }
  if (!(options.depth_epsilon >= 0.0)) throw InputError("depth_epsilon must be non-negative");

  const DepthRaster depth = render_depth(mesh, registration_pose, intrinsics, options.depth_pass);
  const std::size_t n = mesh.vertices.size();

  TexturingResult result{mesh, std::vector<VertexVisibility>(n), {}};
  std::vector<Rgb8> colors(n, options.fallback_color);
  parallel_for(n, resolve_thread_count(options.threads), [&](std::size_t i) {
    const ProjectedVertex pv = project_point(mesh.vertices[i], registration_pose, intrinsics);
    VertexVisibility cls = classify_vertex(pv, depth, options.depth_epsilon);
    if (cls == VertexVisibility::visible) {
      const auto sample = bilinear_sample(frame, pv.x, pv.y);
      colors[i] = {detail::quantize((*sample)[0]), detail::quantize((*sample)[1]), detail::quantize((*sample)[2])};
    }
    result.classes[i] = cls;
  });
  for (VertexVisibility cls : result.classes) {
    switch (cls) {
      case VertexVisibility::visible: ++result.report.visible_count; break;
      case VertexVisibility::occluded: ++result.report.occluded_count; break;
      case VertexVisibility::out_of_frame: ++result.report.out_of_frame_count; break;
      case VertexVisibility::behind_camera: ++result.report.behind_camera_count; break;
    }
  }
  result.mesh.colors = std::move(colors);
  return result;
}

}  // namespace synthview
