#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "synthview/camera.hpp"
#include "synthview/error.hpp"
#include "synthview/image.hpp"
#include "synthview/mesh.hpp"
#include "synthview/parallel.hpp"

namespace synthview {

enum class Backend { edge_function, scanline };
enum class Shading { gouraud };

struct RenderSettings {
  Rgb8 background{0, 0, 0};
  Backend backend = Backend::edge_function;
  /// Camera-space z of the near clipping plane, millimeters.
  double near_clip = 1.0;
  Shading shading = Shading::gouraud;
  /// Worker threads for tile rasterization; 0 = auto. Never affects output.
  int threads = 1;
  /// Tile edge length in pixels. Never affects output.
  int tile_size = 64;

  void validate() const {
    if (!(near_clip > 0.0) || !std::isfinite(near_clip)) throw InputError("render settings: near_clip must be > 0");
    if (tile_size < 1) throw InputError("render settings: tile_size must be >= 1");
  }
};

struct RenderOutput {
  RgbImage color;
  /// Camera-space depth in millimeters, +infinity where nothing is covered.
  DepthRaster depth;
  MaskRaster mask;
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ClipVertex {
  Vec3 p;  // camera space
  Vec3 c;  // color, 0..255
};

struct ScreenVertex {
  double x = 0.0;
  double y = 0.0;
  double inv_z = 0.0;
  std::array<double, 3> c_over_z{};
};

struct ScreenTriangle {
  std::array<ScreenVertex, 3> v;  // positive signed area (clockwise on a y-down screen)
  int x_min = 0, y_min = 0, x_max = -1, y_max = -1;  // inclusive pixel bounds inside the image
};

/// Keeps the part of a triangle with z >= near. Produces 0, 3 or 4 polygon vertices.
inline std::vector<ClipVertex> clip_near(const std::array<ClipVertex, 3>& tri, double near) {
  std::vector<ClipVertex> out;
  out.reserve(4);
  for (std::size_t i = 0; i < 3; ++i) {
    const ClipVertex& a = tri[i];
    const ClipVertex& b = tri[(i + 1) % 3];
    const bool a_in = a.p.z() >= near;
    const bool b_in = b.p.z() >= near;
    if (a_in) out.push_back(a);
    if (a_in != b_in) {
      const double t = (near - a.p.z()) / (b.p.z() - a.p.z());
      ClipVertex m{a.p + t * (b.p - a.p), a.c + t * (b.c - a.c)};
      m.p.z() = near;
      out.push_back(m);
    }
  }
  return out;
}

inline double raw_edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

/// Edge function evaluated with a canonical endpoint order, so edge(a,b,p) == -edge(b,a,p)
/// exactly and shared edges never leave gaps or double-cover pixels.
inline double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  if (a.x < b.x || (a.x == b.x && a.y < b.y)) return raw_edge(a, b, px, py);
  return -raw_edge(b, a, px, py);
}

/// Top or left edge for a positively oriented triangle on a y-down screen.
inline bool is_top_left(const ScreenVertex& a, const ScreenVertex& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

inline bool covers(double w, bool top_left) { return w > 0.0 || (w == 0.0 && top_left); }

/// Smallest integer k with k + 0.5 >= v (pixel index of the first center at or after v).
inline long long first_center_at_or_after(double v) {
  auto k = static_cast<long long>(std::ceil(v - 0.5));
  while (static_cast<double>(k) + 0.5 < v) ++k;
  while (static_cast<double>(k - 1) + 0.5 >= v) --k;
  return k;
}

/// first_center_at_or_after clamped to [0, n]; safe for huge or infinite v.
inline int first_index_in(double v, int n) {
  v = std::clamp(v, -1.0, static_cast<double>(n) + 1.0);
  return static_cast<int>(std::clamp(first_center_at_or_after(v), 0LL, static_cast<long long>(n)));
}

/// Largest k with k + 0.5 <= v, clamped to [-1, n - 1].
inline int last_index_in(double v, int n) {
  v = std::clamp(v, -2.0, static_cast<double>(n) + 1.0);
  long long k = first_center_at_or_after(v);
  if (static_cast<double>(k) + 0.5 > v) --k;
  return static_cast<int>(std::clamp(k, -1LL, static_cast<long long>(n) - 1));
}

inline ScreenVertex to_screen(const ClipVertex& cv, const CameraIntrinsics& k) {
  ScreenVertex s;
  const double z = cv.p.z();
  s.x = (k.fx * cv.p.x() + k.cx * z) / z;
  s.y = (k.fy * cv.p.y() + k.cy * z) / z;
  s.inv_z = 1.0 / z;
  for (int c = 0; c < 3; ++c) s.c_over_z[c] = cv.c[c] / z;
  return s;
}

inline std::vector<ScreenTriangle> setup_triangles(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                                                   double near_clip) {
  std::vector<Vec3> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = pose.apply(mesh.vertices[i]);

  std::vector<ScreenTriangle> out;
  out.reserve(mesh.triangles.size());
  for (const Triangle& t : mesh.triangles) {
    if (has_repeated_index(t)) continue;
    std::array<ClipVertex, 3> tri;
    for (int j = 0; j < 3; ++j) {
      tri[j].p = cam[t[j]];
      if (mesh.colors) {
        const Rgb8 c = (*mesh.colors)[t[j]];
        tri[j].c = Vec3(c.r, c.g, c.b);
      } else {
        tri[j].c = Vec3::Zero();
      }
    }
    const std::vector<ClipVertex> poly = clip_near(tri, near_clip);
    for (std::size_t f = 1; f + 1 < poly.size(); ++f) {
      ScreenTriangle st;
      st.v = {to_screen(poly[0], k), to_screen(poly[f], k), to_screen(poly[f + 1], k)};
      const double area = edge(st.v[0], st.v[1], st.v[2].x, st.v[2].y);
      if (area == 0.0 || !std::isfinite(area)) continue;
      if (area < 0.0) std::swap(st.v[1], st.v[2]);
      double min_x = st.v[0].x, max_x = st.v[0].x, min_y = st.v[0].y, max_y = st.v[0].y;
      for (int j = 1; j < 3; ++j) {
        min_x = std::min(min_x, st.v[j].x);
        max_x = std::max(max_x, st.v[j].x);
        min_y = std::min(min_y, st.v[j].y);
        max_y = std::max(max_y, st.v[j].y);
      }
      st.x_min = first_index_in(min_x, k.width);
      st.x_max = last_index_in(max_x, k.width);
      st.y_min = first_index_in(min_y, k.height);
      st.y_max = last_index_in(max_y, k.height);
      if (st.x_min > st.x_max || st.y_min > st.y_max) continue;
      out.push_back(st);
    }
  }
  return out;
}

struct Framebuffer {
  RgbImage* color;  // null in depth-only mode
  DepthRaster* depth;
  std::vector<Rgb8>* winner;  // color of the current nearest fragment, for tie-breaking
  int width;
};

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

/// Nearest depth wins; exact depth ties go to the lexicographically smaller color, so the
/// result does not depend on triangle submission order.
inline void write_fragment(Framebuffer& fb, int x, int y, double inv_z, const std::array<double, 3>& c_over_z) {
  const double z = 1.0 / inv_z;
  double& stored = (*fb.depth)(x, y);
  if (z > stored) return;
  Rgb8 c{};
  if (fb.color) c = {quantize(c_over_z[0] * z), quantize(c_over_z[1] * z), quantize(c_over_z[2] * z)};
  const std::size_t idx = static_cast<std::size_t>(y) * static_cast<std::size_t>(fb.width) + static_cast<std::size_t>(x);
  Rgb8& win = (*fb.winner)[idx];
  if (z == stored && !(c < win)) return;
  stored = z;
  win = c;
  if (fb.color) fb.color->set(x, y, c);
}

struct TileRect {
  int x0, y0, x1, y1;  // half-open
};

inline void raster_edge_function(const ScreenTriangle& t, const TileRect& tile, Framebuffer& fb, bool with_color) {
  const auto& [v0, v1, v2] = t.v;
  const bool tl0 = is_top_left(v1, v2);
  const bool tl1 = is_top_left(v2, v0);
  const bool tl2 = is_top_left(v0, v1);
  const int xa = std::max(t.x_min, tile.x0), xb = std::min(t.x_max, tile.x1 - 1);
  const int ya = std::max(t.y_min, tile.y0), yb = std::min(t.y_max, tile.y1 - 1);
  for (int y = ya; y <= yb; ++y) {
    const double py = y + 0.5;
    for (int x = xa; x <= xb; ++x) {
      const double px = x + 0.5;
      const double w0 = edge(v1, v2, px, py);
      const double w1 = edge(v2, v0, px, py);
      const double w2 = edge(v0, v1, px, py);
      if (!covers(w0, tl0) || !covers(w1, tl1) || !covers(w2, tl2)) continue;
      const double sum = w0 + w1 + w2;
      const double b0 = w0 / sum, b1 = w1 / sum, b2 = w2 / sum;
      const double inv_z = b0 * v0.inv_z + b1 * v1.inv_z + b2 * v2.inv_z;
      std::array<double, 3> cz{};
      if (with_color) {
        for (int c = 0; c < 3; ++c) cz[c] = b0 * v0.c_over_z[c] + b1 * v1.c_over_z[c] + b2 * v2.c_over_z[c];
      }
      write_fragment(fb, x, y, inv_z, cz);
    }
  }
}

/// Interpolated edge crossing at one scanline.
inline bool covers_center(const ScreenTriangle& t, double px, double py) {
  for (std::size_t i = 0; i < 3; ++i) {
    const ScreenVertex& a = t.v[i];
    const ScreenVertex& b = t.v[(i + 1) % 3];
    if (!covers(edge(a, b, px, py), is_top_left(a, b))) return false;
  }
  return true;
}

struct EdgeSample {
  double x;
  double inv_z;
  std::array<double, 3> c_over_z;
};

/// `a` must be the upper endpoint (a.y < b.y).
inline EdgeSample sample_edge(const ScreenVertex& a, const ScreenVertex& b, double y) {
  const double t = (y - a.y) / (b.y - a.y);
  EdgeSample s;
  s.x = a.x + t * (b.x - a.x);
  s.inv_z = a.inv_z + t * (b.inv_z - a.inv_z);
  for (int c = 0; c < 3; ++c) s.c_over_z[c] = a.c_over_z[c] + t * (b.c_over_z[c] - a.c_over_z[c]);
  return s;
}

inline void raster_scanline(const ScreenTriangle& t, const TileRect& tile, Framebuffer& fb, bool with_color) {
  std::array<ScreenVertex, 3> s = t.v;
  std::sort(s.begin(), s.end(), [](const ScreenVertex& a, const ScreenVertex& b) {
    return a.y < b.y || (a.y == b.y && a.x < b.x);
  });
  const ScreenVertex& top = s[0];
  const ScreenVertex& mid = s[1];
  const ScreenVertex& bot = s[2];
  if (!(top.y < bot.y)) return;
  // Positive when mid lies left of the long top->bot edge.
  const bool mid_left = raw_edge(top, bot, mid.x, mid.y) > 0.0;

  const auto clamp_to = [](double v, int lo, int hi) {
    return std::clamp(v, static_cast<double>(lo) - 1.0, static_cast<double>(hi) + 1.0);
  };
  const long long row_begin = std::max<long long>(first_center_at_or_after(clamp_to(top.y, tile.y0, tile.y1)), tile.y0);
  const long long row_end = std::min<long long>(first_center_at_or_after(clamp_to(bot.y, tile.y0, tile.y1)), tile.y1);
  for (long long y = row_begin; y < row_end; ++y) {
    const double yc = static_cast<double>(y) + 0.5;
    const EdgeSample long_edge = sample_edge(top, bot, yc);
    const EdgeSample short_edge = yc < mid.y ? sample_edge(top, mid, yc) : sample_edge(mid, bot, yc);
    const EdgeSample& left = mid_left ? short_edge : long_edge;
    const EdgeSample& right = mid_left ? long_edge : short_edge;
    if (!(left.x <= right.x)) continue;
    long long col_begin =
        std::max<long long>(first_center_at_or_after(clamp_to(left.x, tile.x0, tile.x1)), tile.x0);
    long long col_end = std::min<long long>(first_center_at_or_after(clamp_to(right.x, tile.x0, tile.x1)), tile.x1);
    // Interpolated span ends can be off by rounding when a center lies on an edge; snap to the exact test.
    const auto inside = [&](long long x) { return covers_center(t, static_cast<double>(x) + 0.5, yc); };
    while (col_begin > tile.x0 && inside(col_begin - 1)) --col_begin;
    while (col_begin < col_end && !inside(col_begin)) ++col_begin;
    while (col_end < tile.x1 && inside(col_end)) ++col_end;
    while (col_end > col_begin && !inside(col_end - 1)) --col_end;
    const double span = right.x - left.x;
    for (long long x = col_begin; x < col_end; ++x) {
      const double u = (static_cast<double>(x) + 0.5 - left.x) / span;
      const double inv_z = left.inv_z + u * (right.inv_z - left.inv_z);
      std::array<double, 3> cz{};
      if (with_color) {
        for (int c = 0; c < 3; ++c) cz[c] = left.c_over_z[c] + u * (right.c_over_z[c] - left.c_over_z[c]);
      }
      write_fragment(fb, static_cast<int>(x), static_cast<int>(y), inv_z, cz);
    }
  }
}

inline RenderOutput rasterize(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                              const RenderSettings& settings, bool with_color) {
  validate(mesh);
  pose.validate();
  k.validate();
  settings.validate();
  if (with_color && !mesh.has_colors()) throw InputError("render: mesh has no vertex colors");

  const std::vector<ScreenTriangle> tris = setup_triangles(mesh, pose, k, settings.near_clip);

  RenderOutput out;
  out.depth = DepthRaster(k.width, k.height, kInf);
  if (with_color) out.color = RgbImage(k.width, k.height, settings.background);
  std::vector<Rgb8> winner(static_cast<std::size_t>(k.width) * static_cast<std::size_t>(k.height));

  const int ts = settings.tile_size;
  const int tiles_x = (k.width + ts - 1) / ts;
  const int tiles_y = (k.height + ts - 1) / ts;
  std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * static_cast<std::size_t>(tiles_y));
  for (std::size_t i = 0; i < tris.size(); ++i) {
    const ScreenTriangle& t = tris[i];
    for (int ty = t.y_min / ts; ty <= t.y_max / ts; ++ty) {
      for (int tx = t.x_min / ts; tx <= t.x_max / ts; ++tx) {
        bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(static_cast<std::uint32_t>(i));
      }
    }
  }

  Framebuffer fb{with_color ? &out.color : nullptr, &out.depth, &winner, k.width};
  parallel_for(bins.size(), resolve_thread_count(settings.threads), [&](std::size_t b) {
    const int tx = static_cast<int>(b % static_cast<std::size_t>(tiles_x));
    const int ty = static_cast<int>(b / static_cast<std::size_t>(tiles_x));
    const TileRect rect{tx * ts, ty * ts, std::min((tx + 1) * ts, k.width), std::min((ty + 1) * ts, k.height)};
    Framebuffer local = fb;
    for (std::uint32_t i : bins[b]) {
      if (settings.backend == Backend::edge_function) {
        raster_edge_function(tris[i], rect, local, with_color);
      } else {
        raster_scanline(tris[i], rect, local, with_color);
      }
    }
  });

  out.mask = MaskRaster(k.width, k.height, 0);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) out.mask(x, y) = std::isfinite(out.depth(x, y)) ? 1 : 0;
  }
  return out;
}

}  // namespace detail

/// Renders a vertex-colored mesh: nearest-surface z-buffering, perspective-correct
/// Gouraud color, near-plane clipping, pixel-center sampling with a top-left fill rule.
inline RenderOutput render(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& intrinsics,
                           const RenderSettings& settings = {}) {
  return detail::rasterize(mesh, pose, intrinsics, settings, true);
}

/// Depth-only pass; identical depth to render() with the same settings. Colors not required.
inline DepthRaster render_depth(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& intrinsics,
                                const RenderSettings& settings = {}) {
  return detail::rasterize(mesh, pose, intrinsics, settings, false).depth;
}

inline MaskRaster render_mask(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& intrinsics,
                              const RenderSettings& settings = {}) {
  return detail::rasterize(mesh, pose, intrinsics, settings, false).mask;
}

}  // namespace synthview
