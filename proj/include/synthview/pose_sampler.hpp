#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "synthview/camera.hpp"
#include "synthview/error.hpp"

namespace synthview {

/// Portable uniform source: std::mt19937_64 (its output sequence is fixed by the
/// C++ standard) with a hand-rolled 53-bit mantissa conversion, so the same seed
/// yields the same doubles on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Uniformly distributed point on the unit sphere.
inline Vec3 random_unit_vector(Rng& rng) {
  const double z = 2.0 * rng.uniform() - 1.0;
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

struct PoseSamplingParams {
  int count = 1;
  double max_rotation_deg = 0.0;
  double max_translation_mm = 0.0;
  std::uint64_t seed = 0;
};

/// Random poses around `reference`. Each output is compose(perturbation, reference), where
/// the perturbation rotates by an angle uniform in [0, max_rotation] about a uniform random
/// axis and translates by a vector uniform in the cube [-max_translation, max_translation]^3.
/// Draw order per pose: axis (2 draws), angle, tx, ty, tz.
inline std::vector<Pose> sample_poses(const Pose& reference, const PoseSamplingParams& params) {
  reference.validate();
  if (params.count < 1) throw InputError("pose sampling: count must be at least 1");
  if (!(params.max_rotation_deg >= 0.0 && params.max_rotation_deg <= 180.0)) {
    throw InputError("pose sampling: max_rotation must lie in [0, 180] degrees");
  }
  if (!(params.max_translation_mm >= 0.0) || !std::isfinite(params.max_translation_mm)) {
    throw InputError("pose sampling: max_translation must be non-negative and finite");
  }
  Rng rng(params.seed);
  const double max_angle = params.max_rotation_deg * std::numbers::pi / 180.0;
  const double m = params.max_translation_mm;
  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(params.count));
  for (int i = 0; i < params.count; ++i) {
    const Vec3 axis = random_unit_vector(rng);
    const double angle = max_angle * rng.uniform();
    Pose perturbation;
    perturbation.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    for (int k = 0; k < 3; ++k) perturbation.translation[k] = m * (2.0 * rng.uniform() - 1.0);
    poses.push_back(compose(perturbation, reference));
  }
  return poses;
}

inline std::vector<Pose> sample_poses(const Pose& reference, int count, double max_rotation_deg,
                                      double max_translation_mm, std::uint64_t seed) {
  return sample_poses(reference, {count, max_rotation_deg, max_translation_mm, seed});
}

}  // namespace synthview
