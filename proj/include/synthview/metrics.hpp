#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "synthview/error.hpp"
#include "synthview/image.hpp"
#include "synthview/parallel.hpp"

namespace synthview {

using LumaImage = Raster<double>;

/// ITU-R BT.601 luma.
inline LumaImage to_luma(const RgbImage& img) {
  LumaImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgb8 c = img.at(x, y);
      out(x, y) = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
    }
  }
  return out;
}

inline LumaImage to_luma(const GrayImage& img) {
  LumaImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out(x, y) = img(x, y);
  }
  return out;
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double data_range = 255.0;
  double k1 = 0.01;
  double k2 = 0.03;
};

namespace detail {

inline std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(size));
  const double center = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - center;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

/// 'valid' separable correlation: output is (w - n + 1) x (h - n + 1).
inline LumaImage filter_valid(const LumaImage& in, const std::vector<double>& taps) {
  const int n = static_cast<int>(taps.size());
  const int ow = in.width() - n + 1;
  const int oh = in.height() - n + 1;
  LumaImage horiz(ow, in.height());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += taps[k] * in(x + k, y);
      horiz(x, y) = acc;
    }
  }
  LumaImage out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += taps[k] * horiz(x, y + k);
      out(x, y) = acc;
    }
  }
  return out;
}

inline LumaImage multiply(const LumaImage& a, const LumaImage& b) {
  LumaImage out(a.width(), a.height());
  auto o = out.data();
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] * db[i];
  return out;
}

}  // namespace detail

/// Mean SSIM over all Gaussian windows that fit inside the image. With a mask, only windows
/// whose center pixel is in the mask contribute. Images smaller than the window use the
/// largest odd window that fits.
inline double ssim(const LumaImage& a, const LumaImage& b, const MaskRaster* mask = nullptr,
                   const SsimParams& params = {}) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InputError("ssim: image dimensions differ (" + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                     " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
  }
  if (mask && (mask->width() != a.width() || mask->height() != a.height())) {
    throw InputError("ssim: mask dimensions differ from image dimensions");
  }
  if (a.width() < 1 || a.height() < 1) throw InputError("ssim: empty image");
  int win = std::min({params.window, a.width(), a.height()});
  if (win % 2 == 0) --win;
  const auto taps = detail::gaussian_taps(win, params.sigma);
  const double c1 = (params.k1 * params.data_range) * (params.k1 * params.data_range);
  const double c2 = (params.k2 * params.data_range) * (params.k2 * params.data_range);

  const LumaImage mu1 = detail::filter_valid(a, taps);
  const LumaImage mu2 = detail::filter_valid(b, taps);
  const LumaImage e11 = detail::filter_valid(detail::multiply(a, a), taps);
  const LumaImage e22 = detail::filter_valid(detail::multiply(b, b), taps);
  const LumaImage e12 = detail::filter_valid(detail::multiply(a, b), taps);

  const int r = win / 2;
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < mu1.height(); ++y) {
    for (int x = 0; x < mu1.width(); ++x) {
      if (mask && !(*mask)(x + r, y + r)) continue;
      const double m1 = mu1(x, y);
      const double m2 = mu2(x, y);
      const double s11 = e11(x, y) - m1 * m1;
      const double s22 = e22(x, y) - m2 * m2;
      const double s12 = e12(x, y) - m1 * m2;
      sum += ((2.0 * m1 * m2 + c1) * (2.0 * s12 + c2)) / ((m1 * m1 + m2 * m2 + c1) * (s11 + s22 + c2));
      ++count;
    }
  }
  if (count == 0) throw InputError("ssim: mask selects no window centers");
  return sum / static_cast<double>(count);
}

inline double ssim(const RgbImage& a, const RgbImage& b, const MaskRaster* mask = nullptr,
                   const SsimParams& params = {}) {
  return ssim(to_luma(a), to_luma(b), mask, params);
}

inline double ssim(const GrayImage& a, const GrayImage& b, const MaskRaster* mask = nullptr,
                   const SsimParams& params = {}) {
  return ssim(to_luma(a), to_luma(b), mask, params);
}

/// A set of d-dimensional embedding vectors, stored row-major.
class FeatureSet {
 public:
  FeatureSet() = default;
  FeatureSet(std::size_t dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
    if (dim_ < 1) throw InputError("feature set: dimension must be >= 1");
    if (values_.size() % dim_ != 0) throw InputError("feature set: value count is not a multiple of the dimension");
    for (double v : values_) {
      if (!std::isfinite(v)) throw InputError("feature set: non-finite entry");
    }
  }

  static FeatureSet from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw InputError("feature set: no vectors");
    const std::size_t d = rows.front().size();
    std::vector<double> values;
    values.reserve(rows.size() * d);
    for (const auto& r : rows) {
      if (r.size() != d) throw InputError("feature set: vectors have differing dimensions");
      values.insert(values.end(), r.begin(), r.end());
    }
    return FeatureSet(d, std::move(values));
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t count() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

  /// count x dim matrix view.
  [[nodiscard]] Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> matrix()
      const {
    return {values_.data(), static_cast<Eigen::Index>(count()), static_cast<Eigen::Index>(dim_)};
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

namespace detail {

inline void check_pair(const FeatureSet& a, const FeatureSet& b, const char* what) {
  if (a.dim() != b.dim()) {
    throw InputError(std::string(what) + ": feature dimensions differ (" + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()) + ")");
  }
  if (a.count() < 2 || b.count() < 2) throw InputError(std::string(what) + ": each set needs at least 2 vectors");
}

/// Square root of a symmetric positive semi-definite matrix; negative eigenvalues clamp to 0.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

/// Fréchet distance between Gaussians fitted to the two sets (sample mean and covariance).
inline double fid(const FeatureSet& real, const FeatureSet& synthetic) {
  detail::check_pair(real, synthetic, "fid");
  const Eigen::MatrixXd x = real.matrix();
  const Eigen::MatrixXd y = synthetic.matrix();
  const Eigen::RowVectorXd mu1 = x.colwise().mean();
  const Eigen::RowVectorXd mu2 = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mu1;
  const Eigen::MatrixXd yc = y.rowwise() - mu2;
  const Eigen::MatrixXd cov1 = (xc.transpose() * xc) / static_cast<double>(x.rows() - 1);
  const Eigen::MatrixXd cov2 = (yc.transpose() * yc) / static_cast<double>(y.rows() - 1);

  // tr((S1 S2)^1/2) = tr((S1^1/2 S2 S1^1/2)^1/2), and the latter is symmetric PSD.
  const Eigen::MatrixXd root1 = detail::psd_sqrt(cov1);
  const Eigen::MatrixXd inner = root1 * cov2 * root1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double trace_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double mean_term = (mu1 - mu2).squaredNorm();
  return std::max(0.0, mean_term + cov1.trace() + cov2.trace() - 2.0 * trace_sqrt);
}

/// Cubic polynomial kernel (x.y / d + 1)^3 used by KID.
inline double kid_kernel(std::span<const double> x, std::span<const double> y) {
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  const double base = dot / static_cast<double>(x.size()) + 1.0;
  return base * base * base;
}

/// Unbiased squared MMD under the cubic polynomial kernel, over the full sets.
inline double kid(const FeatureSet& real, const FeatureSet& synthetic) {
  detail::check_pair(real, synthetic, "kid");
  const double d = static_cast<double>(real.dim());
  const Eigen::MatrixXd x = real.matrix();
  const Eigen::MatrixXd y = synthetic.matrix();
  const auto cube = [d](const Eigen::MatrixXd& gram) {
    return ((gram.array() / d) + 1.0).cube().matrix().eval();
  };
  const Eigen::MatrixXd kxx = cube(x * x.transpose());
  const Eigen::MatrixXd kyy = cube(y * y.transpose());
  const Eigen::MatrixXd kxy = cube(x * y.transpose());
  const double m = static_cast<double>(x.rows());
  const double n = static_cast<double>(y.rows());
  const double sxx = kxx.sum() - kxx.trace();
  const double syy = kyy.sum() - kyy.trace();
  return sxx / (m * (m - 1.0)) + syy / (n * (n - 1.0)) - 2.0 * kxy.sum() / (m * n);
}

struct MetricReport {
  std::optional<double> fid;
  std::optional<double> kid;
  double ssim_mean = 0.0;
  std::vector<double> per_pair_ssim;
};

struct EvaluationInputs {
  std::span<const RgbImage> real_images;
  std::span<const RgbImage> synthetic_images;
  /// Empty, or one mask per pair.
  std::span<const MaskRaster> masks;
  std::optional<FeatureSet> real_features;
  std::optional<FeatureSet> synthetic_features;
  int threads = 1;
};

/// Per-pair (masked) SSIM with its mean, plus FID/KID when both feature sets are given.
inline MetricReport evaluate_set(const EvaluationInputs& in) {
  if (in.real_images.size() != in.synthetic_images.size()) {
    throw InputError("evaluate: " + std::to_string(in.real_images.size()) + " real images vs " +
                     std::to_string(in.synthetic_images.size()) + " synthetic images");
  }
  if (in.real_images.empty()) throw InputError("evaluate: no image pairs");
  if (!in.masks.empty() && in.masks.size() != in.real_images.size()) {
    throw InputError("evaluate: mask count does not match pair count");
  }
  if (in.real_features.has_value() != in.synthetic_features.has_value()) {
    throw InputError("evaluate: real and synthetic features must be supplied together");
  }
  MetricReport report;
  report.per_pair_ssim.resize(in.real_images.size());
  parallel_for(in.real_images.size(), resolve_thread_count(in.threads), [&](std::size_t i) {
    const MaskRaster* mask = in.masks.empty() ? nullptr : &in.masks[i];
    report.per_pair_ssim[i] = ssim(in.real_images[i], in.synthetic_images[i], mask);
  });
  double sum = 0.0;
  for (double s : report.per_pair_ssim) sum += s;
  report.ssim_mean = sum / static_cast<double>(report.per_pair_ssim.size());
  if (in.real_features) {
    report.fid = fid(*in.real_features, *in.synthetic_features);
    report.kid = kid(*in.real_features, *in.synthetic_features);
  }
  return report;
}

}  // namespace synthview
