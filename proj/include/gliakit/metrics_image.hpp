#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gliakit/error.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {

struct ImageMetricConfig {
  /// <= 0 means "use the reference volume's dynamic range" (1.0 when flat).
  double data_range = 0.0;
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  /// Evaluate SSIM with 2D windows per axial slice instead of one 3D window.
  bool slice_mode = false;

  void validate() const {
    if (window < 3 || window % 2 == 0) throw ValidationError("image metrics: window size must be odd and >= 3");
    if (!(sigma > 0.0)) throw ValidationError("image metrics: sigma must be > 0");
    if (!(k1 > 0.0) || !(k2 > 0.0)) throw ValidationError("image metrics: stability constants must be > 0");
  }
};

namespace image_detail {

inline const std::uint8_t* mask_data(const Mask* mask, const Geometry& g, const char* what) {
  if (!mask) return nullptr;
  require_same_grid(g, mask->geometry, what);
  return mask->data.data();
}

inline double resolve_data_range(const ImageMetricConfig& cfg, const Volume& ref) {
  if (cfg.data_range > 0.0) return cfg.data_range;
  const auto [lo, hi] = std::minmax_element(ref.data.begin(), ref.data.end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  return range > 0.0 ? range : 1.0;
}

inline std::vector<double> gaussian_kernel(int window, double sigma) {
  const int h = window / 2;
  std::vector<double> w(static_cast<std::size_t>(window));
  double sum = 0.0;
  for (int i = -h; i <= h; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(i + h)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

/// In-place separable convolution along one axis with zero padding. Outputs in
/// the valid region (window fully inside on every already-processed axis) are
/// exact; border values only feed other border values.
inline void conv_axis(std::vector<double>& data, const std::array<int, 3>& dims, int axis,
                      const std::vector<double>& w) {
  const int h = static_cast<int>(w.size()) / 2;
  const int n = dims[axis];
  const std::size_t stride = axis == 0 ? 1
                           : axis == 1 ? static_cast<std::size_t>(dims[0])
                                       : static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
  std::vector<double> line(static_cast<std::size_t>(n));
  const int nu = dims[axis == 0 ? 1 : 0];
  const int nv = dims[axis == 2 ? 1 : 2];
  const std::size_t stride_u = axis == 0 ? static_cast<std::size_t>(dims[0]) : 1;
  const std::size_t stride_v = axis == 2 ? static_cast<std::size_t>(dims[0])
                                         : static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
  for (int v = 0; v < nv; ++v)
    for (int u = 0; u < nu; ++u) {
      double* base = data.data() + stride_u * static_cast<std::size_t>(u) + stride_v * static_cast<std::size_t>(v);
      for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = base[stride * static_cast<std::size_t>(i)];
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const int jlo = std::max(0, i - h), jhi = std::min(n - 1, i + h);
        for (int j = jlo; j <= jhi; ++j)
          acc += w[static_cast<std::size_t>(j - i + h)] * line[static_cast<std::size_t>(j)];
        base[stride * static_cast<std::size_t>(i)] = acc;
      }
    }
}

}  // namespace image_detail

/// Mean squared error, optionally restricted to a mask.
inline double mse(const Volume& ref, const Volume& pred, const Mask* mask = nullptr) {
  require_same_grid(ref.geometry, pred.geometry, "mse");
  const std::uint8_t* m = image_detail::mask_data(mask, ref.geometry, "mse mask");
  double sum = 0.0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    if (m && !m[i]) continue;
    const double d = static_cast<double>(ref.data[i]) - static_cast<double>(pred.data[i]);
    sum += d * d;
    ++count;
  }
  if (count == 0) throw ValidationError("mse: mask selects no voxels");
  return sum / static_cast<double>(count);
}

/// Peak signal-to-noise ratio in dB; +inf when the volumes agree exactly.
inline double psnr(const Volume& ref, const Volume& pred, const ImageMetricConfig& cfg = {},
                   const Mask* mask = nullptr) {
  cfg.validate();
  const double m = mse(ref, pred, mask);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  const double range = image_detail::resolve_data_range(cfg, ref);
  return 10.0 * std::log10(range * range / m);
}

/// Gaussian-weighted SSIM averaged over every voxel whose window lies fully
/// inside the volume (per slice when slice_mode is set); a mask further
/// restricts the averaging set.
inline double ssim(const Volume& ref, const Volume& pred, const ImageMetricConfig& cfg = {},
                   const Mask* mask = nullptr) {
  require_same_grid(ref.geometry, pred.geometry, "ssim");
  cfg.validate();
  const std::uint8_t* msk = image_detail::mask_data(mask, ref.geometry, "ssim mask");
  const auto dims = ref.geometry.dims;
  const int h = cfg.window / 2;
  const int axes = cfg.slice_mode ? 2 : 3;
  for (int a = 0; a < axes; ++a)
    if (dims[a] < cfg.window)
      throw ValidationError("ssim: volume extent " + std::to_string(dims[a]) + " along axis " + std::to_string(a) +
                            " is smaller than the window (" + std::to_string(cfg.window) +
                            "); use a smaller window");

  const double range = image_detail::resolve_data_range(cfg, ref);
  const double c1 = (cfg.k1 * range) * (cfg.k1 * range);
  const double c2 = (cfg.k2 * range) * (cfg.k2 * range);
  const std::vector<double> w = image_detail::gaussian_kernel(cfg.window, cfg.sigma);

  const std::size_t n = ref.data.size();
  std::vector<double> mu1(n), mu2(n), m11(n), m22(n), m12(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = static_cast<double>(ref.data[i]), b = static_cast<double>(pred.data[i]);
    mu1[i] = a;
    mu2[i] = b;
    m11[i] = a * a;
    m22[i] = b * b;
    m12[i] = a * b;
  }
  for (int axis = 0; axis < axes; ++axis)
    for (auto* field : {&mu1, &mu2, &m11, &m22, &m12}) image_detail::conv_axis(*field, dims, axis, w);

  const int zlo = cfg.slice_mode ? 0 : h;
  const int zhi = cfg.slice_mode ? dims[2] - 1 : dims[2] - 1 - h;
  double sum = 0.0;
  std::int64_t count = 0;
  for (int z = zlo; z <= zhi; ++z)
    for (int y = h; y <= dims[1] - 1 - h; ++y)
      for (int x = h; x <= dims[0] - 1 - h; ++x) {
        const std::size_t i = ref.geometry.index(x, y, z);
        if (msk && !msk[i]) continue;
        const double s11 = m11[i] - mu1[i] * mu1[i];
        const double s22 = m22[i] - mu2[i] * mu2[i];
        const double s12 = m12[i] - mu1[i] * mu2[i];
        const double num = (2.0 * (mu1[i] * mu2[i]) + c1) * (2.0 * s12 + c2);
        const double den = (mu1[i] * mu1[i] + mu2[i] * mu2[i] + c1) * (s11 + s22 + c2);
        sum += num / den;
        ++count;
      }
  if (count == 0) throw ValidationError("ssim: no voxels to average (mask excludes the valid window region)");
  return sum / static_cast<double>(count);
}

/// One row of the inpainting report.
struct ImageReport {
  std::string scope;  // "full" or "mask"
  double ssim = 0.0;
  double psnr = 0.0;
  double mse = 0.0;
};

inline ImageReport evaluate_inpainting(const Volume& ref, const Volume& pred, const ImageMetricConfig& cfg = {},
                                       const Mask* mask = nullptr) {
  ImageReport r;
  r.scope = mask ? "mask" : "full";
  r.mse = mse(ref, pred, mask);
  r.psnr = psnr(ref, pred, cfg, mask);
  r.ssim = ssim(ref, pred, cfg, mask);
  return r;
}

}  // namespace gliakit
