#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gliakit/error.hpp"
#include "gliakit/fft.hpp"
#include "gliakit/rng.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {

enum class TransformKind {
  gibbs,
  gaussian_noise,
  gaussian_smooth,
  intensity_scale,
  flip,
  motion,
  spike,
  bias_field,
  elastic,
  anisotropy,
};

inline const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::gibbs: return "gibbs";
    case TransformKind::gaussian_noise: return "gaussian_noise";
    case TransformKind::gaussian_smooth: return "gaussian_smooth";
    case TransformKind::intensity_scale: return "intensity_scale";
    case TransformKind::flip: return "flip";
    case TransformKind::motion: return "motion";
    case TransformKind::spike: return "spike";
    case TransformKind::bias_field: return "bias_field";
    case TransformKind::elastic: return "elastic";
    default: return "anisotropy";
  }
}

inline TransformKind transform_kind_from_string(const std::string& s) {
  for (TransformKind k : {TransformKind::gibbs, TransformKind::gaussian_noise, TransformKind::gaussian_smooth,
                          TransformKind::intensity_scale, TransformKind::flip, TransformKind::motion,
                          TransformKind::spike, TransformKind::bias_field, TransformKind::elastic,
                          TransformKind::anisotropy})
    if (s == to_string(k)) return k;
  throw ValidationError("unknown transform kind '" + s + "'");
}

/// Kind-specific parameters; each transform reads only its own fields.
struct TransformParams {
  double alpha_min = 0.0, alpha_max = 1.0;               // gibbs: removed outer k-space fraction
  double noise_std_min = 0.0, noise_std_max = 0.1;       // gaussian_noise: std as fraction of range
  double sigma_min = 0.5, sigma_max = 1.5;               // gaussian_smooth: sigma in voxels
  double scale_min = 0.9, scale_max = 1.1;               // intensity_scale
  double flip_chance = 0.5;                              // flip: per-axis chance
  double degrees = 10.0, translation_mm = 10.0;          // motion
  int num_movements = 1;                                 // motion
  int num_spikes = 1;                                    // spike
  double spike_intensity_min = 1.0, spike_intensity_max = 3.0;
  double bias_coefficient = 0.5;                         // bias_field
  int bias_order = 3;                                    // bias_field
  int control_points = 7;                                // elastic
  double max_displacement_voxels = 7.5;                  // elastic
  double downsample_min = 1.0, downsample_max = 2.0;     // anisotropy
};

struct TransformSpec {
  TransformKind kind = TransformKind::flip;
  double probability = 0.1;
  TransformParams params;

  void validate() const {
    if (!(probability >= 0.0 && probability <= 1.0))
      throw ValidationError("transform probability must be in [0,1]");
    const auto& p = params;
    if (p.alpha_min < 0.0 || p.alpha_max > 1.0 || p.alpha_min > p.alpha_max)
      throw ValidationError("gibbs alpha range must satisfy 0 <= min <= max <= 1");
    if (p.noise_std_min < 0.0 || p.noise_std_min > p.noise_std_max)
      throw ValidationError("noise std range must be nonnegative and ordered");
    if (!(p.sigma_min > 0.0) || p.sigma_min > p.sigma_max)
      throw ValidationError("smoothing sigma range must be positive and ordered");
    if (p.scale_min > p.scale_max) throw ValidationError("intensity scale range must be ordered");
    if (p.flip_chance < 0.0 || p.flip_chance > 1.0) throw ValidationError("flip chance must be in [0,1]");
    if (p.degrees < 0.0 || p.translation_mm < 0.0 || p.num_movements < 1)
      throw ValidationError("motion parameters must be nonnegative with >= 1 movement");
    if (p.num_spikes < 1 || p.spike_intensity_min > p.spike_intensity_max)
      throw ValidationError("spike parameters must have >= 1 spike and an ordered intensity range");
    if (p.bias_coefficient < 0.0 || p.bias_order < 0)
      throw ValidationError("bias field needs coefficient >= 0 and order >= 0");
    if (p.control_points < 4) throw ValidationError("elastic needs at least 4 control points per axis");
    if (p.max_displacement_voxels < 0.0) throw ValidationError("elastic max displacement must be >= 0");
    if (!(p.downsample_min >= 1.0) || p.downsample_min > p.downsample_max)
      throw ValidationError("anisotropy downsample range must satisfy 1 <= min <= max");
  }
};

struct AugmentConfig {
  std::vector<TransformSpec> transforms;
  std::uint64_t master_seed = 0;

  void validate() const {
    for (const auto& t : transforms) t.validate();
  }
};

// ---------------------------------------------------------------------------
// Core transforms: deterministic given explicit parameters.
// ---------------------------------------------------------------------------

namespace augment_detail {

/// Trilinear sample at a fractional voxel coordinate; outside the grid -> 0.
inline float sample_linear(const Volume& v, double x, double y, double z) {
  const auto& d = v.geometry.dims;
  if (x < 0.0 || y < 0.0 || z < 0.0 || x > d[0] - 1 || y > d[1] - 1 || z > d[2] - 1) return 0.0f;
  const int x0 = std::min(static_cast<int>(x), d[0] - 2 >= 0 ? d[0] - 2 : 0);
  const int y0 = std::min(static_cast<int>(y), d[1] - 2 >= 0 ? d[1] - 2 : 0);
  const int z0 = std::min(static_cast<int>(z), d[2] - 2 >= 0 ? d[2] - 2 : 0);
  const double fx = x - x0, fy = y - y0, fz = z - z0;
  const int x1 = std::min(x0 + 1, d[0] - 1), y1 = std::min(y0 + 1, d[1] - 1), z1 = std::min(z0 + 1, d[2] - 1);
  const double c000 = v.at(x0, y0, z0), c100 = v.at(x1, y0, z0);
  const double c010 = v.at(x0, y1, z0), c110 = v.at(x1, y1, z0);
  const double c001 = v.at(x0, y0, z1), c101 = v.at(x1, y0, z1);
  const double c011 = v.at(x0, y1, z1), c111 = v.at(x1, y1, z1);
  const double c00 = c000 + fx * (c100 - c000), c10 = c010 + fx * (c110 - c010);
  const double c01 = c001 + fx * (c101 - c001), c11 = c011 + fx * (c111 - c011);
  const double c0 = c00 + fy * (c10 - c00), c1 = c01 + fy * (c11 - c01);
  return static_cast<float>(c0 + fz * (c1 - c0));
}

/// Nearest-neighbor label sample; outside the grid -> background.
inline Label sample_nearest(const LabelMap& m, double x, double y, double z) {
  const int xi = static_cast<int>(std::lround(x));
  const int yi = static_cast<int>(std::lround(y));
  const int zi = static_cast<int>(std::lround(z));
  if (!m.geometry.in_bounds(xi, yi, zi)) return kBackground;
  return m.data[m.geometry.index(xi, yi, zi)];
}

/// Euler rotation matrix R = Rz * Ry * Rx, angles in degrees.
inline std::array<double, 9> rotation_matrix(const std::array<double, 3>& degrees) {
  const double ax = degrees[0] * std::numbers::pi / 180.0;
  const double ay = degrees[1] * std::numbers::pi / 180.0;
  const double az = degrees[2] * std::numbers::pi / 180.0;
  const double cx = std::cos(ax), sx = std::sin(ax);
  const double cy = std::cos(ay), sy = std::sin(ay);
  const double cz = std::cos(az), sz = std::sin(az);
  return {cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,
          sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,
          -sy,     cy * sx,                cy * cx};
}

}  // namespace augment_detail

/// Remove the outer `alpha` fraction of k-space radially, then invert.
inline void gibbs_core(Volume& v, double alpha) {
  if (alpha <= 0.0) return;
  Spectrum s = fft3(v);
  const auto& d = v.geometry.dims;
  const double keep = 1.0 - alpha;
  for (int kz = 0; kz < d[2]; ++kz)
    for (int ky = 0; ky < d[1]; ++ky)
      for (int kx = 0; kx < d[0]; ++kx) {
        const int k[3] = {kx, ky, kz};
        double r2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          if (d[a] == 1) continue;
          const double f = static_cast<double>(std::min(k[a], d[a] - k[a])) / (static_cast<double>(d[a]) / 2.0);
          r2 += f * f;
        }
        const double rho = std::sqrt(r2 / 3.0);  // normalized radius in [0,1]
        if (rho > keep) s.data[s.geometry.index(kx, ky, kz)] = Complex(0.0, 0.0);
      }
  v = ifft3(s);
}

/// Add zero-mean Gaussian noise with absolute standard deviation `std_abs`,
/// drawing one normal per voxel in raster order.
inline void gaussian_noise_core(Volume& v, RngStream& rng, double std_abs) {
  if (std_abs <= 0.0) return;
  for (auto& x : v.data) x += static_cast<float>(rng.normal(0.0, std_abs));
}

/// Separable Gaussian smoothing with sigma in voxels; border taps are
/// renormalized so constant volumes stay constant.
inline void gaussian_smooth_core(Volume& v, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i)
    w[static_cast<std::size_t>(i + radius)] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
  const auto& dims = v.geometry.dims;
  std::vector<double> buf(v.data.begin(), v.data.end());
  std::vector<double> line;
  for (int axis = 0; axis < 3; ++axis) {
    const int n = dims[axis];
    if (n == 1) continue;
    const std::size_t stride = axis == 0 ? 1
                             : axis == 1 ? static_cast<std::size_t>(dims[0])
                                         : static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
    const int nu = dims[axis == 0 ? 1 : 0];
    const int nv = dims[axis == 2 ? 1 : 2];
    const std::size_t stride_u = axis == 0 ? static_cast<std::size_t>(dims[0]) : 1;
    const std::size_t stride_v = axis == 2 ? static_cast<std::size_t>(dims[0])
                                           : static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
    line.assign(static_cast<std::size_t>(n), 0.0);
    for (int vv = 0; vv < nv; ++vv)
      for (int uu = 0; uu < nu; ++uu) {
        double* base = buf.data() + stride_u * static_cast<std::size_t>(uu) + stride_v * static_cast<std::size_t>(vv);
        for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = base[stride * static_cast<std::size_t>(i)];
        for (int i = 0; i < n; ++i) {
          double acc = 0.0, wsum = 0.0;
          const int jlo = std::max(0, i - radius), jhi = std::min(n - 1, i + radius);
          for (int j = jlo; j <= jhi; ++j) {
            const double wj = w[static_cast<std::size_t>(j - i + radius)];
            acc += wj * line[static_cast<std::size_t>(j)];
            wsum += wj;
          }
          base[stride * static_cast<std::size_t>(i)] = acc / wsum;
        }
      }
  }
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(buf[i]);
}

/// Multiply every voxel by `factor` exactly.
inline void intensity_scale_core(Volume& v, double factor) {
  const float f = static_cast<float>(factor);
  for (auto& x : v.data) x *= f;
}

/// Reverse the volume along each axis whose flag is set (an involution).
template <typename T>
inline void flip_core(Grid<T>& v, const std::array<bool, 3>& axes) {
  const auto& d = v.geometry.dims;
  auto src = v.data;
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const int sx = axes[0] ? d[0] - 1 - x : x;
        const int sy = axes[1] ? d[1] - 1 - y : y;
        const int sz = axes[2] ? d[2] - 1 - z : z;
        v.data[v.geometry.index(x, y, z)] = src[v.geometry.index(sx, sy, sz)];
      }
}

inline void flip_labels_core(LabelMap& m, const std::array<bool, 3>& axes) {
  Grid<Label> g(m.geometry, m.data);
  flip_core(g, axes);
  m.data = std::move(g.data);
}

struct MotionMovement {
  std::array<double, 3> degrees{};
  std::array<double, 3> translation_mm{};
};

/// Affine resample with rotation about the physical center plus translation;
/// linear interpolation, outside -> 0.
inline Volume affine_resample(const Volume& v, const MotionMovement& mv) {
  const auto& d = v.geometry.dims;
  const auto& sp = v.geometry.spacing;
  const auto R = augment_detail::rotation_matrix(mv.degrees);
  const double cx = 0.5 * (d[0] - 1) * sp[0], cy = 0.5 * (d[1] - 1) * sp[1], cz = 0.5 * (d[2] - 1) * sp[2];
  Volume out(v.geometry);
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        // output position p maps back through the inverse transform R^T
        const double px = x * sp[0] - cx - mv.translation_mm[0];
        const double py = y * sp[1] - cy - mv.translation_mm[1];
        const double pz = z * sp[2] - cz - mv.translation_mm[2];
        const double sx = R[0] * px + R[3] * py + R[6] * pz + cx;
        const double sy = R[1] * px + R[4] * py + R[7] * pz + cy;
        const double sz = R[2] * px + R[5] * py + R[8] * pz + cz;
        out.at(x, y, z) = augment_detail::sample_linear(v, sx / sp[0], sy / sp[1], sz / sp[2]);
      }
  return out;
}

/// Composite the original and each affine-resampled copy in k-space by
/// partitioning frequency-encoding axis `axis` at `splits` (sorted k indices):
/// lines before the first split come from the original, later segments from
/// successive movements.
inline void motion_core(Volume& v, int axis, const std::vector<int>& splits,
                        const std::vector<MotionMovement>& movements) {
  if (movements.empty()) return;
  if (splits.size() != movements.size())
    throw ValidationError("motion: need exactly one split per movement");
  const auto& d = v.geometry.dims;
  std::vector<Spectrum> spectra;
  spectra.reserve(movements.size() + 1);
  spectra.push_back(fft3(v));
  for (const auto& mv : movements) {
    Volume copy = affine_resample(v, mv);
    spectra.push_back(fft3(copy));
  }
  std::vector<int> bounds = splits;
  std::sort(bounds.begin(), bounds.end());
  Spectrum out = spectra[0];
  for (int k = 0; k < d[axis]; ++k) {
    std::size_t seg = 0;
    while (seg < bounds.size() && k >= bounds[seg]) ++seg;
    if (seg == 0) continue;  // original
    const auto& src = spectra[seg];
    // copy the k-th plane orthogonal to `axis`
    const int nu = d[axis == 0 ? 1 : 0];
    const int nv = d[axis == 2 ? 1 : 2];
    for (int vv = 0; vv < nv; ++vv)
      for (int uu = 0; uu < nu; ++uu) {
        int c[3];
        c[axis] = k;
        c[axis == 0 ? 1 : 0] = uu;
        c[axis == 2 ? 1 : 2] = vv;
        const std::size_t i = out.geometry.index(c[0], c[1], c[2]);
        out.data[i] = src.data[i];
      }
  }
  v = ifft3(out);
}

/// Add k-space spikes of magnitude intensity * |spectrum max| at the given
/// non-DC coordinates, then invert.
inline void spike_core(Volume& v, const std::vector<std::array<int, 3>>& coords,
                       const std::vector<double>& intensities) {
  if (coords.empty()) return;
  if (coords.size() != intensities.size())
    throw ValidationError("spike: need exactly one intensity per coordinate");
  Spectrum s = fft3(v);
  double max_mag = 0.0;
  for (const auto& c : s.data) max_mag = std::max(max_mag, std::abs(c));
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const auto& c = coords[k];
    if (c[0] == 0 && c[1] == 0 && c[2] == 0) throw ValidationError("spike: DC coordinate not allowed");
    s.data[s.geometry.index(c[0], c[1], c[2])] += Complex(intensities[k] * max_mag, 0.0);
  }
  v = ifft3(s);
}

/// Multiply by exp(P(x,y,z)) where P has the given coefficients over all
/// monomials x^i y^j z^k with i+j+k <= order (i outer, then j, then k) and
/// coordinates normalized to [-1,1].
inline void bias_field_core(Volume& v, const std::vector<double>& coefficients, int order) {
  std::size_t expected = 0;
  for (int i = 0; i <= order; ++i)
    for (int j = 0; i + j <= order; ++j)
      for (int k = 0; i + j + k <= order; ++k) ++expected;
  if (coefficients.size() != expected)
    throw ValidationError("bias_field: expected " + std::to_string(expected) + " coefficients for order " +
                          std::to_string(order) + ", got " + std::to_string(coefficients.size()));
  const auto& d = v.geometry.dims;
  const auto norm = [](int i, int n) { return n > 1 ? 2.0 * i / (n - 1.0) - 1.0 : 0.0; };
  for (int z = 0; z < d[2]; ++z) {
    const double zn = norm(z, d[2]);
    for (int y = 0; y < d[1]; ++y) {
      const double yn = norm(y, d[1]);
      for (int x = 0; x < d[0]; ++x) {
        const double xn = norm(x, d[0]);
        double poly = 0.0;
        std::size_t idx = 0;
        for (int i = 0; i <= order; ++i)
          for (int j = 0; i + j <= order; ++j)
            for (int k = 0; i + j + k <= order; ++k)
              poly += coefficients[idx++] * std::pow(xn, i) * std::pow(yn, j) * std::pow(zn, k);
        v.at(x, y, z) = static_cast<float>(v.at(x, y, z) * std::exp(poly));
      }
    }
  }
}

/// Dense displacement field defined by a control grid (control_points^3 nodes,
/// 3 components each, border layer zero), trilinearly upsampled.
struct ElasticField {
  int control_points = 7;
  std::vector<std::array<double, 3>> control;  // raster order over (x fastest)

  /// Displacement in voxels at a voxel coordinate.
  std::array<double, 3> displacement(const std::array<int, 3>& dims, int x, int y, int z) const {
    const int cp = control_points;
    const auto to_grid = [&](int v, int n) {
      return n > 1 ? static_cast<double>(v) * (cp - 1) / (n - 1.0) : 0.0;
    };
    const double u = to_grid(x, dims[0]), w = to_grid(y, dims[1]), t = to_grid(z, dims[2]);
    int i0 = std::min(static_cast<int>(u), cp - 2), j0 = std::min(static_cast<int>(w), cp - 2),
        k0 = std::min(static_cast<int>(t), cp - 2);
    const double fu = u - i0, fw = w - j0, ft = t - k0;
    std::array<double, 3> out{};
    for (int dk = 0; dk <= 1; ++dk)
      for (int dj = 0; dj <= 1; ++dj)
        for (int di = 0; di <= 1; ++di) {
          const double wgt = (di ? fu : 1.0 - fu) * (dj ? fw : 1.0 - fw) * (dk ? ft : 1.0 - ft);
          const auto& c = control[static_cast<std::size_t>((k0 + dk) * cp * cp + (j0 + dj) * cp + (i0 + di))];
          for (int a = 0; a < 3; ++a) out[a] += wgt * c[a];
        }
    return out;
  }
};

inline void elastic_core(Volume& v, const ElasticField& field) {
  const auto dims = v.geometry.dims;
  Volume out(v.geometry);
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x) {
        const auto d = field.displacement(dims, x, y, z);
        out.at(x, y, z) = augment_detail::sample_linear(v, x + d[0], y + d[1], z + d[2]);
      }
  v = std::move(out);
}

inline void elastic_labels_core(LabelMap& m, const ElasticField& field) {
  const auto dims = m.geometry.dims;
  std::vector<Label> out(m.data.size(), kBackground);
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x) {
        const auto d = field.displacement(dims, x, y, z);
        out[m.geometry.index(x, y, z)] = augment_detail::sample_nearest(m, x + d[0], y + d[1], z + d[2]);
      }
  m.data = std::move(out);
}

namespace augment_detail {

/// 1D resample of a line to m samples with align-corners coordinates.
template <typename Fetch, typename Store, typename Mix>
inline void resample_line(int n_in, int n_out, Fetch&& fetch, Store&& store, Mix&& mix) {
  for (int i = 0; i < n_out; ++i) {
    const double s = n_out > 1 ? static_cast<double>(i) * (n_in - 1) / (n_out - 1.0) : 0.0;
    const int s0 = std::min(static_cast<int>(s), n_in - 2 >= 0 ? n_in - 2 : 0);
    const double f = s - s0;
    store(i, mix(fetch(s0), fetch(std::min(s0 + 1, n_in - 1)), f));
  }
}

}  // namespace augment_detail

/// Downsample along one axis by `factor` then upsample back (linear for
/// intensities); dims are unchanged.
inline void anisotropy_core(Volume& v, int axis, double factor) {
  if (factor <= 1.0) return;
  const auto dims = v.geometry.dims;
  const int n = dims[axis];
  const int m = std::max(2, static_cast<int>(std::lround(n / factor)));
  if (m >= n) return;
  const std::size_t stride = axis == 0 ? 1
                           : axis == 1 ? static_cast<std::size_t>(dims[0])
                                       : static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
  const int nu = dims[axis == 0 ? 1 : 0];
  const int nv = dims[axis == 2 ? 1 : 2];
  const std::size_t stride_u = axis == 0 ? static_cast<std::size_t>(dims[0]) : 1;
  const std::size_t stride_v = axis == 2 ? static_cast<std::size_t>(dims[0])
                                         : static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
  std::vector<double> down(static_cast<std::size_t>(m));
  const auto lerp = [](double a, double b, double f) { return a + f * (b - a); };
  for (int vv = 0; vv < nv; ++vv)
    for (int uu = 0; uu < nu; ++uu) {
      float* base = v.data.data() + stride_u * static_cast<std::size_t>(uu) + stride_v * static_cast<std::size_t>(vv);
      const auto fetch_in = [&](int i) { return static_cast<double>(base[stride * static_cast<std::size_t>(i)]); };
      augment_detail::resample_line(n, m, fetch_in, [&](int i, double x) { down[static_cast<std::size_t>(i)] = x; },
                                    lerp);
      const auto fetch_down = [&](int i) { return down[static_cast<std::size_t>(i)]; };
      augment_detail::resample_line(
          m, n, fetch_down,
          [&](int i, double x) { base[stride * static_cast<std::size_t>(i)] = static_cast<float>(x); }, lerp);
    }
}

/// Label variant of anisotropy_core: nearest-neighbor both ways.
inline void anisotropy_labels_core(LabelMap& mlab, int axis, double factor) {
  if (factor <= 1.0) return;
  const auto dims = mlab.geometry.dims;
  const int n = dims[axis];
  const int m = std::max(2, static_cast<int>(std::lround(n / factor)));
  if (m >= n) return;
  const std::size_t stride = axis == 0 ? 1
                           : axis == 1 ? static_cast<std::size_t>(dims[0])
                                       : static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
  const int nu = dims[axis == 0 ? 1 : 0];
  const int nv = dims[axis == 2 ? 1 : 2];
  const std::size_t stride_u = axis == 0 ? static_cast<std::size_t>(dims[0]) : 1;
  const std::size_t stride_v = axis == 2 ? static_cast<std::size_t>(dims[0])
                                         : static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
  std::vector<Label> down(static_cast<std::size_t>(m));
  const auto nearest = [](Label a, Label b, double f) { return f < 0.5 ? a : b; };
  for (int vv = 0; vv < nv; ++vv)
    for (int uu = 0; uu < nu; ++uu) {
      Label* base = mlab.data.data() + stride_u * static_cast<std::size_t>(uu) + stride_v * static_cast<std::size_t>(vv);
      const auto fetch_in = [&](int i) { return base[stride * static_cast<std::size_t>(i)]; };
      augment_detail::resample_line(n, m, fetch_in, [&](int i, Label x) { down[static_cast<std::size_t>(i)] = x; },
                                    nearest);
      const auto fetch_down = [&](int i) { return down[static_cast<std::size_t>(i)]; };
      augment_detail::resample_line(
          m, n, fetch_down, [&](int i, Label x) { base[stride * static_cast<std::size_t>(i)] = x; }, nearest);
    }
}

// ---------------------------------------------------------------------------
// Sampling wrappers and the gated pipeline.
// ---------------------------------------------------------------------------

struct TransformReport {
  TransformKind kind = TransformKind::flip;
  double gate = 0.0;
  bool fired = false;
};

struct AugmentResult {
  std::vector<Volume> volumes;
  std::optional<LabelMap> labels;
  std::vector<TransformReport> report;
};

namespace augment_detail {

inline double intensity_range(const Volume& v) {
  const auto [lo, hi] = std::minmax_element(v.data.begin(), v.data.end());
  return static_cast<double>(*hi) - static_cast<double>(*lo);
}

/// Apply one fired transform. All parameters are drawn from `rng` in a fixed
/// documented order so results never depend on volume traversal details.
inline void apply_one(const TransformSpec& spec, RngStream& rng, std::vector<Volume>& vols, LabelMap* labels) {
  const auto& p = spec.params;
  switch (spec.kind) {
    case TransformKind::gibbs: {
      const double alpha = rng.uniform(p.alpha_min, p.alpha_max);
      for (auto& v : vols) gibbs_core(v, alpha);
      return;
    }
    case TransformKind::gaussian_noise: {
      const double frac = rng.uniform(p.noise_std_min, p.noise_std_max);
      for (auto& v : vols) gaussian_noise_core(v, rng, frac * intensity_range(v));
      return;
    }
    case TransformKind::gaussian_smooth: {
      const double sigma = rng.uniform(p.sigma_min, p.sigma_max);
      for (auto& v : vols) gaussian_smooth_core(v, sigma);
      return;
    }
    case TransformKind::intensity_scale: {
      const double f = rng.uniform(p.scale_min, p.scale_max);
      for (auto& v : vols) intensity_scale_core(v, f);
      return;
    }
    case TransformKind::flip: {
      std::array<bool, 3> axes{};
      for (int a = 0; a < 3; ++a) axes[static_cast<std::size_t>(a)] = rng.bernoulli(p.flip_chance);
      for (auto& v : vols) flip_core(v, axes);
      if (labels) flip_labels_core(*labels, axes);
      return;
    }
    case TransformKind::motion: {
      // draw order: per movement (3 angles, 3 translations), then axis, then splits
      std::vector<MotionMovement> movements(static_cast<std::size_t>(p.num_movements));
      for (auto& mv : movements) {
        for (int a = 0; a < 3; ++a) mv.degrees[static_cast<std::size_t>(a)] = rng.uniform(-p.degrees, p.degrees);
        for (int a = 0; a < 3; ++a)
          mv.translation_mm[static_cast<std::size_t>(a)] = rng.uniform(-p.translation_mm, p.translation_mm);
      }
      const int axis = static_cast<int>(rng.uniform_int(3));
      const int n = vols.empty() ? 0 : vols[0].geometry.dims[axis];
      std::vector<int> splits(movements.size());
      for (auto& s : splits) s = n > 1 ? 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - 1))) : 0;
      for (auto& v : vols) motion_core(v, axis, splits, movements);
      return;
    }
    case TransformKind::spike: {
      if (vols.empty()) return;
      const auto& d = vols[0].geometry.dims;
      std::vector<std::array<int, 3>> coords;
      std::vector<double> intensities;
      for (int k = 0; k < p.num_spikes; ++k) {
        std::array<int, 3> c{};
        do {
          for (int a = 0; a < 3; ++a)
            c[static_cast<std::size_t>(a)] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(d[a])));
        } while (c[0] == 0 && c[1] == 0 && c[2] == 0);
        coords.push_back(c);
        intensities.push_back(rng.uniform(p.spike_intensity_min, p.spike_intensity_max));
      }
      for (auto& v : vols) spike_core(v, coords, intensities);
      return;
    }
    case TransformKind::bias_field: {
      std::size_t n_coeff = 0;
      for (int i = 0; i <= p.bias_order; ++i)
        for (int j = 0; i + j <= p.bias_order; ++j)
          for (int k = 0; i + j + k <= p.bias_order; ++k) ++n_coeff;
      std::vector<double> coeffs(n_coeff);
      for (auto& c : coeffs) c = rng.uniform(-p.bias_coefficient, p.bias_coefficient);
      for (auto& v : vols) bias_field_core(v, coeffs, p.bias_order);
      return;
    }
    case TransformKind::elastic: {
      const int cp = p.control_points;
      ElasticField field;
      field.control_points = cp;
      field.control.resize(static_cast<std::size_t>(cp) * cp * cp);
      for (auto& c : field.control)
        for (int a = 0; a < 3; ++a) c[static_cast<std::size_t>(a)] =
            rng.uniform(-p.max_displacement_voxels, p.max_displacement_voxels);
      for (int k = 0; k < cp; ++k)
        for (int j = 0; j < cp; ++j)
          for (int i = 0; i < cp; ++i)
            if (i == 0 || j == 0 || k == 0 || i == cp - 1 || j == cp - 1 || k == cp - 1)
              field.control[static_cast<std::size_t>(k * cp * cp + j * cp + i)] = {0.0, 0.0, 0.0};
      for (auto& v : vols) elastic_core(v, field);
      if (labels) elastic_labels_core(*labels, field);
      return;
    }
    case TransformKind::anisotropy: {
      const int axis = static_cast<int>(rng.uniform_int(3));
      const double f = rng.uniform(p.downsample_min, p.downsample_max);
      for (auto& v : vols) anisotropy_core(v, axis, f);
      if (labels) anisotropy_labels_core(*labels, axis, f);
      return;
    }
  }
}

}  // namespace augment_detail

/// Probability-gated pipeline. Transform `t` draws from the stream keyed by
/// (master_seed, case_id, t); the first uniform is the gate, and parameters
/// only consume draws when the gate fires, so outcomes are independent of
/// execution order across cases and transforms.
inline AugmentResult apply_pipeline(std::vector<Volume> vols, const LabelMap* labels, const AugmentConfig& cfg,
                                    const std::string& case_id) {
  cfg.validate();
  const Geometry* g = nullptr;
  for (const auto& v : vols) {
    if (!g) g = &v.geometry;
    else require_same_grid(*g, v.geometry, "apply_pipeline volumes");
  }
  if (labels && g) require_same_grid(*g, labels->geometry, "apply_pipeline labels");

  AugmentResult res;
  res.volumes = std::move(vols);
  if (labels) res.labels = *labels;
  for (std::size_t t = 0; t < cfg.transforms.size(); ++t) {
    const auto& spec = cfg.transforms[t];
    RngStream rng(cfg.master_seed, case_id, t);
    TransformReport rep;
    rep.kind = spec.kind;
    rep.gate = rng.uniform();
    rep.fired = rep.gate < spec.probability;
    if (rep.fired)
      augment_detail::apply_one(spec, rng, res.volumes, res.labels ? &*res.labels : nullptr);
    res.report.push_back(rep);
  }
  return res;
}

}  // namespace gliakit
