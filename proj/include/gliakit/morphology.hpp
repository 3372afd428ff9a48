#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "gliakit/error.hpp"
#include "gliakit/geometry.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {

enum class Connectivity : int { six = 6, eighteen = 18, twenty_six = 26 };

inline Connectivity connectivity_from_int(int c) {
  switch (c) {
    case 6: return Connectivity::six;
    case 18: return Connectivity::eighteen;
    case 26: return Connectivity::twenty_six;
    default: throw ValidationError("connectivity must be 6, 18 or 26, got " + std::to_string(c));
  }
}

namespace morph_detail {

/// Neighbor offsets for a connectivity class, in raster order.
inline std::vector<std::array<int, 3>> neighbor_offsets(Connectivity c) {
  std::vector<std::array<int, 3>> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (c == Connectivity::six && manhattan > 1) continue;
        if (c == Connectivity::eighteen && manhattan > 2) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

}  // namespace morph_detail

/// Partition of a binary mask into connected components. Component ids are
/// 1..count, assigned in raster-scan order of each component's first voxel.
struct ComponentLabeling {
  Geometry geometry;
  std::vector<std::int32_t> component_id;  // 0 = background
  int count = 0;
  std::vector<std::int64_t> sizes;         // sizes[i] is the voxel count of component i+1

  std::int64_t size_of(int id) const { return sizes[static_cast<std::size_t>(id - 1)]; }
};

inline ComponentLabeling connected_components(const Mask& mask, Connectivity conn = Connectivity::twenty_six) {
  validate_geometry(mask.geometry);
  ComponentLabeling out;
  out.geometry = mask.geometry;
  out.component_id.assign(mask.data.size(), 0);
  const auto offsets = morph_detail::neighbor_offsets(conn);
  const int nx = mask.geometry.dims[0], ny = mask.geometry.dims[1], nz = mask.geometry.dims[2];
  std::vector<std::size_t> stack;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const std::size_t seed = mask.geometry.index(x, y, z);
        if (!mask.data[seed] || out.component_id[seed]) continue;
        const std::int32_t id = ++out.count;
        std::int64_t size = 0;
        stack.clear();
        stack.push_back(seed);
        out.component_id[seed] = id;
        while (!stack.empty()) {
          const std::size_t cur = stack.back();
          stack.pop_back();
          ++size;
          const int cx = static_cast<int>(cur % static_cast<std::size_t>(nx));
          const int cy = static_cast<int>((cur / static_cast<std::size_t>(nx)) % static_cast<std::size_t>(ny));
          const int cz = static_cast<int>(cur / (static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)));
          for (const auto& d : offsets) {
            const int px = cx + d[0], py = cy + d[1], pz = cz + d[2];
            if (!mask.geometry.in_bounds(px, py, pz)) continue;
            const std::size_t ni = mask.geometry.index(px, py, pz);
            if (mask.data[ni] && !out.component_id[ni]) {
              out.component_id[ni] = id;
              stack.push_back(ni);
            }
          }
        }
        out.sizes.push_back(size);
      }
  return out;
}

/// Mask of one component.
inline Mask component_mask(const ComponentLabeling& cc, int id) {
  Mask m(cc.geometry);
  for (std::size_t i = 0; i < cc.component_id.size(); ++i) m.data[i] = cc.component_id[i] == id;
  return m;
}

namespace morph_detail {

/// 1D sliding-window OR along an axis, window = [-radius, +radius].
inline void dilate_axis(std::vector<std::uint8_t>& data, const Geometry& g, int axis, int radius) {
  const int n = g.dims[axis];
  const std::size_t stride = axis == 0 ? 1
                            : axis == 1 ? static_cast<std::size_t>(g.dims[0])
                                        : static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1]);
  const std::size_t n_lines_a = static_cast<std::size_t>(axis == 0 ? g.dims[1] : g.dims[0]);
  const std::size_t n_lines_b = static_cast<std::size_t>(axis == 2 ? g.dims[1] : g.dims[2]);
  const std::size_t step_a = axis == 0 ? static_cast<std::size_t>(g.dims[0]) : 1;
  const std::size_t step_b = axis == 2 ? static_cast<std::size_t>(g.dims[0])
                                       : static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1]);
  std::vector<std::int32_t> prefix(static_cast<std::size_t>(n) + 1);
  std::vector<std::uint8_t> line(static_cast<std::size_t>(n));
  for (std::size_t b = 0; b < n_lines_b; ++b)
    for (std::size_t a = 0; a < n_lines_a; ++a) {
      const std::size_t base = a * step_a + b * step_b;
      prefix[0] = 0;
      for (int i = 0; i < n; ++i) prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + (data[base + static_cast<std::size_t>(i) * stride] != 0);
      for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - radius);
        const int hi = std::min(n - 1, i + radius);
        line[static_cast<std::size_t>(i)] = prefix[static_cast<std::size_t>(hi) + 1] - prefix[static_cast<std::size_t>(lo)] > 0;
      }
      for (int i = 0; i < n; ++i) data[base + static_cast<std::size_t>(i) * stride] = line[static_cast<std::size_t>(i)];
    }
}

}  // namespace morph_detail

/// Dilation by the iterated 3x3x3 box element: a voxel is set iff some
/// foreground voxel lies within Chebyshev distance `radius`.
inline Mask dilate(const Mask& mask, int radius) {
  if (radius < 1) throw ValidationError("dilate: radius must be >= 1");
  Mask out = mask;
  for (int axis = 0; axis < 3; ++axis) morph_detail::dilate_axis(out.data, out.geometry, axis, radius);
  return out;
}

namespace morph_detail {

inline constexpr double kEdtInf = 1e30;

/// Felzenszwalb-Huttenlocher lower-envelope pass for f(x) = min_y f(y) + a*(x-y)^2.
/// Positions are integer grid indices; `a` is the squared axis spacing.
/// The boundary sentinels must be true infinities: with kEdtInf background
/// values and sub-voxel spacing the intersection abscissa can exceed 1e30 in
/// magnitude, and a finite sentinel would let k underrun the envelope arrays.
inline void edt_pass_1d(double* f, int n, double a, int* v, double* z, double* out) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    const double fq = f[q] + a * (static_cast<double>(q) * q);
    double s = (fq - (f[v[k]] + a * (static_cast<double>(v[k]) * v[k]))) / (2.0 * a * (q - v[k]));
    while (s <= z[k]) {
      --k;
      s = (fq - (f[v[k]] + a * (static_cast<double>(v[k]) * v[k]))) / (2.0 * a * (q - v[k]));
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double d = static_cast<double>(q - v[k]);
    out[q] = f[v[k]] + a * (d * d);
  }
}

inline void edt_axis(std::vector<double>& dist2, const Geometry& g, int axis) {
  const int n = g.dims[axis];
  const std::size_t stride = axis == 0 ? 1
                            : axis == 1 ? static_cast<std::size_t>(g.dims[0])
                                        : static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1]);
  const std::size_t n_lines_a = static_cast<std::size_t>(axis == 0 ? g.dims[1] : g.dims[0]);
  const std::size_t n_lines_b = static_cast<std::size_t>(axis == 2 ? g.dims[1] : g.dims[2]);
  const std::size_t step_a = axis == 0 ? static_cast<std::size_t>(g.dims[0]) : 1;
  const std::size_t step_b = axis == 2 ? static_cast<std::size_t>(g.dims[0])
                                       : static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1]);
  const double a = g.spacing[axis] * g.spacing[axis];
  std::vector<double> f(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  for (std::size_t b = 0; b < n_lines_b; ++b)
    for (std::size_t al = 0; al < n_lines_a; ++al) {
      const std::size_t base = al * step_a + b * step_b;
      for (int i = 0; i < n; ++i) f[static_cast<std::size_t>(i)] = dist2[base + static_cast<std::size_t>(i) * stride];
      edt_pass_1d(f.data(), n, a, v.data(), z.data(), out.data());
      for (int i = 0; i < n; ++i) dist2[base + static_cast<std::size_t>(i) * stride] = out[static_cast<std::size_t>(i)];
    }
}

}  // namespace morph_detail

/// Exact Euclidean distance transform: each voxel gets the distance in mm to
/// the nearest foreground voxel center, honoring anisotropic spacing.
/// Throws on an all-background mask (the distance is undefined).
inline std::vector<double> edt(const Mask& mask) {
  validate_geometry(mask.geometry);
  if (count_foreground(mask) == 0)
    throw ValidationError("edt: mask has no foreground, distance is undefined");
  std::vector<double> dist2(mask.data.size());
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    dist2[i] = mask.data[i] ? 0.0 : morph_detail::kEdtInf;
  for (int axis = 0; axis < 3; ++axis) morph_detail::edt_axis(dist2, mask.geometry, axis);
  for (auto& d : dist2) d = std::sqrt(d);
  return dist2;
}

/// Foreground voxels with at least one 6-neighbor that is background or out
/// of bounds; surfaces come out one voxel thick.
inline Mask surface_voxels(const Mask& mask) {
  Mask out(mask.geometry);
  const int nx = mask.geometry.dims[0], ny = mask.geometry.dims[1], nz = mask.geometry.dims[2];
  static constexpr std::array<std::array<int, 3>, 6> kFaces{{{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        if (!mask.at(x, y, z)) continue;
        bool boundary = false;
        for (const auto& d : kFaces) {
          const int px = x + d[0], py = y + d[1], pz = z + d[2];
          if (!mask.geometry.in_bounds(px, py, pz) || !mask.at(px, py, pz)) {
            boundary = true;
            break;
          }
        }
        out.at(x, y, z) = boundary;
      }
  return out;
}

}  // namespace gliakit
