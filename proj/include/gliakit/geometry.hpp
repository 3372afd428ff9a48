#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>

#include "gliakit/error.hpp"

namespace gliakit {

/// Voxel grid geometry: dimensions, physical spacing in mm and the
/// voxel-index-to-world affine. Voxels are stored x-fastest (NIfTI order).
struct Geometry {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::array<double, 16> affine{};  // row-major 4x4

  Geometry() = default;

  /// Axis-aligned geometry with the affine set to diag(spacing, 1).
  Geometry(std::array<int, 3> d, std::array<double, 3> s)
      : dims(d), spacing(s) {
    affine = {s[0], 0, 0, 0,
              0, s[1], 0, 0,
              0, 0, s[2], 0,
              0, 0, 0, 1};
  }

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(z));
  }

  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
  }

  double voxel_volume_mm3() const { return spacing[0] * spacing[1] * spacing[2]; }

  double affine_at(int r, int c) const { return affine[static_cast<std::size_t>(4 * r + c)]; }
  double& affine_at(int r, int c) { return affine[static_cast<std::size_t>(4 * r + c)]; }
};

namespace detail {
inline std::string dims_to_string(const std::array<int, 3>& d) {
  std::ostringstream os;
  os << d[0] << "x" << d[1] << "x" << d[2];
  return os.str();
}
}  // namespace detail

/// Throws ValidationError unless dims >= 1, spacing is positive and finite,
/// the affine's last row is (0,0,0,1) and its column norms match the spacing
/// to 1e-4 relative tolerance.
inline void validate_geometry(const Geometry& g) {
  for (int a = 0; a < 3; ++a) {
    if (g.dims[a] < 1)
      throw ValidationError("geometry: dims must be >= 1, got " + detail::dims_to_string(g.dims));
    if (!(g.spacing[a] > 0.0) || !std::isfinite(g.spacing[a]))
      throw ValidationError("geometry: spacing must be positive and finite");
  }
  const double last[4] = {g.affine_at(3, 0), g.affine_at(3, 1), g.affine_at(3, 2), g.affine_at(3, 3)};
  if (last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0)
    throw ValidationError("geometry: affine last row must be (0,0,0,1)");
  for (int c = 0; c < 3; ++c) {
    double n2 = 0.0;
    for (int r = 0; r < 3; ++r) n2 += g.affine_at(r, c) * g.affine_at(r, c);
    const double n = std::sqrt(n2);
    if (std::abs(n - g.spacing[c]) > 1e-4 * g.spacing[c])
      throw ValidationError("geometry: affine column norm disagrees with spacing on axis " + std::to_string(c));
  }
}

/// True when two geometries describe the same grid (dims exact, spacing and
/// affine within a small relative tolerance that absorbs float32 header storage).
inline bool same_grid(const Geometry& a, const Geometry& b, double rel_tol = 1e-5) {
  if (a.dims != b.dims) return false;
  for (int i = 0; i < 3; ++i) {
    const double scale = std::max(std::abs(a.spacing[i]), std::abs(b.spacing[i]));
    if (std::abs(a.spacing[i] - b.spacing[i]) > rel_tol * scale) return false;
  }
  for (int i = 0; i < 16; ++i) {
    const double scale = std::max({std::abs(a.affine[static_cast<std::size_t>(i)]),
                                   std::abs(b.affine[static_cast<std::size_t>(i)]), 1.0});
    if (std::abs(a.affine[static_cast<std::size_t>(i)] - b.affine[static_cast<std::size_t>(i)]) > rel_tol * scale)
      return false;
  }
  return true;
}

/// Precondition helper used by every two-volume operation: mismatched grids
/// must raise, never silently resample.
inline void require_same_grid(const Geometry& a, const Geometry& b, const std::string& what) {
  if (!same_grid(a, b))
    throw ValidationError(std::string(what) + ": geometry mismatch (" + detail::dims_to_string(a.dims) +
                          " vs " + detail::dims_to_string(b.dims) + ")");
}

}  // namespace gliakit
