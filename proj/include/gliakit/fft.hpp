#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "gliakit/geometry.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {

using Complex = std::complex<double>;

/// Unnormalized 3D spectrum of a volume. The forward transform carries no
/// scale factor; the inverse applies 1/N, so spike intensities are stated
/// relative to the raw forward coefficients.
struct Spectrum {
  Geometry geometry;
  std::vector<Complex> data;

  Complex at(int kx, int ky, int kz) const { return data[geometry.index(kx, ky, kz)]; }
  Complex& at(int kx, int ky, int kz) { return data[geometry.index(kx, ky, kz)]; }
};

namespace fft_detail {

inline constexpr double kPi = 3.14159265358979323846;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Iterative radix-2 Cooley-Tukey, in place. n must be a power of two.
inline void fft_pow2(Complex* a, std::size_t n, bool inverse) {
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    const Complex wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      Complex w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  // no normalization here; callers divide by n where the convention needs it
}

/// Scratch space for one 1D transform size, reusable across lines.
struct Plan {
  std::size_t n = 0;
  bool bluestein = false;
  std::size_t m = 0;                  // padded power-of-two size
  std::vector<Complex> chirp;         // w_k = exp(-i*pi*k^2/n)
  std::vector<Complex> bspec;         // FFT of the chirp filter
  std::vector<Complex> work_a, work_b;

  explicit Plan(std::size_t size) : n(size) {
    if (is_pow2(n)) return;
    bluestein = true;
    m = next_pow2(2 * n - 1);
    chirp.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the chirp angle accurate for long lines
      const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n);
      const double ang = -kPi * static_cast<double>(k2) / static_cast<double>(n);
      chirp[k] = Complex(std::cos(ang), std::sin(ang));
    }
    work_a.assign(m, Complex{});
    work_b.assign(m, Complex{});
    std::vector<Complex> b(m, Complex{});
    b[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
    fft_pow2(b.data(), m, false);
    bspec = std::move(b);
  }

  /// Forward DFT of length n (no normalization), in place.
  void forward(Complex* a) {
    if (!bluestein) {
      fft_pow2(a, n, false);
      return;
    }
    auto& fa = work_a;
    std::fill(fa.begin(), fa.end(), Complex{});
    for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fft_pow2(fa.data(), m, false);
    for (std::size_t k = 0; k < m; ++k) fa[k] *= bspec[k];
    fft_pow2(fa.data(), m, true);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * inv_m * chirp[k];
  }

  /// Inverse DFT of length n including the 1/n factor, in place.
  void inverse(Complex* a) {
    if (!bluestein) {
      fft_pow2(a, n, true);
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) a[k] *= inv_n;
      return;
    }
    for (std::size_t k = 0; k < n; ++k) a[k] = std::conj(a[k]);
    forward(a);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) a[k] = std::conj(a[k]) * inv_n;
  }
};

/// Applies 1D transforms along one axis of an x-fastest 3D grid.
inline void transform_axis(std::vector<Complex>& grid, const std::array<int, 3>& dims, int axis, bool inverse) {
  const std::size_t nx = static_cast<std::size_t>(dims[0]);
  const std::size_t ny = static_cast<std::size_t>(dims[1]);
  const std::size_t nz = static_cast<std::size_t>(dims[2]);
  const std::size_t n = static_cast<std::size_t>(dims[axis]);
  Plan plan(n);
  std::vector<Complex> line(n);

  const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? nx : nx * ny);
  // iterate over all lines perpendicular to `axis`
  const std::size_t along[2] = {axis == 0 ? ny : nx, axis == 2 ? ny : nz};
  const std::size_t step0 = axis == 0 ? nx : 1;
  const std::size_t step1 = axis == 2 ? nx : nx * ny;
  for (std::size_t j = 0; j < along[1]; ++j) {
    for (std::size_t i = 0; i < along[0]; ++i) {
      const std::size_t base = i * step0 + j * step1;
      for (std::size_t k = 0; k < n; ++k) line[k] = grid[base + k * stride];
      if (inverse)
        plan.inverse(line.data());
      else
        plan.forward(line.data());
      for (std::size_t k = 0; k < n; ++k) grid[base + k * stride] = line[k];
    }
  }
}

inline void fft3_inplace(std::vector<Complex>& grid, const std::array<int, 3>& dims, bool inverse) {
  for (int axis = 0; axis < 3; ++axis) transform_axis(grid, dims, axis, inverse);
}

}  // namespace fft_detail

/// Forward 3D DFT, unnormalized. Dims need not be powers of two.
inline Spectrum fft3(const Volume& v) {
  Spectrum s;
  s.geometry = v.geometry;
  s.data.assign(v.data.begin(), v.data.end());
  fft_detail::fft3_inplace(s.data, v.geometry.dims, false);
  return s;
}

/// Inverse 3D DFT carrying the 1/N factor; returns the real part.
inline Volume ifft3(const Spectrum& s) {
  std::vector<Complex> grid = s.data;
  fft_detail::fft3_inplace(grid, s.geometry.dims, true);
  Volume v(s.geometry);
  for (std::size_t i = 0; i < grid.size(); ++i) v.data[i] = static_cast<float>(grid[i].real());
  return v;
}

}  // namespace gliakit
