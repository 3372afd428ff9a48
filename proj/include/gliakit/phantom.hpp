#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gliakit/error.hpp"
#include "gliakit/morphology.hpp"
#include "gliakit/rng.hpp"
#include "gliakit/schema.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {

struct LesionSpec {
  std::array<double, 3> center_mm{};
  std::array<double, 3> semi_axes_mm{};
  Label label = kEt;
  float intensity = 1.0f;
};

struct PhantomSpec {
  std::array<int, 3> dims{64, 64, 64};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<LesionSpec> lesions;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  LabelSchema schema = LabelSchema::agpt();

  void validate() const {
    Geometry g(dims, spacing);
    validate_geometry(g);
    if (noise_std < 0.0) throw ValidationError("phantom: noise_std must be >= 0");
    for (std::size_t k = 0; k < lesions.size(); ++k) {
      const auto& l = lesions[k];
      if (!schema.contains(l.label))
        throw ValidationError("phantom: lesion " + std::to_string(k) + " label " + std::to_string(int(l.label)) +
                              " is not in schema '" + schema.name + "'");
      for (int a = 0; a < 3; ++a) {
        if (!(l.semi_axes_mm[a] > 0.0))
          throw ValidationError("phantom: lesion " + std::to_string(k) + " semi-axes must be > 0");
        const double extent = static_cast<double>(dims[a] - 1) * spacing[a];
        if (l.center_mm[a] - l.semi_axes_mm[a] < 0.0 || l.center_mm[a] + l.semi_axes_mm[a] > extent)
          throw ValidationError("phantom: lesion " + std::to_string(k) + " leaves the grid along axis " +
                                std::to_string(a));
      }
    }
  }
};

struct LesionBookkeeping {
  std::size_t lesion_index = 0;
  Label label = kBackground;
  std::int64_t voxels = 0;                  // voxels this lesion owns after overlap resolution
  std::array<double, 3> centroid_voxel{};   // mean voxel coordinate of owned voxels
};

struct Phantom {
  Volume volume;
  LabelMap labels;
  std::vector<LesionBookkeeping> lesions;
};

/// Deterministic labeled-ellipsoid phantom. A voxel belongs to the last lesion
/// in the list whose ellipsoid contains its center; intensities are the lesion
/// intensity plus seeded Gaussian noise.
inline Phantom generate(const PhantomSpec& spec) {
  spec.validate();
  const Geometry g(spec.dims, spec.spacing);
  Phantom out;
  out.volume = Volume(g);
  out.labels.geometry = g;
  out.labels.schema = spec.schema;
  out.labels.data.assign(g.voxel_count(), kBackground);
  std::vector<std::int32_t> owner(g.voxel_count(), -1);

  for (std::size_t k = 0; k < spec.lesions.size(); ++k) {
    const auto& l = spec.lesions[k];
    int lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0, static_cast<int>(std::floor((l.center_mm[a] - l.semi_axes_mm[a]) / spec.spacing[a])));
      hi[a] = std::min(spec.dims[a] - 1,
                       static_cast<int>(std::ceil((l.center_mm[a] + l.semi_axes_mm[a]) / spec.spacing[a])));
    }
    for (int z = lo[2]; z <= hi[2]; ++z)
      for (int y = lo[1]; y <= hi[1]; ++y)
        for (int x = lo[0]; x <= hi[0]; ++x) {
          const double dx = (x * spec.spacing[0] - l.center_mm[0]) / l.semi_axes_mm[0];
          const double dy = (y * spec.spacing[1] - l.center_mm[1]) / l.semi_axes_mm[1];
          const double dz = (z * spec.spacing[2] - l.center_mm[2]) / l.semi_axes_mm[2];
          if (dx * dx + dy * dy + dz * dz <= 1.0) {
            const std::size_t i = g.index(x, y, z);
            out.labels.data[i] = l.label;
            owner[i] = static_cast<std::int32_t>(k);
          }
        }
  }

  out.lesions.resize(spec.lesions.size());
  for (std::size_t k = 0; k < spec.lesions.size(); ++k) {
    out.lesions[k].lesion_index = k;
    out.lesions[k].label = spec.lesions[k].label;
  }
  for (int z = 0; z < spec.dims[2]; ++z)
    for (int y = 0; y < spec.dims[1]; ++y)
      for (int x = 0; x < spec.dims[0]; ++x) {
        const std::int32_t k = owner[g.index(x, y, z)];
        if (k < 0) continue;
        auto& b = out.lesions[static_cast<std::size_t>(k)];
        ++b.voxels;
        b.centroid_voxel[0] += x;
        b.centroid_voxel[1] += y;
        b.centroid_voxel[2] += z;
      }
  for (auto& b : out.lesions)
    if (b.voxels > 0)
      for (double& c : b.centroid_voxel) c /= static_cast<double>(b.voxels);

  RngStream rng(spec.seed, "phantom", 0);
  for (std::size_t i = 0; i < out.volume.data.size(); ++i) {
    const std::int32_t k = owner[i];
    const float base = k < 0 ? 0.0f : spec.lesions[static_cast<std::size_t>(k)].intensity;
    const double noise = spec.noise_std > 0.0 ? rng.normal(0.0, spec.noise_std) : 0.0;
    out.volume.data[i] = base + static_cast<float>(noise);
  }
  return out;
}

enum class PerturbKind { erode_surface, drop_lesion, add_fp_blob };

struct PerturbRecord {
  PerturbKind kind = PerturbKind::erode_surface;
  std::int64_t voxels_changed = 0;
  Label label = kBackground;              // label involved (dropped / added)
  std::array<int, 3> at{-1, -1, -1};      // representative voxel of the change
};

/// Controlled, reproducible label perturbations for manufacturing FN/FP cases.
inline std::pair<LabelMap, PerturbRecord> perturb(const LabelMap& labels, PerturbKind kind, RngStream& rng) {
  LabelMap out = labels;
  PerturbRecord rec;
  rec.kind = kind;
  const auto& g = labels.geometry;

  if (kind == PerturbKind::erode_surface) {
    Mask fg(g);
    for (std::size_t i = 0; i < labels.data.size(); ++i) fg.data[i] = labels.data[i] != kBackground;
    const Mask surf = surface_voxels(fg);
    for (std::size_t i = 0; i < surf.data.size(); ++i)
      if (surf.data[i]) {
        out.data[i] = kBackground;
        ++rec.voxels_changed;
      }
    return {std::move(out), rec};
  }

  if (kind == PerturbKind::drop_lesion) {
    Mask fg(g);
    for (std::size_t i = 0; i < labels.data.size(); ++i) fg.data[i] = labels.data[i] != kBackground;
    const auto cc = connected_components(fg, Connectivity::twenty_six);
    if (cc.count == 0) return {std::move(out), rec};
    const int victim = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cc.count)));
    for (std::size_t i = 0; i < out.data.size(); ++i)
      if (cc.component_id[i] == victim) {
        if (rec.voxels_changed == 0) {
          rec.label = out.data[i];
          const int z = static_cast<int>(i / (static_cast<std::size_t>(g.dims[0]) * g.dims[1]));
          const std::size_t rem = i - static_cast<std::size_t>(z) * g.dims[0] * g.dims[1];
          rec.at = {static_cast<int>(rem % static_cast<std::size_t>(g.dims[0])),
                    static_cast<int>(rem / static_cast<std::size_t>(g.dims[0])), z};
        }
        out.data[i] = kBackground;
        ++rec.voxels_changed;
      }
    return {std::move(out), rec};
  }

  // add_fp_blob: a ball of foreground label placed entirely on background.
  const auto fg_labels = [&] {
    std::vector<Label> ls;
    for (Label l : labels.schema.labels())
      if (l != kBackground) ls.push_back(l);
    return ls;
  }();
  if (fg_labels.empty()) throw ValidationError("perturb: schema has no foreground labels");
  for (int attempt = 0; attempt < 256; ++attempt) {
    const int r = 2 + static_cast<int>(rng.uniform_int(3));  // radius 2..4 -> >= 33 voxels
    const Label label = fg_labels[rng.uniform_int(fg_labels.size())];
    std::array<int, 3> c{};
    bool fits = true;
    for (int a = 0; a < 3; ++a) {
      const int span = g.dims[a] - 2 * r;
      if (span <= 0) {
        fits = false;
        break;
      }
      c[a] = r + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span)));
    }
    if (!fits) throw ValidationError("perturb: grid too small for an fp blob");
    std::vector<std::size_t> ball;
    bool clean = true;
    for (int dz = -r; dz <= r && clean; ++dz)
      for (int dy = -r; dy <= r && clean; ++dy)
        for (int dx = -r; dx <= r && clean; ++dx) {
          if (dx * dx + dy * dy + dz * dz > r * r) continue;
          const std::size_t i = g.index(c[0] + dx, c[1] + dy, c[2] + dz);
          if (labels.data[i] != kBackground) clean = false;
          else ball.push_back(i);
        }
    if (!clean) continue;
    for (std::size_t i : ball) out.data[i] = label;
    rec.voxels_changed = static_cast<std::int64_t>(ball.size());
    rec.label = label;
    rec.at = c;
    return {std::move(out), rec};
  }
  throw ValidationError("perturb: could not place an fp blob on background after 256 attempts");
}

}  // namespace gliakit
