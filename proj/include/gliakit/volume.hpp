#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gliakit/error.hpp"
#include "gliakit/geometry.hpp"
#include "gliakit/schema.hpp"

namespace gliakit {

template <typename T>
struct Grid {
  Geometry geometry;
  std::vector<T> data;

  Grid() = default;
  explicit Grid(const Geometry& g, T fill = T{}) : geometry(g), data(g.voxel_count(), fill) {
    validate_geometry(g);
  }
  Grid(const Geometry& g, std::vector<T> d) : geometry(g), data(std::move(d)) {
    validate_geometry(g);
    if (data.size() != g.voxel_count())
      throw ValidationError("grid: data length does not match dims");
  }

  T at(int x, int y, int z) const { return data[geometry.index(x, y, z)]; }
  T& at(int x, int y, int z) { return data[geometry.index(x, y, z)]; }
  std::size_t size() const { return data.size(); }
};

/// 3D scalar intensity grid; 32-bit float internally.
using Volume = Grid<float>;

/// Binary grid; nonzero means foreground.
using Mask = Grid<std::uint8_t>;

/// Throws unless every value is finite; names the first offending index.
inline void validate_volume(const Volume& v) {
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    if (!std::isfinite(v.data[i])) {
      const int nx = v.geometry.dims[0], ny = v.geometry.dims[1];
      const std::size_t plane = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
      const int z = static_cast<int>(i / plane);
      const int y = static_cast<int>((i % plane) / static_cast<std::size_t>(nx));
      const int x = static_cast<int>(i % static_cast<std::size_t>(nx));
      throw ValidationError("volume: non-finite intensity at linear index " + std::to_string(i) + " (voxel " +
                            std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(z) + ")");
    }
  }
}

inline std::size_t count_foreground(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.data) n += (v != 0);
  return n;
}

/// 3D integer grid over a declared label schema.
struct LabelMap {
  Geometry geometry;
  std::vector<Label> data;
  LabelSchema schema;

  LabelMap() = default;
  LabelMap(const Geometry& g, LabelSchema s, Label fill = kBackground)
      : geometry(g), data(g.voxel_count(), fill), schema(std::move(s)) {
    validate_geometry(g);
    if (!schema.contains(fill)) throw ValidationError("labelmap: fill label not in schema");
  }
  LabelMap(const Geometry& g, std::vector<Label> d, LabelSchema s)
      : geometry(g), data(std::move(d)), schema(std::move(s)) {
    validate_geometry(g);
    if (data.size() != g.voxel_count())
      throw ValidationError("labelmap: data length does not match dims");
    validate_labels();
  }

  Label at(int x, int y, int z) const { return data[geometry.index(x, y, z)]; }
  Label& at(int x, int y, int z) { return data[geometry.index(x, y, z)]; }

  void validate_labels() const {
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!schema.contains(data[i]))
        throw ValidationError("labelmap: value " + std::to_string(int(data[i])) + " at linear index " +
                              std::to_string(i) + " is not in schema '" + schema.name + "'");
  }
};

/// Per-class stack of probability grids sharing one geometry.
struct ProbMap {
  Geometry geometry;
  std::vector<Label> channels;              // class label per channel, in storage order
  std::vector<std::vector<float>> data;     // one grid per channel
  bool normalized = false;                  // per-voxel channel sums ~ 1

  ProbMap() = default;
  ProbMap(const Geometry& g, std::vector<Label> ch)
      : geometry(g), channels(std::move(ch)), data(channels.size(), std::vector<float>(g.voxel_count(), 0.f)) {
    validate_geometry(g);
    if (channels.empty()) throw ValidationError("probmap: needs at least one channel");
  }

  std::size_t channel_count() const { return channels.size(); }

  int channel_of(Label lab) const {
    for (std::size_t c = 0; c < channels.size(); ++c)
      if (channels[c] == lab) return static_cast<int>(c);
    return -1;
  }

  /// Clamp all values into [0,1]; useful after lossy I/O.
  void clamp01() {
    for (auto& grid : data)
      for (auto& v : grid) v = std::min(1.0f, std::max(0.0f, v));
  }

  /// Checks channel sizes, the [0,1] range, and the per-voxel sum when
  /// `normalized`.
  void validate() const {
    for (const auto& grid : data) {
      if (grid.size() != geometry.voxel_count())
        throw ValidationError("probmap: channel grid size mismatch");
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (!(grid[i] >= 0.0f && grid[i] <= 1.0f))
          throw ValidationError("probmap: value " + std::to_string(grid[i]) + " at linear index " +
                                std::to_string(i) + " is outside [0,1]");
    }
    if (normalized) {
      for (std::size_t i = 0; i < geometry.voxel_count(); ++i) {
        double s = 0.0;
        for (const auto& grid : data) s += grid[i];
        if (std::abs(s - 1.0) > 1e-4)
          throw ValidationError("probmap: voxel " + std::to_string(i) + " channel sum " + std::to_string(s) +
                                " violates normalization");
      }
    }
  }
};

/// One-hot ProbMap over the given channels; gt labels must all be covered.
inline ProbMap one_hot(const LabelMap& gt, const std::vector<Label>& channels) {
  ProbMap p(gt.geometry, channels);
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const int c = p.channel_of(gt.data[i]);
    if (c < 0)
      throw ValidationError("one_hot: label " + std::to_string(int(gt.data[i])) + " has no channel");
    p.data[static_cast<std::size_t>(c)][i] = 1.0f;
  }
  p.normalized = true;
  return p;
}

}  // namespace gliakit
