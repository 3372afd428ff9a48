#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gliakit/error.hpp"
#include "gliakit/morphology.hpp"
#include "gliakit/regions.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {

struct PostprocConfig {
  int dust_min_voxels = 50;
  std::vector<std::string> dust_regions = {"ET", "TC", "WT"};
  double et_wt_threshold = 0.03;
  double snfh_wt_trigger = 1.0;
  Connectivity connectivity = Connectivity::twenty_six;

  void validate() const {
    if (dust_min_voxels < 0) throw ValidationError("postproc: dust_min_voxels must be >= 0");
    if (et_wt_threshold < 0.0 || et_wt_threshold > 1.0)
      throw ValidationError("postproc: et_wt_threshold must be in [0,1]");
    if (snfh_wt_trigger < 0.0 || snfh_wt_trigger > 1.0)
      throw ValidationError("postproc: snfh_wt_trigger must be in [0,1]");
  }
};

namespace postproc_detail {

/// Relabel every voxel of one sub-threshold component to the most frequent
/// label among its 26-neighbors, skipping neighbors that belong to the same
/// component. New labels for the whole component are decided against the
/// current map before any of them is written.
inline void relabel_component(LabelMap& labels, const std::vector<std::size_t>& comp_voxels,
                              const std::vector<char>& in_component) {
  const auto& g = labels.geometry;
  const auto offsets = morph_detail::neighbor_offsets(Connectivity::twenty_six);
  std::vector<Label> next(comp_voxels.size());
  for (std::size_t vi = 0; vi < comp_voxels.size(); ++vi) {
    const std::size_t i = comp_voxels[vi];
    const int z = static_cast<int>(i / (static_cast<std::size_t>(g.dims[0]) * g.dims[1]));
    const std::size_t rem = i - static_cast<std::size_t>(z) * g.dims[0] * g.dims[1];
    const int y = static_cast<int>(rem / static_cast<std::size_t>(g.dims[0]));
    const int x = static_cast<int>(rem % static_cast<std::size_t>(g.dims[0]));
    std::array<int, 256> counts{};
    bool any = false;
    for (const auto& d : offsets) {
      const int nx = x + d[0], ny = y + d[1], nz = z + d[2];
      if (!g.in_bounds(nx, ny, nz)) continue;
      const std::size_t ni = g.index(nx, ny, nz);
      if (in_component[ni]) continue;
      ++counts[labels.data[ni]];
      any = true;
    }
    if (!any) {
      next[vi] = kBackground;
      continue;
    }
    int best = 0;
    for (int l = 1; l < 256; ++l)
      if (counts[l] > counts[best]) best = l;  // ties keep the smaller label
    next[vi] = static_cast<Label>(best);
  }
  for (std::size_t vi = 0; vi < comp_voxels.size(); ++vi) labels.data[comp_voxels[vi]] = next[vi];
}

}  // namespace postproc_detail

/// Dust removal: for each configured region in order, connected components of
/// the region mask smaller than the size floor are dissolved into their
/// surroundings. Later regions see the effect of earlier relabelings.
inline LabelMap remove_dust(const LabelMap& labels, const PostprocConfig& cfg = {}) {
  cfg.validate();
  LabelMap out = labels;
  if (cfg.dust_min_voxels == 0) return out;
  for (const auto& region : cfg.dust_regions) {
    const Mask mask = extract_region(out, region);
    const auto cc = connected_components(mask, cfg.connectivity);
    std::vector<std::vector<std::size_t>> comp_voxels(static_cast<std::size_t>(cc.count) + 1);
    for (std::size_t i = 0; i < cc.component_id.size(); ++i)
      if (cc.component_id[i] && cc.size_of(cc.component_id[i]) < cfg.dust_min_voxels)
        comp_voxels[static_cast<std::size_t>(cc.component_id[i])].push_back(i);
    std::vector<char> in_component(out.data.size(), 0);
    for (int id = 1; id <= cc.count; ++id) {
      const auto& voxels = comp_voxels[static_cast<std::size_t>(id)];
      if (voxels.empty()) continue;
      for (std::size_t i : voxels) in_component[i] = 1;
      postproc_detail::relabel_component(out, voxels, in_component);
      for (std::size_t i : voxels) in_component[i] = 0;
    }
  }
  return out;
}

/// Volume-ratio rules, both evaluated on one set of pre-relabel volumes:
/// a tiny enhancing fraction of the whole tumor turns ET into NETC, and a
/// whole tumor made of edema alone turns SNFH into NETC.
inline LabelMap ratio_relabel(const LabelMap& labels, const PostprocConfig& cfg = {}) {
  cfg.validate();
  const RegionVolumes vols = region_volumes(labels);
  const bool fire_et = vols.et_wt > 0.0 && vols.et_wt < cfg.et_wt_threshold;
  const bool fire_snfh = vols.wt_count > 0 && vols.snfh_wt >= cfg.snfh_wt_trigger - 1e-9;
  LabelMap out = labels;
  if (!fire_et && !fire_snfh) return out;
  for (auto& l : out.data) {
    if (fire_et && l == kEt) l = kNetc;
    if (fire_snfh && l == kSnfh) l = kNetc;
  }
  return out;
}

/// Dust removal followed by the ratio rules.
inline LabelMap postprocess(const LabelMap& labels, const PostprocConfig& cfg = {}) {
  return ratio_relabel(remove_dust(labels, cfg), cfg);
}

}  // namespace gliakit
