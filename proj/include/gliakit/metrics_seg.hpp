#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gliakit/error.hpp"
#include "gliakit/morphology.hpp"
#include "gliakit/regions.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {

/// Linear-interpolation percentile (the numpy default): index h = (n-1)*p/100.
inline double percentile_linear(std::vector<double> values, double pct) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * pct / 100.0;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

/// Classic Dice overlap 2|A^B| / (|A|+|B|); 1.0 when both masks are empty.
inline double dice(const Mask& gt, const Mask& pred) {
  require_same_grid(gt.geometry, pred.geometry, "dice");
  std::int64_t na = 0, nb = 0, inter = 0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const bool a = gt.data[i] != 0, b = pred.data[i] != 0;
    na += a;
    nb += b;
    inter += (a && b);
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

namespace seg_detail {

struct Box {
  int lo[3] = {std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
  int hi[3] = {-1, -1, -1};

  void include(int x, int y, int z) {
    const int p[3] = {x, y, z};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  void include(const Box& o) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], o.lo[a]);
      hi[a] = std::max(hi[a], o.hi[a]);
    }
  }
  bool empty() const { return hi[0] < lo[0]; }
  std::array<int, 3> dims() const { return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}; }
};

using Coord = std::array<int, 3>;

inline Box bounding_box(const std::vector<Coord>& coords) {
  Box b;
  for (const auto& c : coords) b.include(c[0], c[1], c[2]);
  return b;
}

inline std::vector<Coord> mask_coords(const Mask& m) {
  std::vector<Coord> out;
  const int nx = m.geometry.dims[0], ny = m.geometry.dims[1], nz = m.geometry.dims[2];
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        if (m.at(x, y, z)) out.push_back({x, y, z});
  return out;
}

/// Mask over a tight bounding box; anything outside the box is guaranteed
/// background, so surfaces and distances computed locally are exact.
inline Mask local_mask(const std::vector<Coord>& coords, const Box& box, const std::array<double, 3>& spacing) {
  Mask m(Geometry(box.dims(), spacing));
  for (const auto& c : coords) m.at(c[0] - box.lo[0], c[1] - box.lo[1], c[2] - box.lo[2]) = 1;
  return m;
}

/// Symmetric surface-to-surface distance multiset between two nonempty voxel
/// sets living on the same grid. Distances come from the exact EDT evaluated
/// over the joint bounding box.
inline std::vector<double> surface_distance_multiset(const std::vector<Coord>& gt_coords,
                                                     const std::vector<Coord>& pred_coords,
                                                     const std::array<double, 3>& spacing) {
  Box box = bounding_box(gt_coords);
  box.include(bounding_box(pred_coords));
  const Mask gt_local = local_mask(gt_coords, box, spacing);
  const Mask pred_local = local_mask(pred_coords, box, spacing);
  const Mask gt_surf = surface_voxels(gt_local);
  const Mask pred_surf = surface_voxels(pred_local);
  const auto gt_surf_coords = mask_coords(gt_surf);
  const auto pred_surf_coords = mask_coords(pred_surf);

  const auto dist_pred = edt(pred_surf);  // distance to pred surface
  const auto dist_gt = edt(gt_surf);      // distance to gt surface
  std::vector<double> dists;
  dists.reserve(gt_surf_coords.size() + pred_surf_coords.size());
  for (const auto& c : gt_surf_coords) dists.push_back(dist_pred[gt_surf.geometry.index(c[0], c[1], c[2])]);
  for (const auto& c : pred_surf_coords) dists.push_back(dist_gt[gt_surf.geometry.index(c[0], c[1], c[2])]);
  return dists;
}

}  // namespace seg_detail

/// 95th-percentile symmetric surface distance in mm. Both masks must be
/// nonempty; lesion-wise callers substitute the FP/FN penalty and classic
/// reports use a NaN sentinel instead.
inline double hd95(const Mask& gt, const Mask& pred) {
  require_same_grid(gt.geometry, pred.geometry, "hd95");
  const auto gt_coords = seg_detail::mask_coords(gt);
  const auto pred_coords = seg_detail::mask_coords(pred);
  if (gt_coords.empty() || pred_coords.empty())
    throw ValidationError("hd95: both masks must be nonempty");
  const auto dists = seg_detail::surface_distance_multiset(gt_coords, pred_coords, gt.geometry.spacing);
  return percentile_linear(dists, 95.0);
}

/// Defaults follow the published BraTS lesion-wise protocol; every knob is a
/// config field.
struct LesionWiseConfig {
  int dilation_radius_voxels = 3;
  int min_gt_lesion_voxels = 10;
  double fp_fn_hd95_penalty_mm = 374.0;
  Connectivity connectivity = Connectivity::twenty_six;

  void validate() const {
    if (dilation_radius_voxels < 0) throw ValidationError("lesion-wise: dilation radius must be >= 0");
    if (min_gt_lesion_voxels < 0) throw ValidationError("lesion-wise: min lesion size must be >= 0");
    if (fp_fn_hd95_penalty_mm < 0) throw ValidationError("lesion-wise: penalty must be >= 0");
  }
};

enum class MatchStatus { tp, fn, fp };

inline const char* to_string(MatchStatus s) {
  switch (s) {
    case MatchStatus::tp: return "TP";
    case MatchStatus::fn: return "FN";
    default: return "FP";
  }
}

/// One lesion unit (possibly several GT lesions merged through overlapping
/// dilations) or one unmatched prediction component.
struct LesionMatch {
  std::vector<int> gt_lesion_ids;       // empty for FP records
  std::vector<int> pred_component_ids;  // empty for FN records
  MatchStatus status = MatchStatus::tp;
  double dice = 0.0;
  double hd95_mm = 0.0;
  std::int64_t gt_voxels = 0;
  std::int64_t pred_voxels = 0;
};

struct LesionWiseResult {
  double lw_dice = 1.0;
  double lw_hd95 = 0.0;
  std::vector<LesionMatch> matches;
  int n_tp = 0, n_fn = 0, n_fp = 0;
};

namespace seg_detail {

struct UnionFind {
  std::map<int, int> parent;

  void add(int x) { parent.emplace(x, x); }
  int find(int x) {
    int r = x;
    while (parent[r] != r) r = parent[r];
    while (parent[x] != r) x = std::exchange(parent[x], r);
    return r;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace seg_detail

/// Lesion-wise Dice and HD95 for one region, per the challenge protocol:
/// GT lesions below the size floor are dropped; kept lesions whose dilations
/// overlap merge into one unit; prediction components attach to every unit
/// whose dilated footprint they intersect; unmatched units are FNs and
/// unattached prediction components are FPs, both carrying the fixed penalty.
inline LesionWiseResult lesion_wise(const LabelMap& gt, const LabelMap& pred, const std::string& region,
                                    const LesionWiseConfig& cfg = {}) {
  require_same_grid(gt.geometry, pred.geometry, "lesion_wise");
  cfg.validate();
  const Mask gmask = extract_region(gt, region);
  const Mask pmask = extract_region(pred, region);
  const auto gcc = connected_components(gmask, cfg.connectivity);
  const auto pcc = connected_components(pmask, cfg.connectivity);

  // voxel lists per component
  std::vector<std::vector<seg_detail::Coord>> gt_comp(static_cast<std::size_t>(gcc.count) + 1);
  std::vector<std::vector<seg_detail::Coord>> pred_comp(static_cast<std::size_t>(pcc.count) + 1);
  {
    const int nx = gt.geometry.dims[0], ny = gt.geometry.dims[1], nz = gt.geometry.dims[2];
    for (int z = 0; z < nz; ++z)
      for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
          const std::size_t i = gt.geometry.index(x, y, z);
          if (gcc.component_id[i]) gt_comp[static_cast<std::size_t>(gcc.component_id[i])].push_back({x, y, z});
          if (pcc.component_id[i]) pred_comp[static_cast<std::size_t>(pcc.component_id[i])].push_back({x, y, z});
        }
  }

  std::vector<int> kept;
  for (int id = 1; id <= gcc.count; ++id)
    if (gcc.size_of(id) >= cfg.min_gt_lesion_voxels) kept.push_back(id);

  // dilated footprints; overlaps merge lesions into units
  std::vector<std::int32_t> claim(gt.geometry.voxel_count(), 0);
  seg_detail::UnionFind uf;
  for (int id : kept) uf.add(id);
  const int r = cfg.dilation_radius_voxels;
  for (int id : kept) {
    const auto& coords = gt_comp[static_cast<std::size_t>(id)];
    seg_detail::Box box = seg_detail::bounding_box(coords);
    for (int a = 0; a < 3; ++a) {
      box.lo[a] = std::max(0, box.lo[a] - r);
      box.hi[a] = std::min(gt.geometry.dims[a] - 1, box.hi[a] + r);
    }
    Mask local = seg_detail::local_mask(coords, box, gt.geometry.spacing);
    if (r > 0) local = dilate(local, r);
    const auto dims = box.dims();
    for (int z = 0; z < dims[2]; ++z)
      for (int y = 0; y < dims[1]; ++y)
        for (int x = 0; x < dims[0]; ++x) {
          if (!local.at(x, y, z)) continue;
          const std::size_t gi = gt.geometry.index(x + box.lo[0], y + box.lo[1], z + box.lo[2]);
          if (claim[gi] == 0)
            claim[gi] = id;
          else if (claim[gi] != id)
            uf.unite(claim[gi], id);
        }
  }

  // lesion units keyed by representative, members sorted
  std::map<int, std::vector<int>> units;  // root -> member gt ids
  for (int id : kept) units[uf.find(id)].push_back(id);

  // assign each prediction component to every unit its voxels intersect
  std::map<int, std::vector<int>> unit_preds;  // root -> pred ids
  std::vector<bool> pred_used(static_cast<std::size_t>(pcc.count) + 1, false);
  for (int pid = 1; pid <= pcc.count; ++pid) {
    std::vector<int> roots;
    for (const auto& c : pred_comp[static_cast<std::size_t>(pid)]) {
      const std::int32_t owner = claim[gt.geometry.index(c[0], c[1], c[2])];
      if (owner == 0) continue;
      const int root = uf.find(owner);
      if (std::find(roots.begin(), roots.end(), root) == roots.end()) roots.push_back(root);
    }
    for (int root : roots) {
      unit_preds[root].push_back(pid);
      pred_used[static_cast<std::size_t>(pid)] = true;
    }
  }

  // order units by their smallest member lesion id
  std::vector<std::pair<int, int>> unit_order;  // (min member, root)
  for (auto& [root, members] : units) {
    std::sort(members.begin(), members.end());
    unit_order.emplace_back(members.front(), root);
  }
  std::sort(unit_order.begin(), unit_order.end());

  LesionWiseResult res;
  for (const auto& [min_id, root] : unit_order) {
    LesionMatch m;
    m.gt_lesion_ids = units[root];
    std::vector<seg_detail::Coord> gt_union;
    for (int id : m.gt_lesion_ids) {
      const auto& c = gt_comp[static_cast<std::size_t>(id)];
      gt_union.insert(gt_union.end(), c.begin(), c.end());
    }
    m.gt_voxels = static_cast<std::int64_t>(gt_union.size());
    auto preds_it = unit_preds.find(root);
    if (preds_it == unit_preds.end()) {
      m.status = MatchStatus::fn;
      m.dice = 0.0;
      m.hd95_mm = cfg.fp_fn_hd95_penalty_mm;
      ++res.n_fn;
    } else {
      m.status = MatchStatus::tp;
      m.pred_component_ids = preds_it->second;
      std::vector<seg_detail::Coord> pred_union;
      for (int pid : m.pred_component_ids) {
        const auto& c = pred_comp[static_cast<std::size_t>(pid)];
        pred_union.insert(pred_union.end(), c.begin(), c.end());
      }
      m.pred_voxels = static_cast<std::int64_t>(pred_union.size());
      // dice over the unit: mark GT voxels in a local grid, count overlaps
      seg_detail::Box box = seg_detail::bounding_box(gt_union);
      box.include(seg_detail::bounding_box(pred_union));
      Mask marks = seg_detail::local_mask(gt_union, box, gt.geometry.spacing);
      std::int64_t inter = 0;
      for (const auto& c : pred_union) inter += marks.at(c[0] - box.lo[0], c[1] - box.lo[1], c[2] - box.lo[2]);
      m.dice = 2.0 * static_cast<double>(inter) /
               static_cast<double>(m.gt_voxels + m.pred_voxels);
      const auto dists = seg_detail::surface_distance_multiset(gt_union, pred_union, gt.geometry.spacing);
      m.hd95_mm = percentile_linear(dists, 95.0);
      ++res.n_tp;
    }
    res.matches.push_back(std::move(m));
  }

  for (int pid = 1; pid <= pcc.count; ++pid) {
    if (pred_used[static_cast<std::size_t>(pid)]) continue;
    LesionMatch m;
    m.status = MatchStatus::fp;
    m.pred_component_ids = {pid};
    m.pred_voxels = static_cast<std::int64_t>(pred_comp[static_cast<std::size_t>(pid)].size());
    m.dice = 0.0;
    m.hd95_mm = cfg.fp_fn_hd95_penalty_mm;
    ++res.n_fp;
    res.matches.push_back(std::move(m));
  }

  if (res.matches.empty()) {
    res.lw_dice = 1.0;  // no GT lesions, no prediction components
    res.lw_hd95 = 0.0;
    return res;
  }
  double dice_sum = 0.0, hd_sum = 0.0;
  for (const auto& m : res.matches) {
    dice_sum += m.dice;
    hd_sum += m.hd95_mm;
  }
  res.lw_dice = dice_sum / static_cast<double>(res.matches.size());
  res.lw_hd95 = hd_sum / static_cast<double>(res.matches.size());
  return res;
}

struct RegionReport {
  std::string region;
  double dice = 0.0;
  double hd95 = std::numeric_limits<double>::quiet_NaN();  // NaN when a mask is empty
  LesionWiseResult lw;
};

struct SegReport {
  std::vector<RegionReport> regions;
};

/// Classic and lesion-wise metrics for every requested region of one case.
inline SegReport evaluate_case(const LabelMap& gt, const LabelMap& pred, const std::vector<std::string>& regions,
                               const LesionWiseConfig& cfg = {}) {
  require_same_grid(gt.geometry, pred.geometry, "evaluate_case");
  if (!(gt.schema == pred.schema))
    throw ValidationError("evaluate_case: ground truth and prediction use different schemas");
  SegReport report;
  for (const auto& region : regions) {
    RegionReport r;
    r.region = region;
    const Mask gmask = extract_region(gt, region);
    const Mask pmask = extract_region(pred, region);
    r.dice = dice(gmask, pmask);
    if (count_foreground(gmask) > 0 && count_foreground(pmask) > 0)
      r.hd95 = hd95(gmask, pmask);
    r.lw = lesion_wise(gt, pred, region, cfg);
    report.regions.push_back(std::move(r));
  }
  return report;
}

}  // namespace gliakit
