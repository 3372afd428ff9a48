#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "gliakit/schema.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {

/// Binary mask of one (composite) region: voxel set iff its label belongs to
/// the region's label set.
inline Mask extract_region(const LabelMap& labels, const std::string& region) {
  const auto& members = labels.schema.region_labels(region);
  std::array<bool, 256> in_region{};
  for (Label v : members) in_region[v] = true;
  Mask m(labels.geometry);
  for (std::size_t i = 0; i < labels.data.size(); ++i) m.data[i] = in_region[labels.data[i]];
  return m;
}

/// Voxel counts, physical volumes and the ET/WT and SNFH/WT ratios used by
/// the ratio relabeling rules. Ratios are 0 when WT is empty.
struct RegionVolumes {
  std::int64_t et_count = 0, netc_count = 0, snfh_count = 0, rc_count = 0;
  std::int64_t tc_count = 0, wt_count = 0;
  double et_mm3 = 0, netc_mm3 = 0, snfh_mm3 = 0, rc_mm3 = 0, tc_mm3 = 0, wt_mm3 = 0;
  double et_wt = 0.0;
  double snfh_wt = 0.0;
};

inline RegionVolumes region_volumes(const LabelMap& labels) {
  RegionVolumes v;
  for (Label lab : labels.data) {
    switch (lab) {
      case kNetc: ++v.netc_count; break;
      case kSnfh: ++v.snfh_count; break;
      case kEt: ++v.et_count; break;
      case kRc: ++v.rc_count; break;
      default: break;
    }
  }
  v.tc_count = v.et_count + v.netc_count;
  v.wt_count = v.tc_count + v.snfh_count;
  const double mm3 = labels.geometry.voxel_volume_mm3();
  v.et_mm3 = static_cast<double>(v.et_count) * mm3;
  v.netc_mm3 = static_cast<double>(v.netc_count) * mm3;
  v.snfh_mm3 = static_cast<double>(v.snfh_count) * mm3;
  v.rc_mm3 = static_cast<double>(v.rc_count) * mm3;
  v.tc_mm3 = static_cast<double>(v.tc_count) * mm3;
  v.wt_mm3 = static_cast<double>(v.wt_count) * mm3;
  if (v.wt_count > 0) {
    v.et_wt = static_cast<double>(v.et_count) / static_cast<double>(v.wt_count);
    v.snfh_wt = static_cast<double>(v.snfh_count) / static_cast<double>(v.wt_count);
  }
  return v;
}

}  // namespace gliakit
