#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "gliakit/postproc.hpp"
#include "gliakit/regions.hpp"
#include "support/builders.hpp"

using namespace gliakit;
using testing_support::fill_box;
using testing_support::make_geometry;

namespace {

int count_label(const LabelMap& m, Label l) {
  return static_cast<int>(std::count(m.data.begin(), m.data.end(), l));
}

}  // namespace

TEST_CASE("dust below the floor dissolves, at the floor survives") {
  const Geometry g = make_geometry({20, 20, 20});

  SECTION("49-voxel component surrounded by background clears") {
    LabelMap m(g, LabelSchema::agpt());
    fill_box(m, {5, 5, 9}, {11, 11, 9}, kEt);  // 7x7x1 = 49 voxels
    REQUIRE(count_label(m, kEt) == 49);
    const LabelMap out = remove_dust(m);
    REQUIRE(count_label(out, kEt) == 0);
    REQUIRE(count_label(out, kBackground) == static_cast<int>(out.data.size()));
  }

  SECTION("50-voxel component is untouched (strictly-smaller rule)") {
    LabelMap m(g, LabelSchema::agpt());
    fill_box(m, {5, 5, 9}, {9, 9, 10}, kEt);  // 5x5x2 = 50 voxels
    const LabelMap out = remove_dust(m);
    REQUIRE(out.data == m.data);
  }
}

TEST_CASE("dust embedded in a region takes the surrounding label") {
  const Geometry g = make_geometry({20, 20, 20});
  LabelMap m(g, LabelSchema::agpt());
  fill_box(m, {5, 5, 5}, {10, 10, 10}, kSnfh);  // 216 voxels, comfortably above floor
  fill_box(m, {7, 7, 7}, {8, 8, 7}, kEt);       // 2x2x1 = 4 voxels
  fill_box(m, {7, 7, 8}, {8, 9, 8}, kEt);       // 2x3x1 = 6 more; 10 ET voxels total
  REQUIRE(count_label(m, kEt) == 10);

  const LabelMap out = remove_dust(m);
  REQUIRE(count_label(out, kEt) == 0);
  REQUIRE(count_label(out, kSnfh) == 216);  // unanimous neighborhood mode
}

TEST_CASE("neighborhood mode ties break toward the smaller label") {
  const Geometry g = make_geometry({11, 11, 11});
  LabelMap m(g, LabelSchema::agpt());
  m.at(5, 5, 5) = kEt;
  // Surround the lone ET voxel with exactly 13 NETC and 13 SNFH neighbors.
  int assigned = 0;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        m.at(5 + dx, 5 + dy, 5 + dz) = (assigned < 13) ? kNetc : kSnfh;
        ++assigned;
      }
  REQUIRE(assigned == 26);

  PostprocConfig cfg;
  cfg.dust_regions = {"ET"};  // keep the later TC/WT passes out of the assertion
  const LabelMap out = remove_dust(m, cfg);
  REQUIRE(out.at(5, 5, 5) == kNetc);
}

TEST_CASE("a voxel whose whole neighborhood was the removed component falls to background") {
  const Geometry g = make_geometry({15, 15, 15});
  LabelMap m(g, LabelSchema::agpt());
  fill_box(m, {4, 4, 4}, {10, 10, 10}, kSnfh);  // 343-voxel SNFH sea
  fill_box(m, {6, 6, 6}, {8, 8, 8}, kEt);       // 27-voxel ET cube inside it

  PostprocConfig cfg;
  cfg.dust_regions = {"ET"};
  const LabelMap out = remove_dust(m, cfg);

  // The cube centre sees only its own component; everything on the shell sees SNFH.
  REQUIRE(out.at(7, 7, 7) == kBackground);
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        REQUIRE(out.at(7 + dx, 7 + dy, 7 + dz) == kSnfh);
      }
}

TEST_CASE("dust passes run per region in order, later passes see earlier edits") {
  const Geometry g = make_geometry({20, 20, 20});

  SECTION("isolated small NETC clears via the TC pass") {
    LabelMap m(g, LabelSchema::agpt());
    fill_box(m, {3, 3, 3}, {4, 4, 4}, kNetc);  // 8 voxels; ET pass sees nothing
    const LabelMap out = remove_dust(m);
    REQUIRE(count_label(out, kNetc) == 0);
  }

  SECTION("isolated small SNFH clears via the WT pass") {
    LabelMap m(g, LabelSchema::agpt());
    fill_box(m, {3, 3, 3}, {4, 4, 4}, kSnfh);
    const LabelMap out = remove_dust(m);
    REQUIRE(count_label(out, kSnfh) == 0);
  }

  SECTION("restricting dust_regions limits which masks are swept") {
    LabelMap m(g, LabelSchema::agpt());
    fill_box(m, {3, 3, 3}, {4, 4, 4}, kSnfh);
    PostprocConfig cfg;
    cfg.dust_regions = {"ET", "TC"};  // SNFH only enters WT, which is skipped
    REQUIRE(remove_dust(m, cfg).data == m.data);
    cfg.dust_regions = {};
    REQUIRE(remove_dust(m, cfg).data == m.data);
  }

  SECTION("embedded dust keeps the enclosing region's WT mask intact") {
    LabelMap m(g, LabelSchema::agpt());
    fill_box(m, {5, 5, 5}, {10, 10, 10}, kSnfh);
    fill_box(m, {7, 7, 7}, {8, 8, 8}, kEt);  // 8-voxel dust inside
    const LabelMap out = remove_dust(m);
    const Mask wt_in = extract_region(m, "WT");
    const Mask wt_out = extract_region(out, "WT");
    REQUIRE(wt_out.data == wt_in.data);  // ET dissolved into SNFH, WT unchanged
  }
}

TEST_CASE("dust connectivity config changes component granularity") {
  const Geometry g = make_geometry({20, 20, 20});
  LabelMap m(g, LabelSchema::agpt());
  // Two 30-voxel boxes touching only across a diagonal: one 60-voxel component
  // under 26-connectivity, two sub-floor components under 6-connectivity.
  fill_box(m, {0, 0, 0}, {4, 2, 1}, kEt);  // 5x3x2 = 30
  fill_box(m, {5, 3, 2}, {9, 5, 3}, kEt);  // 5x3x2 = 30

  PostprocConfig cfg;
  cfg.dust_regions = {"ET"};
  cfg.connectivity = Connectivity::twenty_six;
  REQUIRE(remove_dust(m, cfg).data == m.data);

  cfg.connectivity = Connectivity::six;
  const LabelMap out = remove_dust(m, cfg);
  REQUIRE(count_label(out, kEt) == 0);
}

TEST_CASE("ratio rule: tiny enhancing fraction becomes NETC") {
  const Geometry g = make_geometry({20, 20, 20});
  LabelMap m(g, LabelSchema::agpt());
  fill_box(m, {0, 0, 0}, {6, 6, 1}, kSnfh);  // 7x7x2 = 98 voxels
  m.at(10, 10, 10) = kEt;
  m.at(11, 10, 10) = kEt;  // et_wt = 2/100 = 0.02 < 0.03

  const LabelMap out = ratio_relabel(m);
  REQUIRE(count_label(out, kEt) == 0);
  REQUIRE(count_label(out, kNetc) == 2);
  REQUIRE(count_label(out, kSnfh) == 98);
}

TEST_CASE("ratio rule: whole tumor of pure edema becomes NETC") {
  const Geometry g = make_geometry({10, 10, 10});
  LabelMap m(g, LabelSchema::agpt());
  fill_box(m, {2, 2, 2}, {5, 5, 5}, kSnfh);  // 64 voxels, snfh_wt exactly 1
  const LabelMap out = ratio_relabel(m);
  REQUIRE(count_label(out, kSnfh) == 0);
  REQUIRE(count_label(out, kNetc) == 64);
}

TEST_CASE("ratio rules leave safe maps unchanged") {
  const Geometry g = make_geometry({20, 20, 20});

  SECTION("et_wt 0.05 and snfh_wt 0.6 fire nothing") {
    LabelMap m(g, LabelSchema::agpt());
    fill_box(m, {0, 0, 0}, {4, 0, 0}, kEt);     // 5
    fill_box(m, {0, 2, 0}, {6, 6, 0}, kNetc);   // 7x5 = 35
    fill_box(m, {0, 0, 2}, {5, 9, 2}, kSnfh);   // 6x10 = 60 -> WT 100
    const RegionVolumes v = region_volumes(m);
    REQUIRE(v.et_wt == 0.05);
    REQUIRE(v.snfh_wt == 0.6);
    REQUIRE(ratio_relabel(m).data == m.data);
  }

  SECTION("zero ET is not a trigger") {
    LabelMap m(g, LabelSchema::agpt());
    fill_box(m, {0, 0, 0}, {4, 4, 3}, kNetc);  // snfh_wt = 0, et_wt = 0
    REQUIRE(ratio_relabel(m).data == m.data);
  }

  SECTION("empty WT (background and RC only) is a no-op") {
    LabelMap m(g, LabelSchema::agpt());
    fill_box(m, {1, 1, 1}, {3, 3, 3}, kRc);
    REQUIRE(ratio_relabel(m).data == m.data);
  }
}

TEST_CASE("ratio rules are independent and evaluated on one volume snapshot") {
  const Geometry g = make_geometry({20, 20, 20});
  LabelMap m(g, LabelSchema::agpt());
  fill_box(m, {0, 0, 0}, {6, 6, 1}, kSnfh);  // 98 voxels
  m.at(10, 10, 10) = kEt;
  m.at(11, 10, 10) = kEt;  // et_wt = 0.02, snfh_wt = 0.98

  PostprocConfig cfg;
  cfg.snfh_wt_trigger = 0.9;  // both rules fire on the same pre-relabel ratios
  const LabelMap out = ratio_relabel(m, cfg);
  REQUIRE(count_label(out, kNetc) == 100);
  REQUIRE(count_label(out, kEt) == 0);
  REQUIRE(count_label(out, kSnfh) == 0);
}

TEST_CASE("ratio relabeling preserves the WT mask and is idempotent") {
  const Geometry g = make_geometry({20, 20, 20});
  LabelMap m(g, LabelSchema::agpt());
  fill_box(m, {0, 0, 0}, {6, 6, 1}, kSnfh);
  m.at(10, 10, 10) = kEt;
  m.at(11, 10, 10) = kEt;

  const LabelMap once = ratio_relabel(m);
  REQUIRE(extract_region(once, "WT").data == extract_region(m, "WT").data);
  REQUIRE(ratio_relabel(once).data == once.data);
}

TEST_CASE("postprocess composes dust removal then ratio rules") {
  const Geometry g = make_geometry({24, 24, 24});
  LabelMap m(g, LabelSchema::agpt());
  // Dust: a 5-voxel ET speck. Ratio: after the speck dissolves into SNFH, the
  // whole tumor is pure edema, so the SNFH rule fires too.
  fill_box(m, {4, 4, 4}, {11, 11, 11}, kSnfh);  // 512 voxels
  fill_box(m, {6, 6, 6}, {10, 6, 6}, kEt);      // 5 voxels inside

  const LabelMap manual = ratio_relabel(remove_dust(m));
  const LabelMap fused = postprocess(m);
  REQUIRE(fused.data == manual.data);
  REQUIRE(count_label(fused, kNetc) == 512);  // dust -> SNFH, then SNFH -> NETC
  REQUIRE(count_label(fused, kEt) == 0);
  REQUIRE(count_label(fused, kSnfh) == 0);
}

TEST_CASE("postprocess is the identity on clean maps") {
  const Geometry g = make_geometry({24, 24, 24});

  SECTION("all background") {
    LabelMap m(g, LabelSchema::agpt());
    const LabelMap out = postprocess(m);
    REQUIRE(out.data == m.data);
    REQUIRE(out.geometry.dims == m.geometry.dims);
  }

  SECTION("large components with safe ratios") {
    LabelMap m(g, LabelSchema::agpt());
    fill_box(m, {0, 0, 0}, {4, 4, 3}, kEt);      // 100 voxels
    fill_box(m, {8, 0, 0}, {12, 4, 4}, kNetc);   // 125 voxels
    fill_box(m, {0, 8, 8}, {5, 13, 13}, kSnfh);  // 216 voxels
    const RegionVolumes v = region_volumes(m);
    REQUIRE(v.et_wt > 0.03);
    REQUIRE(v.snfh_wt < 1.0);
    REQUIRE(postprocess(m).data == m.data);
  }

  SECTION("dust floor zero disables the sweep") {
    LabelMap m(g, LabelSchema::agpt());
    m.at(3, 3, 3) = kEt;  // would dissolve at any positive floor
    PostprocConfig cfg;
    cfg.dust_min_voxels = 0;
    REQUIRE(remove_dust(m, cfg).data == m.data);
  }
}

TEST_CASE("postprocess output stays schema-valid") {
  const Geometry g = make_geometry({20, 20, 20});
  LabelMap m(g, LabelSchema::agpt());
  fill_box(m, {2, 2, 2}, {8, 8, 8}, kSnfh);
  fill_box(m, {4, 4, 4}, {5, 5, 5}, kEt);
  fill_box(m, {12, 12, 12}, {13, 13, 13}, kRc);
  const LabelMap out = postprocess(m);
  for (Label l : out.data) REQUIRE(l <= kRc);
  REQUIRE(out.geometry.dims == m.geometry.dims);
}

TEST_CASE("postproc config validation") {
  PostprocConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());

  PostprocConfig bad = cfg;
  bad.dust_min_voxels = -1;
  REQUIRE_THROWS_AS(bad.validate(), ValidationError);

  bad = cfg;
  bad.et_wt_threshold = 1.5;
  REQUIRE_THROWS_AS(bad.validate(), ValidationError);

  bad = cfg;
  bad.et_wt_threshold = -0.1;
  REQUIRE_THROWS_AS(bad.validate(), ValidationError);

  bad = cfg;
  bad.snfh_wt_trigger = 1.01;
  REQUIRE_THROWS_AS(bad.validate(), ValidationError);

  // Unknown region names surface when the sweep asks the schema for them.
  const Geometry g = make_geometry({8, 8, 8});
  LabelMap m(g, LabelSchema::agpt());
  PostprocConfig bogus;
  bogus.dust_regions = {"XX"};
  m.at(1, 1, 1) = kEt;
  REQUIRE_THROWS_AS(remove_dust(m, bogus), ValidationError);
}
