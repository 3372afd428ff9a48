#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>

#include "gliakit/fft.hpp"
#include "gliakit/morphology.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace gliakit;
using testing_support::fill_box;
using testing_support::make_geometry;
using testing_support::make_mask;
using testing_support::random_mask;
using testing_support::random_volume;

TEST_CASE("fft of a constant volume concentrates at DC") {
  const Geometry g = make_geometry({8, 8, 8});
  Volume v(g, std::vector<float>(g.voxel_count(), 2.5f));
  const Spectrum s = fft3(v);
  CHECK(s.data[0].real() == Catch::Approx(2.5 * 512).margin(1e-6));
  CHECK(s.data[0].imag() == Catch::Approx(0.0).margin(1e-6));
  double off_dc = 0.0;
  for (std::size_t i = 1; i < s.data.size(); ++i) off_dc = std::max(off_dc, std::abs(s.data[i]));
  CHECK(off_dc < 1e-8);
}

TEST_CASE("fft matches a naive O(N^2) DFT") {
  for (const auto dims : {std::array<int, 3>{8, 8, 8}, std::array<int, 3>{6, 10, 7}, std::array<int, 3>{5, 3, 9}}) {
    const Geometry g = make_geometry(dims);
    const Volume v = random_volume(g, 123u + static_cast<unsigned>(dims[0]));
    const Spectrum s = fft3(v);
    std::vector<std::complex<double>> in(v.data.begin(), v.data.end());
    const auto ref = oracle::dft3(in, dims, false);
    REQUIRE(s.data.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE(std::abs(s.data[i] - ref[i]) < 1e-7);

    // inverse convention: 1/N on the backward transform
    const auto back = oracle::dft3(ref, dims, true);
    for (std::size_t i = 0; i < back.size(); ++i)
      REQUIRE(std::abs(back[i].real() - static_cast<double>(v.data[i])) < 1e-9);
  }
}

TEST_CASE("fft round trip and Parseval on awkward sizes") {
  const Geometry g = make_geometry({17, 19, 23});
  const Volume v = random_volume(g, 42);
  const Spectrum s = fft3(v);
  const Volume r = ifft3(s);
  double max_err = 0.0;
  for (std::size_t i = 0; i < v.data.size(); ++i)
    max_err = std::max(max_err, std::abs(static_cast<double>(r.data[i]) - v.data[i]));
  CHECK(max_err < 1e-5);

  double space = 0.0, freq = 0.0;
  for (float x : v.data) space += static_cast<double>(x) * x;
  for (const auto& c : s.data) freq += std::norm(c);
  const double n = static_cast<double>(g.voxel_count());
  CHECK(freq / n == Catch::Approx(space).epsilon(1e-4));
}

TEST_CASE("connected components: spec examples") {
  const Geometry g = make_geometry({4, 4, 4});

  Mask empty(g);
  CHECK(connected_components(empty).count == 0);

  // two voxels touching only at a corner
  Mask corner(g);
  corner.at(0, 0, 0) = 1;
  corner.at(1, 1, 1) = 1;
  CHECK(connected_components(corner, Connectivity::twenty_six).count == 1);
  CHECK(connected_components(corner, Connectivity::six).count == 2);
  CHECK(connected_components(corner, Connectivity::eighteen).count == 2);

  // edge-touching voxels merge under 18 but not 6
  Mask edge(g);
  edge.at(0, 0, 0) = 1;
  edge.at(1, 1, 0) = 1;
  CHECK(connected_components(edge, Connectivity::six).count == 2);
  CHECK(connected_components(edge, Connectivity::eighteen).count == 1);
}

TEST_CASE("connected components agree with a flood-fill oracle on random masks") {
  for (unsigned seed = 0; seed < 100; ++seed) {
    const Geometry g = make_geometry({16, 16, 16});
    const Mask m = random_mask(g, seed, 0.25);
    for (int conn : {6, 18, 26}) {
      const ComponentLabeling cc = connected_components(m, connectivity_from_int(conn));
      const auto ref = oracle::flood_components(g, oracle::mask_set(m), conn);
      REQUIRE(cc.count == static_cast<int>(ref.size()));

      // exact partition equality: oracle components are in raster order of
      // their first voxel, matching the library's id assignment
      std::int64_t total = 0;
      for (int id = 1; id <= cc.count; ++id) {
        oracle::VoxelSet got;
        for (std::size_t i = 0; i < cc.component_id.size(); ++i)
          if (cc.component_id[i] == id) got.insert(i);
        REQUIRE(got == ref[static_cast<std::size_t>(id - 1)]);
        REQUIRE(cc.size_of(id) == static_cast<std::int64_t>(got.size()));
        total += cc.size_of(id);
      }
      std::int64_t fg = 0;
      for (auto v : m.data) fg += v != 0;
      REQUIRE(total == fg);
    }
  }
}

TEST_CASE("dilate: box structuring element semantics") {
  const Geometry g = make_geometry({9, 9, 9});
  Mask center(g);
  center.at(4, 4, 4) = 1;
  const Mask d1 = dilate(center, 1);
  std::int64_t count = 0;
  for (auto v : d1.data) count += v != 0;
  CHECK(count == 27);
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) CHECK(d1.at(4 + dx, 4 + dy, 4 + dz) == 1);

  // extensivity and radius-2 == radius-1 twice, on random masks
  for (unsigned seed = 0; seed < 10; ++seed) {
    const Geometry g12 = make_geometry({12, 12, 12});
    const Mask m = random_mask(g12, 100 + seed, 0.08);
    const Mask d2 = dilate(m, 2);
    const Mask d11 = dilate(dilate(m, 1), 1);
    CHECK(d2.data == d11.data);
    for (std::size_t i = 0; i < m.data.size(); ++i)
      if (m.data[i]) REQUIRE(d2.data[i]);

    // Chebyshev-ball oracle
    const auto ref = oracle::chebyshev_dilate(g12, oracle::mask_set(m), 2);
    oracle::VoxelSet got;
    for (std::size_t i = 0; i < d2.data.size(); ++i)
      if (d2.data[i]) got.insert(i);
    REQUIRE(got == ref);
  }

  CHECK_THROWS_AS(dilate(center, 0), ValidationError);
}

TEST_CASE("edt: examples and brute-force equivalence") {
  const Geometry g = make_geometry({4, 4, 4}, {1.0, 1.0, 3.0});
  Mask m(g);
  m.at(1, 1, 1) = 1;
  const auto d = edt(m);
  CHECK(d[g.index(1, 1, 1)] == 0.0);
  CHECK(d[g.index(1, 1, 2)] == Catch::Approx(3.0));  // one step along z, spacing 3
  CHECK(d[g.index(2, 1, 1)] == Catch::Approx(1.0));
  CHECK(d[g.index(2, 2, 1)] == Catch::Approx(std::sqrt(2.0)));

  Mask none(g);
  CHECK_THROWS_AS(edt(none), ValidationError);

  for (unsigned seed = 0; seed < 20; ++seed) {
    const std::array<double, 3> spacing = seed % 2 ? std::array<double, 3>{1.0, 1.0, 1.0}
                                                   : std::array<double, 3>{0.5, 1.0, 2.0};
    const Geometry g10 = make_geometry({10, 10, 10}, spacing);
    Mask r = random_mask(g10, 200 + seed, 0.1);
    bool any = false;
    for (auto v : r.data) any |= v != 0;
    if (!any) r.at(0, 0, 0) = 1;

    const auto dist = edt(r);
    const auto fg = oracle::mask_set(r);
    std::vector<oracle::Coord> fg_coords;
    for (std::size_t i : fg) fg_coords.push_back(oracle::decode(g10, i));
    for (int z = 0; z < 10; ++z)
      for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) {
          double best = std::numeric_limits<double>::infinity();
          for (const auto& c : fg_coords)
            best = std::min(best, oracle::pair_dist2({x, y, z}, c, spacing));
          REQUIRE(dist[g10.index(x, y, z)] == Catch::Approx(std::sqrt(best)).margin(1e-9));
        }
  }
}

TEST_CASE("surface voxels: cube, single voxel, sphere estimate") {
  const Geometry g = make_geometry({5, 5, 5});
  Mask cube(g);
  fill_box(cube, {1, 1, 1}, {3, 3, 3});
  const Mask s = surface_voxels(cube);
  std::int64_t count = 0;
  for (auto v : s.data) count += v != 0;
  CHECK(count == 26);  // all but the center
  CHECK(s.at(2, 2, 2) == 0);

  Mask one(g);
  one.at(2, 2, 2) = 1;
  const Mask s1 = surface_voxels(one);
  std::int64_t c1 = 0;
  for (auto v : s1.data) c1 += v != 0;
  CHECK(c1 == 1);
  CHECK(s1.at(2, 2, 2) == 1);

  // a radius-8 discrete sphere has roughly 4*pi*r^2 surface voxels
  const Geometry gs = make_geometry({24, 24, 24});
  Mask sphere(gs);
  for (int z = 0; z < 24; ++z)
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) {
        const double dx = x - 11.5, dy = y - 11.5, dz = z - 11.5;
        if (dx * dx + dy * dy + dz * dz <= 8.0 * 8.0) sphere.at(x, y, z) = 1;
      }
  const Mask ss = surface_voxels(sphere);
  // brute-force reference: a foreground voxel is surface iff some 6-neighbor
  // is background or outside the grid
  static constexpr std::array<std::array<int, 3>, 6> kFaces{
      {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
  for (int z = 0; z < 24; ++z)
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) {
        bool want = false;
        if (sphere.at(x, y, z)) {
          for (const auto& d : kFaces) {
            const int px = x + d[0], py = y + d[1], pz = z + d[2];
            if (!gs.in_bounds(px, py, pz) || !sphere.at(px, py, pz)) {
              want = true;
              break;
            }
          }
        }
        REQUIRE(ss.at(x, y, z) == (want ? 1 : 0));
      }
}

TEST_CASE("component_mask extracts a single component") {
  const Geometry g = make_geometry({6, 6, 6});
  Mask m(g);
  m.at(0, 0, 0) = 1;
  m.at(5, 5, 5) = 1;
  const ComponentLabeling cc = connected_components(m);
  REQUIRE(cc.count == 2);
  const Mask first = component_mask(cc, 1);
  CHECK(first.at(0, 0, 0) == 1);
  CHECK(first.at(5, 5, 5) == 0);
}
