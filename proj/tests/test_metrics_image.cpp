#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "gliakit/csv.hpp"
#include "gliakit/metrics_image.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace gliakit;
using testing_support::make_geometry;
using testing_support::random_volume;

namespace {

Volume constant_volume(const Geometry& g, float value) {
  Volume v(g);
  std::fill(v.data.begin(), v.data.end(), value);
  return v;
}

oracle::SsimRefConfig to_oracle(const ImageMetricConfig& cfg) {
  oracle::SsimRefConfig o;
  o.data_range = cfg.data_range;
  o.window = cfg.window;
  o.sigma = cfg.sigma;
  o.k1 = cfg.k1;
  o.k2 = cfg.k2;
  o.slice_mode = cfg.slice_mode;
  return o;
}

}  // namespace

TEST_CASE("mse closed forms and symmetry") {
  const Geometry g = make_geometry({6, 5, 4});
  const Volume a = random_volume(g, 11);

  REQUIRE(mse(a, a) == 0.0);

  Volume b = a;
  for (float& v : b.data) v += 0.1f;
  REQUIRE_THAT(mse(a, b), Catch::Matchers::WithinAbs(0.01, 1e-6));
  REQUIRE(mse(a, b) == mse(b, a));
}

TEST_CASE("mse matches direct re-summation on a random pair") {
  const Geometry g = make_geometry({8, 8, 8});
  const Volume a = random_volume(g, 21);
  const Volume b = random_volume(g, 22);

  long double sum = 0.0L;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const long double d = static_cast<long double>(a.data[i]) - static_cast<long double>(b.data[i]);
    sum += d * d;
  }
  const double ref = static_cast<double>(sum / static_cast<long double>(a.data.size()));
  REQUIRE_THAT(mse(a, b), Catch::Matchers::WithinAbs(ref, 1e-12));
}

TEST_CASE("mse mask scope") {
  const Geometry g = make_geometry({6, 6, 6});
  Volume a = constant_volume(g, 1.0f);
  Volume b = a;

  Mask inside(g);
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) inside.at(x, y, z) = 1;

  // Perturb only voxels outside the mask: masked mse stays zero.
  for (int z = 3; z < 6; ++z)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) b.at(x, y, z) += 2.0f;
  REQUIRE(mse(a, b, &inside) == 0.0);
  REQUIRE(mse(a, b) > 0.0);

  // Perturb one voxel inside the mask by 0.6: mean over the 108 masked voxels.
  b = a;
  b.at(1, 1, 1) += 0.6f;
  const double expected = (0.6 * 0.6) / 108.0;
  REQUIRE_THAT(mse(a, b, &inside), Catch::Matchers::WithinAbs(expected, 1e-9));

  // A full mask reproduces the unmasked value exactly.
  Mask full(g);
  std::fill(full.data.begin(), full.data.end(), std::uint8_t{1});
  const Volume r = random_volume(g, 31);
  const Volume p = random_volume(g, 32);
  REQUIRE(mse(r, p, &full) == mse(r, p));

  Mask empty(g);
  REQUIRE_THROWS_AS(mse(a, b, &empty), ValidationError);
}

TEST_CASE("mse rejects geometry mismatches") {
  const Volume a = random_volume(make_geometry({4, 4, 4}), 1);
  const Volume b = random_volume(make_geometry({4, 4, 5}), 1);
  REQUIRE_THROWS_AS(mse(a, b), ValidationError);

  const Volume c = random_volume(make_geometry({4, 4, 4}, {1.0, 1.0, 2.0}), 1);
  REQUIRE_THROWS_AS(mse(a, c), ValidationError);

  Mask m(make_geometry({5, 4, 4}));
  REQUIRE_THROWS_AS(mse(a, a, &m), ValidationError);
}

TEST_CASE("psnr closed forms") {
  const Geometry g = make_geometry({8, 8, 8});
  const Volume a = constant_volume(g, 0.0f);

  SECTION("identical volumes give the +inf sentinel") {
    const double v = psnr(a, a);
    REQUIRE(std::isinf(v));
    REQUIRE(v > 0.0);
    REQUIRE(format_value(v) == "inf");
  }

  SECTION("mse 0.01 at data_range 1 is 20 dB") {
    Volume b = a;
    for (float& v : b.data) v += 0.1f;
    ImageMetricConfig cfg;
    cfg.data_range = 1.0;
    REQUIRE_THAT(psnr(a, b, cfg), Catch::Matchers::WithinAbs(20.0, 1e-5));
    // A flat reference falls back to data_range 1, so the default agrees.
    REQUIRE(psnr(a, b) == psnr(a, b, cfg));
  }

  SECTION("mse 0.0002 at data_range 1 is about 36.99 dB") {
    Volume b = a;
    const float offset = static_cast<float>(std::sqrt(0.0002));
    for (float& v : b.data) v += offset;
    ImageMetricConfig cfg;
    cfg.data_range = 1.0;
    REQUIRE_THAT(psnr(a, b, cfg), Catch::Matchers::WithinAbs(36.9897000433602, 1e-4));
  }
}

TEST_CASE("psnr decreases with mse and grows with data_range") {
  const Geometry g = make_geometry({6, 6, 6});
  const Volume a = constant_volume(g, 0.0f);
  Volume small_err = a, big_err = a;
  for (float& v : small_err.data) v += 0.05f;
  for (float& v : big_err.data) v += 0.2f;

  ImageMetricConfig cfg;
  cfg.data_range = 1.0;
  REQUIRE(psnr(a, small_err, cfg) > psnr(a, big_err, cfg));

  ImageMetricConfig wide = cfg;
  wide.data_range = 2.0;
  // Doubling the range adds 10*log10(4) dB.
  REQUIRE_THAT(psnr(a, big_err, wide) - psnr(a, big_err, cfg),
               Catch::Matchers::WithinAbs(10.0 * std::log10(4.0), 1e-9));
}

TEST_CASE("ssim is exactly one for identical and flat inputs") {
  const Geometry g = make_geometry({14, 13, 12});
  const Volume a = random_volume(g, 41);
  REQUIRE(ssim(a, a) == 1.0);

  const Volume flat = constant_volume(g, 0.5f);
  REQUIRE(ssim(flat, flat) == 1.0);  // zero-variance stability via c1, c2
}

TEST_CASE("ssim is symmetric under a fixed data_range") {
  const Geometry g = make_geometry({13, 13, 13});
  const Volume a = random_volume(g, 51);
  const Volume b = random_volume(g, 52);
  ImageMetricConfig cfg;
  cfg.data_range = 1.0;
  REQUIRE(ssim(a, b, cfg) == ssim(b, a, cfg));
}

TEST_CASE("ssim matches the sliding-window oracle") {
  const Geometry g = make_geometry({16, 16, 16});
  const Volume a = random_volume(g, 61);
  Volume b = a;
  std::mt19937 rng(62);
  std::normal_distribution<float> noise(0.0f, 0.05f);
  for (float& v : b.data) v += noise(rng);

  SECTION("default 11-voxel window") {
    ImageMetricConfig cfg;
    cfg.data_range = 1.0;
    REQUIRE_THAT(ssim(a, b, cfg), Catch::Matchers::WithinAbs(oracle::ssim(a, b, to_oracle(cfg)), 1e-6));
  }

  SECTION("smaller window and custom constants") {
    ImageMetricConfig cfg;
    cfg.data_range = 2.0;
    cfg.window = 5;
    cfg.sigma = 1.0;
    cfg.k1 = 0.02;
    cfg.k2 = 0.05;
    REQUIRE_THAT(ssim(a, b, cfg), Catch::Matchers::WithinAbs(oracle::ssim(a, b, to_oracle(cfg)), 1e-6));
  }

  SECTION("auto data_range agrees with the explicit reference range") {
    float lo = a.data[0], hi = a.data[0];
    for (float v : a.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    ImageMetricConfig explicit_cfg;
    explicit_cfg.data_range = static_cast<double>(hi) - static_cast<double>(lo);
    REQUIRE(ssim(a, b) == ssim(a, b, explicit_cfg));
    REQUIRE_THAT(ssim(a, b), Catch::Matchers::WithinAbs(oracle::ssim(a, b), 1e-6));
  }
}

TEST_CASE("ssim slice mode evaluates 2D windows per axial slice") {
  // Only x and y must cover the window; z may be thin.
  const Geometry g = make_geometry({16, 16, 4});
  const Volume a = random_volume(g, 71);
  Volume b = a;
  std::mt19937 rng(72);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  for (float& v : b.data) v += noise(rng);

  ImageMetricConfig cfg;
  cfg.data_range = 1.0;
  cfg.slice_mode = true;
  REQUIRE_THAT(ssim(a, b, cfg), Catch::Matchers::WithinAbs(oracle::ssim(a, b, to_oracle(cfg)), 1e-6));

  ImageMetricConfig volumetric = cfg;
  volumetric.slice_mode = false;
  REQUIRE_THROWS_AS(ssim(a, b, volumetric), ValidationError);  // z extent 4 < window 11
}

TEST_CASE("ssim mask restricts the averaging set") {
  const Geometry g = make_geometry({16, 16, 16});
  const Volume a = random_volume(g, 81);
  Volume b = a;
  std::mt19937 rng(82);
  std::normal_distribution<float> noise(0.0f, 0.05f);
  for (float& v : b.data) v += noise(rng);

  ImageMetricConfig cfg;
  cfg.data_range = 1.0;

  Mask full(g);
  std::fill(full.data.begin(), full.data.end(), std::uint8_t{1});
  REQUIRE(ssim(a, b, cfg, &full) == ssim(a, b, cfg));

  // Single-voxel mask at the volume centre: the mean reduces to that window's
  // local index, which the oracle reproduces as a 1x1x1 "volume" of results.
  Mask one(g);
  one.at(8, 8, 8) = 1;
  const double local = ssim(a, b, cfg, &one);
  REQUIRE(local >= -1.0);
  REQUIRE(local <= 1.0);
  REQUIRE(local != ssim(a, b, cfg));  // generic noise: restricted mean differs

  // Mask voxels that never enter the valid window region leave nothing to average.
  Mask corner(g);
  corner.at(0, 0, 0) = 1;
  REQUIRE_THROWS_AS(ssim(a, b, cfg, &corner), ValidationError);
}

TEST_CASE("ssim rejects volumes smaller than the window") {
  const Geometry g = make_geometry({8, 8, 8});
  const Volume a = random_volume(g, 91);
  try {
    (void)ssim(a, a);  // default window 11 > 8
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring("smaller window"));
  }

  ImageMetricConfig cfg;
  cfg.window = 7;
  REQUIRE_NOTHROW(ssim(a, a, cfg));
}

TEST_CASE("image metric config validation") {
  ImageMetricConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());

  ImageMetricConfig even = cfg;
  even.window = 10;
  REQUIRE_THROWS_AS(even.validate(), ValidationError);

  ImageMetricConfig tiny = cfg;
  tiny.window = 1;
  REQUIRE_THROWS_AS(tiny.validate(), ValidationError);

  ImageMetricConfig bad_sigma = cfg;
  bad_sigma.sigma = 0.0;
  REQUIRE_THROWS_AS(bad_sigma.validate(), ValidationError);

  ImageMetricConfig bad_k = cfg;
  bad_k.k1 = -0.01;
  REQUIRE_THROWS_AS(bad_k.validate(), ValidationError);
  bad_k = cfg;
  bad_k.k2 = 0.0;
  REQUIRE_THROWS_AS(bad_k.validate(), ValidationError);
}

TEST_CASE("evaluate_inpainting bundles the three metrics per scope") {
  const Geometry g = make_geometry({16, 16, 16});
  const Volume a = random_volume(g, 95);
  Volume b = a;
  std::mt19937 rng(96);
  std::normal_distribution<float> noise(0.0f, 0.05f);
  for (float& v : b.data) v += noise(rng);

  ImageMetricConfig cfg;
  cfg.data_range = 1.0;

  const ImageReport full = evaluate_inpainting(a, b, cfg);
  REQUIRE(full.scope == "full");
  REQUIRE(full.mse == mse(a, b));
  REQUIRE(full.psnr == psnr(a, b, cfg));
  REQUIRE(full.ssim == ssim(a, b, cfg));

  Mask m(g);
  for (int z = 5; z < 12; ++z)
    for (int y = 5; y < 12; ++y)
      for (int x = 5; x < 12; ++x) m.at(x, y, z) = 1;
  const ImageReport masked = evaluate_inpainting(a, b, cfg, &m);
  REQUIRE(masked.scope == "mask");
  REQUIRE(masked.mse == mse(a, b, &m));
  REQUIRE(masked.ssim == ssim(a, b, cfg, &m));
}
