#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace gliakit {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

/// SplitMix64 finalizer; bijective on 64-bit words.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace detail

/// Counter-based random stream keyed by (master seed, case id, stream index).
/// Draws are a pure function of the key and the draw counter, so identical
/// derivation inputs give identical sequences no matter which order streams
/// are created or interleaved across threads.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view case_id, std::uint64_t stream_index) {
    std::uint64_t k = detail::mix64(master_seed + detail::kGolden);
    k = detail::mix64(k ^ detail::fnv1a64(case_id));
    key_ = detail::mix64(k + detail::kGolden * (stream_index + 1));
  }

  explicit RngStream(std::uint64_t key) : key_(detail::mix64(key + detail::kGolden)) {}

  std::uint64_t next_u64() { return detail::mix64(key_ + detail::kGolden * ++counter_); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire reduction, no modulo bias worth caring about here.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Box-Muller normal draw; the spare is cached so draws stay sequential.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gliakit
