#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace sihg {

inline constexpr double kPi = 3.14159265358979323846;

// splitmix64 step; used to expand seeds and to derive child streams.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ stream. Value semantics: copying the object forks the exact
// stream position, which is what trace replay in tests relies on.
//
// All derived draws (bounded ints, unit reals) are defined here rather than
// through <random> distributions so that traces are bit-identical across
// standard libraries.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "xoshiro256++";

  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_next(sm);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, bound). Rejection-free multiply-shift; the modulo bias is
  // below 2^-64 * bound, irrelevant at the block counts used here, and the
  // draw count per call is always exactly one.
  std::uint32_t next_below(std::uint32_t bound) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  // Uniform in [0, 1) with 53 mantissa bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi].
  double next_in(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Standard normal via Box-Muller, consuming exactly two draws.
  double next_normal() {
    // Clamp away from 0 so the log stays finite.
    const double u1 = std::max(next_unit(), 0x1.0p-60);
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Child stream derived from this stream's seed and a stream index. Splitting
  // is by seed arithmetic, not state sharing, so parent draws never move a
  // child and shard results are independent of evaluation order.
  Rng split(std::uint64_t stream) const {
    std::uint64_t sm = seed_ ^ (0x5851f42d4c957f2dULL * (stream + 1));
    return Rng(splitmix64_next(sm));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  std::uint64_t seed_;
};

}  // namespace sihg
