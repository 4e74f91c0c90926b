#pragma once

// Reproducible symbol streams.
//
// Seed derivation (SplitMix64, Steele/Lea/Flood 2014):
//   mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//           z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
//   point_seed(master, i) = mix(master + (i + 1) * 0x9E3779B97F4A7C15)
//   axis_seed(point, a)   = mix(point  + (a + 1) * 0x9E3779B97F4A7C15)
// Each axis draws from std::mt19937_64 seeded with axis_seed. A symbol is one
// 64-bit output u, rejected while u >= 2^64 - (2^64 mod Q), then mapped to the
// branch s whose cumulative numerator range [c_s, c_{s+1}) contains u mod Q,
// where Q is the common denominator of the branch lengths and c_s/Q are the
// cumulative lengths.

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "shrinkrec/maps.hpp"

namespace shrinkrec {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t point_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64_mix(master + (index + 1) * kGoldenGamma);
}

constexpr std::uint64_t axis_seed(std::uint64_t point, std::uint64_t axis) {
  return splitmix64_mix(point + (axis + 1) * kGoldenGamma);
}

// Draws branch indices of one axis with probability equal to branch length.
class SymbolSampler {
 public:
  explicit SymbolSampler(const AxisMap& axis) {
    Integer q = 1;
    for (const auto& b : axis.branches()) {
      const Rational len = b.length();
      mpz_lcm(q.get_mpz_t(), q.get_mpz_t(), len.get_den_mpz_t());
    }
    if (mpz_sizeinbase(q.get_mpz_t(), 2) > 62) {
      throw InvalidArgument("branch lengths need a common denominator below 2^62");
    }
    denominator_ = q.get_ui();
    std::uint64_t acc = 0;
    for (const auto& b : axis.branches()) {
      const Rational scaled = b.length() * Rational(q);
      acc += Integer(scaled.get_num()).get_ui();
      cumulative_.push_back(acc);
    }
    // 2^64 - (2^64 mod Q), computed without overflow.
    const std::uint64_t rem = (std::uint64_t{0} - denominator_) % denominator_;
    limit_ = rem == 0 ? 0 : std::uint64_t{0} - rem;
  }

  std::uint8_t draw(std::mt19937_64& gen) const {
    std::uint64_t u = gen();
    while (limit_ != 0 && u >= limit_) u = gen();
    const std::uint64_t r = u % denominator_;
    std::size_t s = 0;
    while (cumulative_[s] <= r) ++s;
    return static_cast<std::uint8_t>(s);
  }

 private:
  std::uint64_t denominator_ = 1;
  std::uint64_t limit_ = 0;  // 0 means no rejection needed
  std::vector<std::uint64_t> cumulative_;
};

}  // namespace shrinkrec
