#pragma once

#include <random>
#include <string>
#include <vector>

#include "shrinkrec/shrinkrec.hpp"

namespace shrinkrec::testing {

inline Rational q(const char* s) { return parse_rational(s); }

inline RateFunction constant_rate(const char* c, std::size_t d = 1) { return RateFunction(AxisRate::constant(q(c)), d); }

inline RateFunction power_rate(const char* c, const char* p, std::size_t d = 1) {
  return RateFunction(AxisRate::power(q(c), q(p)), d);
}

inline RateFunction table_rate(std::vector<Rational> values, std::size_t d = 1) {
  return RateFunction(AxisRate::table(std::move(values)), d);
}

// Table rate holding psi(n) = c/n exactly for n <= n_max.
inline RateFunction harmonic_rate(long c_num, long c_den, unsigned n_max) {
  std::vector<Rational> v;
  for (unsigned n = 1; n <= n_max; ++n) v.push_back(ratio(c_num, c_den * static_cast<long>(n)));
  return table_rate(std::move(v));
}

// Uniform rational in [0,1] with denominator `den`.
inline Rational random_rational(std::mt19937_64& gen, long den) {
  std::uniform_int_distribution<long> dist(0, den);
  return ratio(dist(gen), den);
}

inline RationalInterval random_interval(std::mt19937_64& gen, long den) {
  Rational a = random_rational(gen, den), b = random_rational(gen, den);
  if (b < a) std::swap(a, b);
  return {a, b};
}

// Full-branch map with unequal slopes and one orientation-reversing branch:
// 4x on [0,1/4), 2-4x on [1/4,1/2), 2x-1 on [1/2,1). Exercises the generic
// (non-digit) paths.
inline MapSpec skew_map() {
  return MapSpec({AxisMap({{Rational(0), ratio(1, 4), Rational(4), Rational(0)},
                           {ratio(1, 4), ratio(1, 2), Rational(-4), Rational(-2)},
                           {ratio(1, 2), Rational(1), Rational(2), Rational(1)}})},
                 "skew");
}

}  // namespace shrinkrec::testing
