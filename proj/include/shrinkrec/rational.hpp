#pragma once

// Exact rational numbers (GMP) and the small helpers shared by every module.

#include <gmpxx.h>
#include <mpfr.h>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "shrinkrec/error.hpp"

namespace shrinkrec {

using Rational = mpq_class;
using Integer = mpz_class;

inline bool is_integer(const Rational& q) { return q.get_den() == 1; }

// num/den in canonical form (mpq_class's two-argument constructor does not
// reduce).
inline Rational ratio(long num, long den) {
  if (den == 0) throw InvalidArgument("zero denominator");
  Rational q(num, den < 0 ? -den : den);
  if (den < 0) q = -q;
  q.canonicalize();
  return q;
}

// Accepts "p", "-p" or "p/q" with decimal digits only; the result is
// canonical. Decimal fractions are rejected so that no value is ever rounded
// on the way in.
inline Rational parse_rational(std::string_view text) {
  auto digits = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  std::string_view body = text;
  if (!body.empty() && (body.front() == '-' || body.front() == '+')) body.remove_prefix(1);
  const auto slash = body.find('/');
  const std::string_view num = body.substr(0, slash);
  const std::string_view den = slash == std::string_view::npos ? std::string_view{"1"} : body.substr(slash + 1);
  if (!digits(num) || !digits(den)) {
    throw ParseError("not a rational of the form p/q: '" + std::string(text) + "'");
  }
  if (den.find_first_not_of('0') == std::string_view::npos) {
    throw ParseError("zero denominator in '" + std::string(text) + "'");
  }
  Rational q;
  q.get_num().set_str(std::string(num), 10);
  q.get_den().set_str(std::string(den), 10);
  if (text.front() == '-') q.get_num() = -q.get_num();
  q.canonicalize();
  return q;
}

// Canonical "p/q" (or "p" for integers).
inline std::string to_string(const Rational& q) { return q.get_str(10); }

// Shortest decimal that round-trips the nearest double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Correctly rounded; mpq_get_d truncates instead.
inline double to_double(const Rational& q) {
  mpfr_t t;
  mpfr_init2(t, 53);
  mpfr_set_q(t, q.get_mpq_t(), MPFR_RNDN);
  const double v = mpfr_get_d(t, MPFR_RNDN);
  mpfr_clear(t);
  return v;
}

inline Integer floor(const Rational& q) {
  Integer r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

inline Integer ceil(const Rational& q) {
  Integer r;
  mpz_cdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

inline Rational rational_abs(const Rational& q) { return q < 0 ? Rational(-q) : q; }

inline Rational pow(const Rational& base, unsigned long e) {
  Rational out;
  mpz_pow_ui(out.get_num_mpz_t(), base.get_num_mpz_t(), e);
  mpz_pow_ui(out.get_den_mpz_t(), base.get_den_mpz_t(), e);
  out.canonicalize();
  return out;
}

inline Integer pow(const Integer& base, unsigned long e) {
  Integer out;
  mpz_pow_ui(out.get_mpz_t(), base.get_mpz_t(), e);
  return out;
}

inline Rational from_u64(std::uint64_t v) {
  Integer z;
  mpz_import(z.get_mpz_t(), 1, -1, sizeof(v), 0, 0, &v);
  return Rational(z);
}

inline Integer integer_from_u64(std::uint64_t v) {
  Integer z;
  mpz_import(z.get_mpz_t(), 1, -1, sizeof(v), 0, 0, &v);
  return z;
}

// Clamps a non-negative integer into [0, limit].
inline std::uint64_t saturate_u64(const Integer& z, std::uint64_t limit) {
  if (z <= 0) return 0;
  if (mpz_sizeinbase(z.get_mpz_t(), 2) > 64) return limit;
  std::uint64_t v = 0;
  mpz_export(&v, nullptr, -1, sizeof(v), 0, 0, z.get_mpz_t());
  return std::min(v, limit);
}

// Closed interval with exact endpoints.
struct RationalInterval {
  Rational lo;
  Rational hi;

  Rational width() const { return hi - lo; }
  bool contains(const Rational& x) const { return lo <= x && x <= hi; }
  friend bool operator==(const RationalInterval&, const RationalInterval&) = default;
};

}  // namespace shrinkrec
