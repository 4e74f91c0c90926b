#pragma once

// Rate functions psi_i(n) with exact rational parameters.
//
// Values may be irrational (n^{-1/2}, log factors). Every comparison against
// a rational is still decided exactly: power laws by integer root extraction,
// log factors by MPFR enclosures with directed rounding at growing precision.

#include <mpfr.h>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shrinkrec/error.hpp"
#include "shrinkrec/rational.hpp"

namespace shrinkrec {

// Owning mpfr_t.
class Mpfr {
 public:
  explicit Mpfr(mpfr_prec_t prec) { mpfr_init2(v_, prec); }
  ~Mpfr() { mpfr_clear(v_); }
  Mpfr(const Mpfr&) = delete;
  Mpfr& operator=(const Mpfr&) = delete;

  mpfr_ptr get() { return v_; }
  mpfr_srcptr get() const { return v_; }

 private:
  mpfr_t v_;
};

enum class RateFamily { Power, PowerLog, Constant, Table };

// floor(psi * unit) and ceil(psi * unit), saturated.
struct FixedThreshold {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
};

inline constexpr std::uint64_t kThresholdSaturation = std::uint64_t{1} << 63;
inline constexpr long kMaxExponentPart = 64;

// psi_i for one axis.
class AxisRate {
 public:
  // c * n^{-p}
  static AxisRate power(Rational c, Rational p) {
    AxisRate r(RateFamily::Power);
    r.c_ = std::move(c);
    r.p_ = std::move(p);
    r.check();
    return r;
  }

  // c * n^{-p} * log(n+1)^{-q}
  static AxisRate power_log(Rational c, Rational p, Rational q) {
    AxisRate r(RateFamily::PowerLog);
    r.c_ = std::move(c);
    r.p_ = std::move(p);
    r.q_ = std::move(q);
    r.check();
    return r;
  }

  static AxisRate constant(Rational c) {
    AxisRate r(RateFamily::Constant);
    r.c_ = std::move(c);
    r.check();
    return r;
  }

  // psi(n) = values[n-1]; zero past the end of the table.
  static AxisRate table(std::vector<Rational> values) {
    AxisRate r(RateFamily::Table);
    r.values_ = std::move(values);
    r.check();
    return r;
  }

  RateFamily family() const { return family_; }
  const Rational& c() const { return c_; }
  const Rational& p() const { return p_; }
  const Rational& q() const { return q_; }
  const std::vector<Rational>& values() const { return values_; }

  bool has_log_factor() const { return family_ == RateFamily::PowerLog && q_ != 0; }

  bool identically_zero() const {
    if (family_ == RateFamily::Table) {
      for (const auto& v : values_) {
        if (v != 0) return false;
      }
      return true;
    }
    return c_ == 0;
  }

  // True when psi(n) is rational for every n.
  bool always_rational() const {
    if (identically_zero()) return true;
    switch (family_) {
      case RateFamily::Constant:
      case RateFamily::Table:
        return true;
      case RateFamily::Power:
        return is_integer(p_);
      case RateFamily::PowerLog:
        return !has_log_factor() && is_integer(p_);
    }
    return false;
  }

  std::optional<Rational> exact(std::uint64_t n) const {
    if (n == 0) throw InvalidArgument("rate functions are defined for n >= 1");
    switch (family_) {
      case RateFamily::Constant:
        return c_;
      case RateFamily::Table:
        return n <= values_.size() ? values_[n - 1] : Rational(0);
      case RateFamily::PowerLog:
        if (has_log_factor()) {
          if (c_ == 0) return Rational(0);
          return std::nullopt;
        }
        [[fallthrough]];
      case RateFamily::Power: {
        if (c_ == 0) return Rational(0);
        // n^{a/b} is rational iff n is a perfect b-th power.
        const long a = p_.get_num().get_si();
        const unsigned long b = p_.get_den().get_ui();
        Integer root;
        const Integer nn = integer_from_u64(n);
        if (mpz_root(root.get_mpz_t(), nn.get_mpz_t(), b) == 0) return std::nullopt;
        const Integer powered = pow(root, static_cast<unsigned long>(a < 0 ? -a : a));
        return a >= 0 ? Rational(c_ / Rational(powered)) : Rational(c_ * powered);
      }
    }
    return std::nullopt;
  }

  double approx(std::uint64_t n) const {
    if (auto e = exact(n)) return to_double(*e);
    const double nd = static_cast<double>(n);
    double v = to_double(c_) * std::pow(nd, -to_double(p_));
    if (has_log_factor()) v *= std::pow(std::log(nd + 1.0), -to_double(q_));
    return v;
  }

  // Rigorous bounds lo <= psi(n) <= hi at the precision of lo and hi.
  void enclose(std::uint64_t n, mpfr_ptr lo, mpfr_ptr hi) const {
    if (auto e = exact(n)) {
      mpfr_set_q(lo, e->get_mpq_t(), MPFR_RNDD);
      mpfr_set_q(hi, e->get_mpq_t(), MPFR_RNDU);
      return;
    }
    const mpfr_prec_t prec = std::max(mpfr_get_prec(lo), mpfr_get_prec(hi));
    power_enclosure(n, lo, hi, prec);
    mpfr_mul_q(lo, lo, c_.get_mpq_t(), MPFR_RNDD);
    mpfr_mul_q(hi, hi, c_.get_mpq_t(), MPFR_RNDU);
    if (!has_log_factor()) return;

    Mpfr llo(prec), lhi(prec);
    mpfr_set_ui(llo.get(), 0, MPFR_RNDN);
    const Integer n1 = integer_from_u64(n) + 1;
    mpfr_set_z(llo.get(), n1.get_mpz_t(), MPFR_RNDD);
    mpfr_set_z(lhi.get(), n1.get_mpz_t(), MPFR_RNDU);
    mpfr_log(llo.get(), llo.get(), MPFR_RNDD);
    mpfr_log(lhi.get(), lhi.get(), MPFR_RNDU);
    // log(n+1)^{|q|}, increasing in the (positive) base.
    const unsigned long e = static_cast<unsigned long>(std::abs(q_.get_num().get_si()));
    const unsigned long f = q_.get_den().get_ui();
    mpfr_pow_ui(llo.get(), llo.get(), e, MPFR_RNDD);
    mpfr_pow_ui(lhi.get(), lhi.get(), e, MPFR_RNDU);
    mpfr_rootn_ui(llo.get(), llo.get(), f, MPFR_RNDD);
    mpfr_rootn_ui(lhi.get(), lhi.get(), f, MPFR_RNDU);
    if (q_ > 0) {
      mpfr_div(lo, lo, lhi.get(), MPFR_RNDD);
      mpfr_div(hi, hi, llo.get(), MPFR_RNDU);
    } else {
      mpfr_mul(lo, lo, llo.get(), MPFR_RNDD);
      mpfr_mul(hi, hi, lhi.get(), MPFR_RNDU);
    }
  }

  // sign(x - psi(n)); nullopt only if it cannot be decided (x equal to a
  // transcendental value, which never happens for rational x).
  std::optional<int> compare(std::uint64_t n, const Rational& x) const {
    if (auto e = exact(n)) return cmp(x, *e) < 0 ? -1 : (cmp(x, *e) > 0 ? 1 : 0);
    if (x <= 0) return -1;  // psi(n) > 0 here
    if (!has_log_factor()) {
      // x vs c n^{-a/b}  <=>  (x/c)^b n^a vs 1 (a >= 0) or (x/c)^b vs n^{-a}.
      const long a = p_.get_num().get_si();
      const unsigned long b = p_.get_den().get_ui();
      const Rational lhs = pow(Rational(x / c_), b);
      const Integer npow = pow(integer_from_u64(n), static_cast<unsigned long>(a < 0 ? -a : a));
      const int s = a >= 0 ? cmp(Rational(lhs * npow), Rational(1)) : cmp(lhs, Rational(npow));
      return s < 0 ? -1 : (s > 0 ? 1 : 0);
    }
    for (mpfr_prec_t prec = 64; prec <= 8192; prec *= 2) {
      Mpfr lo(prec), hi(prec);
      enclose(n, lo.get(), hi.get());
      if (mpfr_cmp_q(lo.get(), x.get_mpq_t()) > 0) return -1;
      if (mpfr_cmp_q(hi.get(), x.get_mpq_t()) < 0) return 1;
    }
    return std::nullopt;
  }

  // floor(psi(n) * unit), ceil(psi(n) * unit), saturated at 2^63.
  FixedThreshold threshold(std::uint64_t n, const Integer& unit) const {
    if (auto e = exact(n)) {
      const Rational scaled = *e * Rational(unit);
      return {saturate_u64(floor(scaled), kThresholdSaturation), saturate_u64(ceil(scaled), kThresholdSaturation)};
    }
    if (!has_log_factor()) {
      // floor((c unit)^b n^{-a})^{1/b} via integer roots.
      const long a = p_.get_num().get_si();
      const unsigned long b = p_.get_den().get_ui();
      const Rational base = c_ * Rational(unit);
      Rational y = pow(base, b);
      const Integer npow = pow(integer_from_u64(n), static_cast<unsigned long>(a < 0 ? -a : a));
      if (a >= 0) {
        y /= Rational(npow);
      } else {
        y *= Rational(npow);
      }
      const Integer fy = floor(y);
      Integer root;
      const bool exact_root = mpz_root(root.get_mpz_t(), fy.get_mpz_t(), b) != 0 && Rational(fy) == y;
      const Integer up = exact_root ? root : Integer(root + 1);
      return {saturate_u64(root, kThresholdSaturation), saturate_u64(up, kThresholdSaturation)};
    }
    Mpfr lo(192), hi(192);
    enclose(n, lo.get(), hi.get());
    mpfr_mul_z(lo.get(), lo.get(), unit.get_mpz_t(), MPFR_RNDD);
    mpfr_mul_z(hi.get(), hi.get(), unit.get_mpz_t(), MPFR_RNDU);
    Integer zlo, zhi;
    mpfr_get_z(zlo.get_mpz_t(), lo.get(), MPFR_RNDD);
    mpfr_get_z(zhi.get_mpz_t(), hi.get(), MPFR_RNDU);
    return {saturate_u64(zlo, kThresholdSaturation), saturate_u64(zhi, kThresholdSaturation)};
  }

  std::string describe() const {
    switch (family_) {
      case RateFamily::Power:
        return "power c=" + to_string(c_) + " p=" + to_string(p_);
      case RateFamily::PowerLog:
        return "power-log c=" + to_string(c_) + " p=" + to_string(p_) + " q=" + to_string(q_);
      case RateFamily::Constant:
        return "constant c=" + to_string(c_);
      case RateFamily::Table: {
        std::string s = "table";
        for (const auto& v : values_) s += " " + to_string(v);
        return s;
      }
    }
    return {};
  }

  friend bool operator==(const AxisRate& a, const AxisRate& b) {
    return a.family_ == b.family_ && a.c_ == b.c_ && a.p_ == b.p_ && a.q_ == b.q_ && a.values_ == b.values_;
  }

 private:
  explicit AxisRate(RateFamily f) : family_(f) {}

  void check() const {
    std::vector<std::string> problems;
    if (c_ < 0) problems.emplace_back("c: ψ must be ≥ 0");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (values_[i] < 0) problems.push_back("values[" + std::to_string(i) + "]: ψ must be ≥ 0");
    }
    auto bounded = [&](const Rational& e, const char* name) {
      if (abs(e.get_num()) > kMaxExponentPart || e.get_den() > kMaxExponentPart) {
        problems.push_back(std::string(name) + ": exponent numerator and denominator must be at most " +
                           std::to_string(kMaxExponentPart));
      }
    };
    bounded(p_, "p");
    bounded(q_, "q");
    if (!problems.empty()) throw ValidationError(std::move(problems));
  }

  // Bounds on n^{-p}.
  void power_enclosure(std::uint64_t n, mpfr_ptr lo, mpfr_ptr hi, mpfr_prec_t prec) const {
    const long a = p_.get_num().get_si();
    const unsigned long b = p_.get_den().get_ui();
    if (a == 0) {
      mpfr_set_ui(lo, 1, MPFR_RNDN);
      mpfr_set_ui(hi, 1, MPFR_RNDN);
      return;
    }
    const Integer t = pow(integer_from_u64(n), static_cast<unsigned long>(a < 0 ? -a : a));
    Mpfr rlo(prec), rhi(prec);
    mpfr_set_z(rlo.get(), t.get_mpz_t(), MPFR_RNDD);
    mpfr_set_z(rhi.get(), t.get_mpz_t(), MPFR_RNDU);
    mpfr_rootn_ui(rlo.get(), rlo.get(), b, MPFR_RNDD);
    mpfr_rootn_ui(rhi.get(), rhi.get(), b, MPFR_RNDU);
    if (a > 0) {
      mpfr_ui_div(lo, 1, rhi.get(), MPFR_RNDD);
      mpfr_ui_div(hi, 1, rlo.get(), MPFR_RNDU);
    } else {
      mpfr_set(lo, rlo.get(), MPFR_RNDD);
      mpfr_set(hi, rhi.get(), MPFR_RNDU);
    }
  }

  RateFamily family_;
  Rational c_ = 0;
  Rational p_ = 0;
  Rational q_ = 0;
  std::vector<Rational> values_;
};

// Per-axis rates; psi(n) is their product.
class RateFunction {
 public:
  RateFunction() = default;
  explicit RateFunction(std::vector<AxisRate> axes) : axes_(std::move(axes)) {
    if (axes_.empty()) throw InvalidArgument("rate needs at least one axis");
  }
  // Same rate on every axis.
  RateFunction(const AxisRate& rate, std::size_t dimension) : axes_(dimension, rate) {
    if (dimension == 0) throw InvalidArgument("rate needs at least one axis");
  }

  std::size_t dimension() const { return axes_.size(); }
  const AxisRate& axis(std::size_t i) const { return axes_[i]; }
  const std::vector<AxisRate>& axes() const { return axes_; }

  bool identically_zero() const {
    for (const auto& a : axes_) {
      if (a.identically_zero()) return true;
    }
    return false;
  }

  bool always_rational() const {
    for (const auto& a : axes_) {
      if (!a.always_rational()) return false;
    }
    return true;
  }

  std::optional<Rational> exact_product(std::uint64_t n) const {
    Rational v = 1;
    for (const auto& a : axes_) {
      auto e = a.exact(n);
      if (!e) return std::nullopt;
      v *= *e;
    }
    return v;
  }

  double approx_product(std::uint64_t n) const {
    double v = 1.0;
    for (const auto& a : axes_) v *= a.approx(n);
    return v;
  }

  friend bool operator==(const RateFunction&, const RateFunction&) = default;

 private:
  std::vector<AxisRate> axes_;
};

}  // namespace shrinkrec
