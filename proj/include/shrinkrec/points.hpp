#pragma once

// Lebesgue-generic sample points and orbit-distance predicates.
//
// A point is its itinerary: one lazily drawn symbol stream per axis. For a
// full-branch map the depth-k prefix pins the point to a cylinder, and the
// symbols from position n on pin T^n x the same way, so d(T^n x, x) is
// bracketed without ever composing n affine maps.
//
// Comparisons run in two stages. A fixed-point stage works in integer units
// 1/B: base-b axes read a window of W digits (B = b^W), other axes apply the
// inverse branches with outward rounding (B = 2^62). Only when that stage is
// not decisive do we recompute both enclosures with exact rationals at
// growing depth, comparing against psi(n) exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shrinkrec/maps.hpp"
#include "shrinkrec/rate.hpp"
#include "shrinkrec/rng.hpp"

namespace shrinkrec {

inline constexpr std::size_t kDefaultBudget = std::size_t{1} << 22;
inline constexpr std::size_t kDefaultRefineCap = 256;

enum class Metric { Interval, Torus };
enum class Outcome { Hit, Miss, Unresolved };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Hit:
      return "Hit";
    case Outcome::Miss:
      return "Miss";
    case Outcome::Unresolved:
      return "Unresolved";
  }
  return "?";
}

struct PredicateOptions {
  Metric metric = Metric::Interval;
  std::size_t refine_cap = kDefaultRefineCap;
  // Skip the digit-window path even on base-b axes (used to cross-check).
  bool force_generic = false;
};

// ---------------------------------------------------------------------------
// Points

class GenericPoint {
 public:
  static GenericPoint sample(const MapSpec& map, std::uint64_t seed, std::size_t budget = kDefaultBudget) {
    GenericPoint p(map, seed, budget);
    for (std::size_t i = 0; i < map.dimension(); ++i) {
      auto& s = p.streams_[i];
      s.sampler.emplace(map.axis(i));
      s.gen.seed(axis_seed(seed, i));
    }
    return p;
  }

  // Symbol stream prefix followed by `cycle` repeated forever, per axis.
  static GenericPoint forced(const MapSpec& map, std::vector<std::vector<std::uint8_t>> prefix,
                             std::vector<std::vector<std::uint8_t>> cycle, std::size_t budget = kDefaultBudget) {
    if (prefix.size() != map.dimension() || cycle.size() != map.dimension()) {
      throw InvalidArgument("forced stream needs one prefix and one cycle per axis");
    }
    GenericPoint p(map, 0, budget);
    for (std::size_t i = 0; i < map.dimension(); ++i) {
      if (cycle[i].empty()) throw InvalidArgument("forced cycle must be non-empty");
      for (auto s : prefix[i]) check_symbol(map.axis(i), s);
      for (auto s : cycle[i]) check_symbol(map.axis(i), s);
      p.streams_[i].prefix = std::move(prefix[i]);
      p.streams_[i].cycle = std::move(cycle[i]);
    }
    return p;
  }

  // One-dimensional shorthand.
  static GenericPoint forced(const MapSpec& map, std::vector<std::uint8_t> prefix, std::vector<std::uint8_t> cycle,
                             std::size_t budget = kDefaultBudget) {
    return forced(map, std::vector<std::vector<std::uint8_t>>{std::move(prefix)},
                  std::vector<std::vector<std::uint8_t>>{std::move(cycle)}, budget);
  }

  const MapSpec& map() const { return map_; }
  std::size_t dimension() const { return streams_.size(); }
  std::uint64_t seed() const { return seed_; }
  std::size_t budget() const { return budget_; }

  std::size_t realized_depth() const {
    std::size_t d = streams_.front().symbols.size();
    for (const auto& s : streams_) d = std::min(d, s.symbols.size());
    return d;
  }

  // Makes the first `depth` symbols of every axis available.
  void realize(std::size_t depth) {
    if (depth > budget_) {
      throw BudgetExceeded("depth " + std::to_string(depth) + " exceeds precision budget " + std::to_string(budget_));
    }
    for (auto& s : streams_) extend(s, depth);
  }

  std::uint8_t symbol(std::size_t axis, std::size_t index) {
    auto& s = streams_[axis];
    if (index >= s.symbols.size()) {
      if (index >= budget_) {
        throw BudgetExceeded("symbol " + std::to_string(index) + " exceeds precision budget " +
                             std::to_string(budget_));
      }
      extend(s, std::min(budget_, std::max(index + 1, s.symbols.size() + kChunk)));
    }
    return s.symbols[index];
  }

  std::span<const std::uint8_t> symbols(std::size_t axis, std::size_t begin, std::size_t count) {
    if (count > 0) symbol(axis, begin + count - 1);
    return std::span<const std::uint8_t>(streams_[axis].symbols).subspan(begin, count);
  }

 private:
  static constexpr std::size_t kChunk = 4096;

  struct AxisStream {
    std::vector<std::uint8_t> symbols;
    std::mt19937_64 gen;
    std::optional<SymbolSampler> sampler;
    std::vector<std::uint8_t> prefix;
    std::vector<std::uint8_t> cycle;
  };

  GenericPoint(const MapSpec& map, std::uint64_t seed, std::size_t budget)
      : map_(map), seed_(seed), budget_(budget), streams_(map.dimension()) {}

  static void check_symbol(const AxisMap& axis, std::uint8_t s) {
    if (s >= axis.branch_count()) throw InvalidArgument("forced symbol out of range");
  }

  static void extend(AxisStream& s, std::size_t depth) {
    if (s.symbols.size() >= depth) return;
    s.symbols.reserve(depth);
    while (s.symbols.size() < depth) {
      const std::size_t i = s.symbols.size();
      if (s.sampler) {
        s.symbols.push_back(s.sampler->draw(s.gen));
      } else if (i < s.prefix.size()) {
        s.symbols.push_back(s.prefix[i]);
      } else {
        s.symbols.push_back(s.cycle[(i - s.prefix.size()) % s.cycle.size()]);
      }
    }
  }

  MapSpec map_;
  std::uint64_t seed_;
  std::size_t budget_;
  std::vector<AxisStream> streams_;
};

inline GenericPoint sample_point(const MapSpec& map, std::uint64_t seed, std::size_t budget = kDefaultBudget) {
  return GenericPoint::sample(map, seed, budget);
}

struct Enclosure {
  std::vector<RationalInterval> axes;
};

// Closure of the depth-`depth` cylinder containing p; depth 0 gives [0,1]^d.
inline Enclosure enclose(GenericPoint& p, std::size_t depth) {
  if (depth > p.budget()) {
    throw BudgetExceeded("depth " + std::to_string(depth) + " exceeds precision budget " + std::to_string(p.budget()));
  }
  Enclosure e;
  for (std::size_t i = 0; i < p.dimension(); ++i) {
    e.axes.push_back(compose_word(p.map().axis(i), p.symbols(i, 0, depth)).domain());
  }
  return e;
}

// ---------------------------------------------------------------------------
// Fixed-point geometry of one axis

using i128 = __int128;

// [lo, hi] in units of 1/B.
struct FixedInterval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

enum class AxisVerdict { Hit, Miss, Undecided };

class AxisGeometry {
 public:
  AxisGeometry(const AxisMap& axis, bool force_generic) : branch_count_(axis.branch_count()) {
    log_lambda_ = std::log(to_double(axis.lambda()));
    if (axis.digit_base() != 0 && !force_generic) {
      base_ = axis.digit_base();
      std::int64_t unit = 1;
      window_ = 0;
      while (unit <= (std::int64_t{1} << 62) / base_) {
        unit *= base_;
        ++window_;
      }
      unit_ = unit;
      top_ = unit_ / base_;
    } else {
      unit_ = std::int64_t{1} << 62;
      fixed_ok_ = true;
      for (const auto& b : axis.branches()) {
        const auto fits = [](const Integer& z) { return mpz_sizeinbase(z.get_mpz_t(), 2) <= 31; };
        if (!fits(b.slope.get_num()) || !fits(b.slope.get_den()) || !fits(b.offset.get_num()) ||
            !fits(b.offset.get_den())) {
          fixed_ok_ = false;
          break;
        }
        const i128 kn = b.slope.get_num().get_si(), kd = b.slope.get_den().get_si();
        const i128 wn = b.offset.get_num().get_si(), wd = b.offset.get_den().get_si();
        // inverse: y -> (y + w)/k = (y*wd + wn) * kd / (wd * kn)
        inverse_.push_back({wd * kd, wn * static_cast<i128>(unit_) * kd, wd * kn});
      }
      // Past this depth rounding (about one unit per step) dominates the width.
      max_depth_ = static_cast<std::size_t>(std::ceil(62.0 * std::log(2.0) / log_lambda_)) + 2;
    }
    unit_z_ = Integer(static_cast<long>(unit_));
  }

  bool digit_axis() const { return base_ != 0; }
  bool fixed_available() const { return digit_axis() || fixed_ok_; }
  unsigned base() const { return base_; }
  std::size_t window() const { return window_; }
  std::int64_t unit() const { return unit_; }
  const Integer& unit_z() const { return unit_z_; }
  std::int64_t top() const { return top_; }
  std::size_t max_depth() const { return digit_axis() ? window_ : max_depth_; }

  // Symbols needed for an enclosure well below radius psi.
  std::size_t depth_for(double psi) const {
    if (digit_axis()) return window_;
    if (!(psi > 0)) return 1;
    const double k = std::ceil(std::log(64.0 / psi) / log_lambda_);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1.0, k)), 1, max_depth_);
  }

  // Enclosure of any point whose itinerary starts with `word`.
  FixedInterval enclose(std::span<const std::uint8_t> word) const {
    if (digit_axis()) {
      std::int64_t v = 0, scale = unit_;
      const std::size_t k = std::min(word.size(), window_);
      for (std::size_t j = 0; j < k; ++j) {
        v = v * base_ + word[j];
        scale /= base_;
      }
      return {v * scale, (v + 1) * scale};
    }
    i128 lo = 0, hi = unit_;
    for (std::size_t j = word.size(); j-- > 0;) {
      const auto& f = inverse_[word[j]];
      i128 nlo = f.mul * lo + f.add, nhi = f.mul * hi + f.add;
      i128 den = f.den;
      if (den < 0) {
        den = -den;
        const i128 t = -nlo;
        nlo = -nhi;
        nhi = t;
      }
      lo = floor_div(nlo, den);
      hi = ceil_div(nhi, den);
    }
    return {static_cast<std::int64_t>(std::clamp<i128>(lo, 0, unit_)),
            static_cast<std::int64_t>(std::clamp<i128>(hi, 0, unit_))};
  }

  // floor(x B), ceil(x B).
  FixedInterval point(const Rational& x) const {
    const Rational s = x * Rational(unit_z_);
    return {static_cast<std::int64_t>(saturate_u64(shrinkrec::floor(s), static_cast<std::uint64_t>(unit_))),
            static_cast<std::int64_t>(saturate_u64(shrinkrec::ceil(s), static_cast<std::uint64_t>(unit_)))};
  }

 private:
  struct InverseBranch {
    i128 mul;
    i128 add;
    i128 den;
  };

  static i128 floor_div(i128 num, i128 den) { return num >= 0 ? num / den : -((-num + den - 1) / den); }
  static i128 ceil_div(i128 num, i128 den) { return num >= 0 ? (num + den - 1) / den : -((-num) / den); }

  std::size_t branch_count_;
  double log_lambda_ = 0;
  unsigned base_ = 0;
  std::size_t window_ = 0;
  std::int64_t unit_ = 0;
  std::int64_t top_ = 0;
  Integer unit_z_;
  bool fixed_ok_ = false;
  std::size_t max_depth_ = 0;
  std::vector<InverseBranch> inverse_;
};

namespace detail {

// Range of |v - u| (or torus distance) for u in a, v in b, in units 1/B.
inline std::pair<std::int64_t, std::int64_t> distance_range(FixedInterval a, FixedInterval b, Metric metric,
                                                            std::int64_t unit) {
  const std::int64_t lower = b.lo - a.hi;
  const std::int64_t upper = b.hi - a.lo;
  std::int64_t dl, dh;
  if (lower >= 0) {
    dl = lower;
    dh = upper;
  } else if (upper <= 0) {
    dl = -upper;
    dh = -lower;
  } else {
    dl = 0;
    dh = std::max(-lower, upper);
  }
  if (metric == Metric::Torus) {
    auto fold = [unit](std::int64_t d) { return std::min(d, unit - d); };
    const std::int64_t lo = std::min(fold(dl), fold(dh));
    const std::int64_t hi = (2 * dl <= unit && unit <= 2 * dh) ? (unit + 1) / 2 : std::max(fold(dl), fold(dh));
    return {lo, hi};
  }
  return {dl, dh};
}

inline std::pair<Rational, Rational> distance_range(const RationalInterval& a, const RationalInterval& b,
                                                    Metric metric) {
  const Rational lower = b.lo - a.hi;
  const Rational upper = b.hi - a.lo;
  Rational dl, dh;
  if (lower >= 0) {
    dl = lower;
    dh = upper;
  } else if (upper <= 0) {
    dl = -upper;
    dh = -lower;
  } else {
    dl = 0;
    dh = std::max(Rational(-lower), upper);
  }
  if (metric == Metric::Torus) {
    auto fold = [](const Rational& d) { return std::min(d, Rational(1 - d)); };
    const Rational half(1, 2);
    Rational lo = std::min(fold(dl), fold(dh));
    Rational hi = (dl <= half && half <= dh) ? half : std::max(fold(dl), fold(dh));
    return {lo, hi};
  }
  return {dl, dh};
}

}  // namespace detail

inline AxisVerdict decide_fixed(FixedInterval a, FixedInterval b, FixedThreshold t, Metric metric,
                                std::int64_t unit) {
  const auto [dl, dh] = detail::distance_range(a, b, metric, unit);
  if (static_cast<std::uint64_t>(dh) < t.lo) return AxisVerdict::Hit;
  if (static_cast<std::uint64_t>(dl) >= t.hi) return AxisVerdict::Miss;
  return AxisVerdict::Undecided;
}

inline AxisVerdict decide_exact(const RationalInterval& a, const RationalInterval& b, const AxisRate& rate,
                                std::uint64_t n, Metric metric) {
  const auto [dl, dh] = detail::distance_range(a, b, metric);
  const auto upper = rate.compare(n, dh);
  if (upper && *upper < 0) return AxisVerdict::Hit;
  const auto lower = rate.compare(n, dl);
  if (lower && *lower >= 0) return AxisVerdict::Miss;
  return AxisVerdict::Undecided;
}

// ---------------------------------------------------------------------------
// Predicates

// Evaluates d(T^n x, x) < psi_i(n) (recurrence) or d(T^n x, x0_i) < psi_i(n)
// (shrinking target) on every axis.
class OrbitProbe {
 public:
  OrbitProbe(const MapSpec& map, PredicateOptions options = {}) : map_(map), options_(options) {
    for (const auto& a : map.axes()) geometry_.emplace_back(a, options.force_generic);
  }

  const MapSpec& map() const { return map_; }
  const PredicateOptions& options() const { return options_; }
  const AxisGeometry& geometry(std::size_t i) const { return geometry_[i]; }

  // Depth used for the enclosure of x itself on a generic axis.
  std::size_t home_depth(std::size_t i) const { return geometry_[i].max_depth(); }

  // Exact refinement for one axis; `target` selects the shrinking-target form.
  AxisVerdict refine(GenericPoint& p, std::size_t axis, std::uint64_t n, const AxisRate& rate,
                     const Rational* target, std::size_t start_depth, std::string* diagnostic = nullptr) const {
    const AxisMap& a = map_.axis(axis);
    const std::size_t first = std::max<std::size_t>(start_depth, 8);
    for (std::size_t k = first; k <= first + options_.refine_cap; k += 32) {
      if (n + k > p.budget()) break;
      const RationalInterval orbit = compose_word(a, p.symbols(axis, n, k)).domain();
      const RationalInterval home =
          target ? RationalInterval{*target, *target} : compose_word(a, p.symbols(axis, 0, k)).domain();
      const AxisVerdict v = decide_exact(home, orbit, rate, n, options_.metric);
      if (v != AxisVerdict::Undecided) return v;
    }
    if (diagnostic) {
      *diagnostic = "unresolved: axis " + std::to_string(axis) + " n=" + std::to_string(n) + " seed=" +
                    std::to_string(p.seed()) + " after " + std::to_string(options_.refine_cap) +
                    " refinement symbols";
    }
    return AxisVerdict::Undecided;
  }

  Outcome recurrence(GenericPoint& p, std::uint64_t n, const RateFunction& rate,
                     std::string* diagnostic = nullptr) const {
    return evaluate(p, n, rate, nullptr, diagnostic);
  }

  Outcome target(GenericPoint& p, std::uint64_t n, const RateFunction& rate, const Point& center,
                 std::string* diagnostic = nullptr) const {
    if (center.size() != map_.dimension()) throw InvalidArgument("target dimension does not match map");
    return evaluate(p, n, rate, &center, diagnostic);
  }

 private:
  Outcome evaluate(GenericPoint& p, std::uint64_t n, const RateFunction& rate, const Point* center,
                   std::string* diagnostic) const {
    if (n == 0) throw InvalidArgument("n must be >= 1");
    if (rate.dimension() != map_.dimension()) throw InvalidArgument("rate dimension does not match map");
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < map_.dimension(); ++i) {
      const AxisGeometry& g = geometry_[i];
      if (!g.fixed_available()) {
        pending.push_back(i);
        continue;
      }
      const AxisRate& r = rate.axis(i);
      const FixedThreshold t = r.threshold(n, g.unit_z());
      const std::size_t k = g.depth_for(r.approx(n));
      if (n + std::max(k, home_depth(i)) > p.budget()) {
        pending.push_back(i);
        continue;
      }
      const FixedInterval orbit = g.enclose(p.symbols(i, n, k));
      const FixedInterval home = center ? g.point((*center)[i]) : g.enclose(p.symbols(i, 0, home_depth(i)));
      const AxisVerdict v = decide_fixed(home, orbit, t, options_.metric, g.unit());
      if (v == AxisVerdict::Miss) return Outcome::Miss;
      if (v == AxisVerdict::Undecided) pending.push_back(i);
    }
    bool unresolved = false;
    for (auto i : pending) {
      const Rational* c = center ? &(*center)[i] : nullptr;
      const AxisVerdict v = refine(p, i, n, rate.axis(i), c, geometry_[i].max_depth(), diagnostic);
      if (v == AxisVerdict::Miss) return Outcome::Miss;
      if (v == AxisVerdict::Undecided) unresolved = true;
    }
    return unresolved ? Outcome::Unresolved : Outcome::Hit;
  }

  MapSpec map_;
  PredicateOptions options_;
  std::vector<AxisGeometry> geometry_;
};

inline Outcome distance_predicate(const MapSpec& map, GenericPoint& p, std::uint64_t n, const RateFunction& rate,
                                  PredicateOptions options = {}) {
  return OrbitProbe(map, options).recurrence(p, n, rate);
}

// Radii given directly as exact rationals psi_i(n).
inline Outcome distance_predicate(const MapSpec& map, GenericPoint& p, std::uint64_t n,
                                  const std::vector<Rational>& radii, PredicateOptions options = {}) {
  std::vector<AxisRate> axes;
  for (const auto& r : radii) axes.push_back(AxisRate::constant(r));
  return distance_predicate(map, p, n, RateFunction(std::move(axes)), options);
}

inline Outcome target_predicate(const MapSpec& map, GenericPoint& p, std::uint64_t n, const RateFunction& rate,
                                const Point& center, PredicateOptions options = {}) {
  return OrbitProbe(map, options).target(p, n, rate, center);
}

}  // namespace shrinkrec
