#pragma once

// Main terms Psi(N), Phi(N) and the counting functions R(x,N), W(x,N).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shrinkrec/points.hpp"

namespace shrinkrec {

// Exact partial sums are kept while their denominator stays below this many
// bits; past it only the floating value is tracked.
inline constexpr std::size_t kExactSumBits = 4096;

struct TargetSpec {
  Point center;

  void validate(std::size_t dimension) const {
    if (center.size() != dimension) throw InvalidArgument("target center dimension does not match map");
    for (const auto& c : center) {
      if (c < 0 || c > 1) throw InvalidArgument("target center must lie in [0,1]^d");
    }
  }
};

struct SumValue {
  std::optional<Rational> exact;
  double value = 0;

  std::string exact_string() const { return exact ? to_string(*exact) : std::string{}; }
};

namespace detail {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0;
  double comp_ = 0;
};

// Tracks an exact partial sum until it gets too large to be worth keeping.
class ExactAccumulator {
 public:
  void add(const std::optional<Rational>& term) {
    if (!live_) return;
    if (!term) {
      live_ = false;
      return;
    }
    sum_ += *term;
    if (mpz_sizeinbase(sum_.get_den_mpz_t(), 2) > kExactSumBits) live_ = false;
  }
  std::optional<Rational> value() const { return live_ ? std::optional<Rational>(sum_) : std::nullopt; }

 private:
  Rational sum_ = 0;
  bool live_ = true;
};

}  // namespace detail

// Psi(N) = 2^d sum_{n<=N} prod_i psi_i(n).
inline SumValue psi_sum(const RateFunction& rate, std::uint64_t n_max, std::size_t dimension) {
  if (n_max == 0) throw InvalidArgument("N must be >= 1");
  if (dimension != rate.dimension()) throw InvalidArgument("rate dimension does not match d");
  detail::CompensatedSum approx;
  detail::ExactAccumulator exact;
  for (std::uint64_t n = 1; n <= n_max; ++n) {
    approx.add(rate.approx_product(n));
    exact.add(rate.exact_product(n));
  }
  const double scale = std::ldexp(1.0, static_cast<int>(dimension));
  SumValue out{exact.value(), approx.value() * scale};
  if (out.exact) *out.exact *= Rational(Integer(1) << static_cast<unsigned>(dimension));
  return out;
}

// mu(B(x0, psi(n)) ∩ [0,1]^d), exact when psi(n) is rational.
inline std::pair<std::optional<Rational>, double> ball_measure(const TargetSpec& target, const RateFunction& rate,
                                                               std::uint64_t n, Metric metric) {
  std::optional<Rational> exact = Rational(1);
  double approx = 1.0;
  for (std::size_t i = 0; i < rate.dimension(); ++i) {
    const auto r = rate.axis(i).exact(n);
    const double rd = rate.axis(i).approx(n);
    const Rational& c = target.center[i];
    if (metric == Metric::Torus) {
      approx *= std::min(1.0, 2 * rd);
      if (exact && r) {
        *exact *= std::min(Rational(1), Rational(2 * *r));
      }
    } else {
      const double cd = to_double(c);
      approx *= std::max(0.0, std::min(1.0, cd + rd) - std::max(0.0, cd - rd));
      if (exact && r) {
        *exact *= std::max(Rational(0), Rational(std::min(Rational(1), Rational(c + *r)) -
                                                 std::max(Rational(0), Rational(c - *r))));
      }
    }
    if (!r) exact.reset();
  }
  if (exact) approx = to_double(*exact);
  return {exact, approx};
}

// ⌈10^{j/4}⌉ for j = 0, 1, ... restricted to [from, n_max], plus n_max.
inline std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t n_max, std::uint64_t from = 1) {
  if (n_max == 0) throw InvalidArgument("N_max must be >= 1");
  std::vector<std::uint64_t> out;
  for (unsigned j = 0;; ++j) {
    std::uint64_t v;
    if (j % 4 == 0) {
      v = 1;
      for (unsigned k = 0; k < j / 4; ++k) v *= 10;
    } else {
      v = static_cast<std::uint64_t>(std::ceil(std::pow(10.0L, static_cast<long double>(j) / 4.0L)));
    }
    if (v > n_max) break;
    if (v >= from && (out.empty() || out.back() != v)) out.push_back(v);
  }
  if (out.empty() || out.back() != n_max) out.push_back(n_max);
  return out;
}

enum class CountKind { Recurrence, Target };

// Per-n quantities shared by every point of a run: fixed-point thresholds per
// axis and the main term (Psi for recurrence, Phi for shrinking targets).
class RateSchedule {
 public:
  RateSchedule(const OrbitProbe& probe, const RateFunction& rate, std::uint64_t n_max,
               const TargetSpec* target = nullptr)
      : rate_(rate), n_max_(n_max), kind_(target ? CountKind::Target : CountKind::Recurrence) {
    const MapSpec& map = probe.map();
    if (rate.dimension() != map.dimension()) throw InvalidArgument("rate dimension does not match map");
    if (target) {
      target->validate(map.dimension());
      target_ = *target;
    }
    thresholds_.resize(map.dimension());
    depths_.resize(map.dimension());
    for (std::size_t i = 0; i < map.dimension(); ++i) {
      const AxisGeometry& g = probe.geometry(i);
      if (!g.fixed_available()) continue;
      thresholds_[i].resize(n_max + 1);
      if (!g.digit_axis()) depths_[i].resize(n_max + 1);
      const AxisRate& r = rate.axis(i);
      for (std::uint64_t n = 1; n <= n_max; ++n) {
        thresholds_[i][n] = r.threshold(n, g.unit_z());
        if (!g.digit_axis()) depths_[i][n] = static_cast<std::uint32_t>(g.depth_for(r.approx(n)));
      }
    }

    main_term_.resize(n_max + 1, 0.0);
    exact_main_.resize(n_max + 1);
    detail::CompensatedSum approx;
    detail::ExactAccumulator exact;
    const double scale = std::ldexp(1.0, static_cast<int>(map.dimension()));
    const Rational scale_q(Integer(1) << static_cast<unsigned>(map.dimension()));
    exact_main_[0] = Rational(0);
    for (std::uint64_t n = 1; n <= n_max; ++n) {
      if (target) {
        auto [e, v] = ball_measure(*target, rate, n, probe.options().metric);
        approx.add(v);
        exact.add(e);
        main_term_[n] = approx.value();
      } else {
        approx.add(rate.approx_product(n));
        auto e = rate.exact_product(n);
        if (e) *e *= scale_q;
        exact.add(e);
        main_term_[n] = approx.value() * scale;
      }
      exact_main_[n] = exact.value();
      if (exact_main_[n]) main_term_[n] = to_double(*exact_main_[n]);
    }
  }

  const RateFunction& rate() const { return rate_; }
  std::uint64_t n_max() const { return n_max_; }
  CountKind kind() const { return kind_; }
  const std::optional<TargetSpec>& target() const { return target_; }

  const FixedThreshold& threshold(std::size_t axis, std::uint64_t n) const { return thresholds_[axis][n]; }
  std::size_t depth(std::size_t axis, std::uint64_t n) const { return depths_[axis][n]; }
  double main_term(std::uint64_t n) const { return main_term_[n]; }
  const std::optional<Rational>& main_term_exact(std::uint64_t n) const { return exact_main_[n]; }

 private:
  RateFunction rate_;
  std::uint64_t n_max_;
  CountKind kind_;
  std::optional<TargetSpec> target_;
  std::vector<std::vector<FixedThreshold>> thresholds_;
  std::vector<std::vector<std::uint32_t>> depths_;
  std::vector<double> main_term_;
  std::vector<std::optional<Rational>> exact_main_;
};

struct CountRecord {
  std::uint64_t seed = 0;
  CountKind kind = CountKind::Recurrence;
  std::vector<std::uint64_t> checkpoints;
  std::vector<std::uint64_t> counts;  // R(x, N_j) or W(x, N_j)
  std::vector<double> main_term;      // Psi(N_j) or Phi(N_j)
  std::vector<std::optional<Rational>> main_term_exact;
  std::vector<std::uint64_t> unresolved;  // cumulative Unresolved tally
  std::uint64_t last_hit = 0;             // largest hit time n <= N_J, 0 if none
  std::vector<bool> hits;                 // hits[n-1], only when requested
  std::vector<std::string> diagnostics;   // first few Unresolved diagnostics
};

struct CountOptions {
  bool keep_indicators = false;
};

inline void validate_checkpoints(const std::vector<std::uint64_t>& checkpoints) {
  if (checkpoints.empty()) throw InvalidArgument("at least one checkpoint is required");
  if (checkpoints.front() == 0) throw InvalidArgument("checkpoints must be >= 1");
  for (std::size_t j = 1; j < checkpoints.size(); ++j) {
    if (checkpoints[j] <= checkpoints[j - 1]) throw InvalidArgument("checkpoints must be strictly increasing");
  }
}

// Symbols a run up to N needs on top of N itself.
inline std::size_t lookahead(const OrbitProbe& probe) {
  std::size_t extra = 0;
  for (std::size_t i = 0; i < probe.map().dimension(); ++i) extra = std::max(extra, probe.home_depth(i));
  return extra;
}

// Counts hits for one point against a precomputed schedule.
inline CountRecord count_with_schedule(const OrbitProbe& probe, const RateSchedule& schedule, GenericPoint& p,
                                       const std::vector<std::uint64_t>& checkpoints, CountOptions options = {}) {
  validate_checkpoints(checkpoints);
  const std::uint64_t n_final = checkpoints.back();
  if (n_final > schedule.n_max()) throw InvalidArgument("checkpoint beyond the schedule's N_max");
  const std::size_t need = n_final + lookahead(probe);
  if (need > p.budget()) {
    throw BudgetExceeded("N=" + std::to_string(n_final) + " needs " + std::to_string(need) +
                         " symbols, budget is " + std::to_string(p.budget()));
  }
  // Refinement reads up to refine_cap + 8 symbols past the home depth; realize
  // them now so the spans below stay valid.
  const std::size_t headroom = std::min(p.budget(), need + probe.options().refine_cap + 8);
  p.realize(headroom);

  const MapSpec& map = probe.map();
  const std::size_t d = map.dimension();
  const Metric metric = probe.options().metric;
  const RateFunction& rate = schedule.rate();
  const bool target = schedule.kind() == CountKind::Target;

  struct AxisState {
    const AxisGeometry* g;
    std::span<const std::uint8_t> sym;
    FixedInterval home;
    std::int64_t window = 0;  // digit axes: value of digits n+1..n+W
  };
  std::vector<AxisState> axes(d);
  for (std::size_t i = 0; i < d; ++i) {
    const AxisGeometry& g = probe.geometry(i);
    axes[i].g = &g;
    axes[i].sym = p.symbols(i, 0, headroom);
    if (!g.fixed_available()) continue;
    if (target) {
      axes[i].home = g.point(schedule.target()->center[i]);
    } else {
      axes[i].home = g.enclose(axes[i].sym.subspan(0, probe.home_depth(i)));
    }
    if (g.digit_axis()) {
      for (std::size_t j = 0; j < g.window(); ++j) axes[i].window = axes[i].window * g.base() + axes[i].sym[j];
    }
  }

  CountRecord rec;
  rec.seed = p.seed();
  rec.kind = schedule.kind();
  rec.checkpoints = checkpoints;
  if (options.keep_indicators) rec.hits.assign(n_final, false);

  std::uint64_t count = 0, unresolved = 0;
  std::size_t next = 0;
  std::vector<AxisVerdict> verdict(d);
  for (std::uint64_t n = 1; n <= n_final; ++n) {
    bool miss = false;
    bool pending = false;
    for (std::size_t i = 0; i < d; ++i) {
      AxisState& s = axes[i];
      const AxisGeometry& g = *s.g;
      if (g.digit_axis()) {
        s.window = (s.window % g.top()) * g.base() + s.sym[n + g.window() - 1];
      }
      if (miss) continue;  // keep rolling windows in step
      if (!g.fixed_available()) {
        verdict[i] = AxisVerdict::Undecided;
        pending = true;
        continue;
      }
      const FixedInterval orbit = g.digit_axis() ? FixedInterval{s.window, s.window + 1}
                                                 : g.enclose(s.sym.subspan(n, schedule.depth(i, n)));
      verdict[i] = decide_fixed(s.home, orbit, schedule.threshold(i, n), metric, g.unit());
      if (verdict[i] == AxisVerdict::Miss) miss = true;
      if (verdict[i] == AxisVerdict::Undecided) pending = true;
    }
    bool hit = !miss;
    if (!miss && pending) {
      bool undecided = false;
      for (std::size_t i = 0; i < d && hit; ++i) {
        if (verdict[i] != AxisVerdict::Undecided) continue;
        std::string diag;
        const Rational* c = target ? &schedule.target()->center[i] : nullptr;
        const AxisVerdict v = probe.refine(p, i, n, rate.axis(i), c, axes[i].g->max_depth(), &diag);
        if (v == AxisVerdict::Miss) hit = false;
        if (v == AxisVerdict::Undecided) {
          undecided = true;
          if (rec.diagnostics.size() < 8) rec.diagnostics.push_back(diag);
        }
      }
      if (hit && undecided) {
        hit = false;  // Unresolved counts as Miss
        ++unresolved;
      }
    }
    if (hit) {
      ++count;
      rec.last_hit = n;
      if (options.keep_indicators) rec.hits[n - 1] = true;
    }
    if (n == checkpoints[next]) {
      rec.counts.push_back(count);
      rec.main_term.push_back(schedule.main_term(n));
      rec.main_term_exact.push_back(schedule.main_term_exact(n));
      rec.unresolved.push_back(unresolved);
      ++next;
    }
  }
  return rec;
}

inline CountRecord count_recurrence(const MapSpec& map, const RateFunction& rate, GenericPoint& p,
                                    const std::vector<std::uint64_t>& checkpoints, PredicateOptions predicate = {},
                                    CountOptions options = {}) {
  validate_checkpoints(checkpoints);
  const OrbitProbe probe(map, predicate);
  const RateSchedule schedule(probe, rate, checkpoints.back());
  return count_with_schedule(probe, schedule, p, checkpoints, options);
}

inline CountRecord count_shrinking_target(const MapSpec& map, const RateFunction& rate, const TargetSpec& target,
                                          GenericPoint& p, const std::vector<std::uint64_t>& checkpoints,
                                          PredicateOptions predicate = {}, CountOptions options = {}) {
  validate_checkpoints(checkpoints);
  const OrbitProbe probe(map, predicate);
  const RateSchedule schedule(probe, rate, checkpoints.back(), &target);
  return count_with_schedule(probe, schedule, p, checkpoints, options);
}

}  // namespace shrinkrec
