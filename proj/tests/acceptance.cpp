// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Runtime limits are part of the criteria where stated.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "shrinkrec/shrinkrec.hpp"
#include "test_support.hpp"

namespace {

using namespace shrinkrec;

struct Verdict {
  bool passed = false;
  std::string detail;
};

using testing::q;
using testing::random_interval;
using testing::random_rational;

RateFunction harmonic_rate(unsigned n_max) { return testing::harmonic_rate(1, 2, n_max); }

std::string fmt(double v) { return format_double(v); }

RunOutput run_doc(const char* text) { return run(parse_config_text(text)); }

const Check* find_check(const RunOutput& out, const std::string& name) {
  for (const auto& c : out.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

// Requires each named check to be present and passing.
Verdict require_checks(const RunOutput& out, const std::vector<std::string>& names) {
  Verdict v{true, ""};
  for (const auto& name : names) {
    const Check* c = find_check(out, name);
    if (!c) {
      v.passed = false;
      v.detail += name + "=missing ";
      continue;
    }
    v.passed = v.passed && c->passed;
    v.detail += name + "=" + fmt(c->value) + (c->passed ? " " : "(!) ") + c->relation + " " + fmt(c->threshold) + "; ";
  }
  return v;
}

// 1. Exact Phi vs Psi on doubling with psi(n) = 1/(2n), and hand values.
Verdict ac1() {
  const MapSpec m = builtin_map("doubling");
  const auto mus = recurrence_measures(m, harmonic_rate(20), 20);
  Rational phi = 0, psi = 0, worst = 0;
  for (unsigned n = 1; n <= 20; ++n) {
    phi += mus[n - 1];
    psi += ratio(1, n);
    worst = std::max(worst, rational_abs(phi - psi));
  }
  const RateFunction table(AxisRate::table({q("1/4"), q("1/8")}), 1);
  const Rational a1 = recurrence_measure(m, table, 1), a2 = recurrence_measure(m, table, 2);
  const bool hand = a1 == q("1/2") && a2 == q("1/4");
  return {worst <= 1 && hand, "max |Phi-Psi| = " + fmt(to_double(worst)) + ", mu(A_1) = " + to_string(a1) +
                                  ", mu(A_2) = " + to_string(a2)};
}

// 2. Pairwise independence on average, b = 12.
Verdict ac2() {
  const MapSpec m = builtin_map("doubling");
  const unsigned b = 12;
  const RateFunction r = harmonic_rate(b);
  std::vector<EventSet> events;
  Rational sum = 0;
  for (unsigned n = 1; n <= b; ++n) {
    events.push_back(event_recurrence(m, r, n));
    sum += measure(events.back());
  }
  Rational cross = 0;
  for (unsigned i = 0; i < b; ++i) {
    for (unsigned j = i + 1; j < b; ++j) cross += measure_intersection(events[i], events[j]);
  }
  const Rational lhs = 2 * cross, rhs = sum * sum + 8 * sum + 8;
  return {lhs <= rhs, "2*sum mu(A_m ∩ A_n) = " + fmt(to_double(lhs)) + " <= " + fmt(to_double(rhs))};
}

// 3. Mixing bound for random rectangles E and cylinder unions F, n <= 12.
Verdict ac3() {
  std::mt19937_64 gen(3003);
  std::size_t violations = 0, cases = 0;
  double worst_ratio = 0;
  for (const char* name : {"doubling", "tent"}) {
    const MapSpec m = builtin_map(name);
    for (unsigned n = 1; n <= 12; ++n) {
      for (int trial = 0; trial < 100; ++trial) {
        const unsigned depth = 1 + static_cast<unsigned>(gen() % 6);
        std::vector<Rectangle> f;
        for (const auto& c : axis_cylinders(m.axis(0), depth)) {
          if (gen() % 2) f.push_back({{c.left, c.right}});
        }
        if (f.empty()) f.push_back({{axis_cylinders(m.axis(0), depth).front().left,
                                     axis_cylinders(m.axis(0), depth).front().right}});
        const Rectangle e = {random_interval(gen, 1 << 16)};
        const Rational deficit = rational_abs(mixing_deficit(m, e, f, n));
        const Rational bound = mixing_bound(m, f, n);
        ++cases;
        if (deficit > bound) ++violations;
        if (bound > 0) worst_ratio = std::max(worst_ratio, to_double(deficit / bound));
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(cases) +
                               " cases, max deficit/bound = " + fmt(worst_ratio)};
}

// 4. Sandwich inclusions for I = B(z, r):
// mu(I ∩ T^-m B(z, psi-r)) <= mu(I ∩ A_m) <= mu(I ∩ T^-m B(z, psi+r)).
Verdict ac4() {
  std::mt19937_64 gen(4004);
  std::size_t violations = 0, cases = 0;
  for (const char* name : {"doubling", "toral-diag(2,3)"}) {
    const MapSpec m = builtin_map(name);
    for (int trial = 0; trial < 50; ++trial) {
      const unsigned depth = 1 + static_cast<unsigned>(gen() % (m.dimension() == 1 ? 10 : 5));
      Point z;
      std::vector<AxisRate> psi, inner, outer;
      Rectangle box;
      for (std::size_t i = 0; i < m.dimension(); ++i) {
        z.push_back(random_rational(gen, 1024));
        const Rational p = (random_rational(gen, 1024) + 1) / 4;
        const Rational r = p * random_rational(gen, 256) * q("255/256");
        psi.push_back(AxisRate::constant(p));
        inner.push_back(AxisRate::constant(p - r));
        outer.push_back(AxisRate::constant(p + r));
        box.push_back({z[i] - r, z[i] + r});
      }
      const EventSet rect = event_rectangle(m, box);
      const TargetSpec center{z};
      const Rational lower = measure_intersection(rect, event_target(m, RateFunction(inner), center, depth));
      const Rational middle = measure_intersection(rect, event_recurrence(m, RateFunction(psi), depth));
      const Rational upper = measure_intersection(rect, event_target(m, RateFunction(outer), center, depth));
      ++cases;
      if (!(lower <= middle && middle <= upper)) ++violations;
    }
  }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(cases) + " instances"};
}

// 5. One-dimensional recurrence counts, via the experiment pipeline.
Verdict ac5() {
  const RunOutput out = run_doc(R"({"mode": "experiment", "map": "doubling", "rate": "power c=1/2 p=1/2",
      "n_max": 1000000, "checkpoints": "geometric", "checkpoint_from": 100, "samples": 200, "seed": 20240601})");
  return require_checks(out, {"median_relative_error", "envelope_fraction", "fit_band_hi"});
}

// 6. Two-dimensional recurrence counts on toral-diag(2,3).
Verdict ac6() {
  const RunOutput out = run_doc(R"j({"mode": "experiment", "map": "toral-diag(2,3)",
      "rate": "power c=1/2 p=1/4", "n_max": 100000, "checkpoints": "geometric", "checkpoint_from": 100,
      "samples": 100, "seed": 20240602, "thresholds": {"relative_error": 0.08}})j");
  return require_checks(out, {"median_relative_error", "envelope_fraction"});
}

// 7. Shrinking target around x0 = 1/2.
Verdict ac7() {
  const RunOutput out = run_doc(R"({"mode": "experiment", "map": "doubling", "rate": "power c=1/2 p=1/2",
      "event": "target", "target": {"center": ["1/2"]}, "n_max": 1000000, "checkpoints": "geometric",
      "checkpoint_from": 100, "samples": 200, "seed": 20240603})");
  return require_checks(out, {"median_relative_error", "envelope_fraction"});
}

// 8. Convergence case: uniformly small final counts.
Verdict ac8() {
  const RunOutput out = run_doc(R"({"mode": "dichotomy", "map": "doubling", "rate": "power c=1/2 p=2",
      "n_max": 1000000, "checkpoints": [1000000], "samples": 200, "seed": 20240604})");
  return require_checks(out, {"max_final"});
}

// 9. Variance statistic on doubling, plus binomial variance of synthetic coins.
Verdict ac9() {
  const RunOutput out = run_doc(R"({"mode": "experiment", "map": "doubling", "rate": "power c=1/2 p=1",
      "n_max": 500, "samples": 500, "seed": 20240605, "variance": {"a": 1, "b": 500},
      "oracle": {"depth": 16}, "thresholds": {"relative_error": 1.0}})");
  Verdict v = require_checks(out, {"variance_statistic"});
  std::vector<double> c;
  for (int n = 1; n <= 500; ++n) c.push_back(1.0 / n);
  const VarianceResult coins = variance_statistic(synthetic_indicators(c, 5000, 909), 1, 500, c, c);
  double expected = 0;
  for (double x : c) expected += x * (1 - x);
  const bool within = std::abs(coins.statistic - expected) <= 4 * coins.standard_error;
  v.passed = v.passed && within;
  v.detail += "synthetic " + fmt(coins.statistic) + " vs " + fmt(expected) + " (4 sigma = " +
              fmt(4 * coins.standard_error) + ")";
  return v;
}

// 10. Monte Carlo membership frequency of A_n against the exact measure.
Verdict ac10() {
  const std::size_t points = 100000;
  const unsigned n_max = 10;
  const RateFunction r = harmonic_rate(n_max);
  bool ok = true;
  double worst = 0;
  for (const char* name : {"doubling", "tent"}) {
    const MapSpec m = builtin_map(name);
    std::vector<std::vector<std::uint8_t>> hit(points, std::vector<std::uint8_t>(n_max));
    parallel_for(points, default_threads(), [&](std::size_t k) {
      GenericPoint p = GenericPoint::sample(m, point_seed(1010, k));
      for (unsigned n = 1; n <= n_max; ++n) hit[k][n - 1] = distance_predicate(m, p, n, r) == Outcome::Hit;
    });
    const auto mus = recurrence_measures(m, r, n_max);
    for (unsigned n = 1; n <= n_max; ++n) {
      std::size_t count = 0;
      for (const auto& h : hit) count += h[n - 1];
      const double mu = to_double(mus[n - 1]);
      const double freq = static_cast<double>(count) / static_cast<double>(points);
      const double sigma = std::sqrt(mu * (1 - mu) / static_cast<double>(points));
      // mu in {0, 1} makes membership certain: the frequency must match exactly.
      if (sigma == 0) {
        ok = ok && freq == mu;
        continue;
      }
      const double z = std::abs(freq - mu) / sigma;
      worst = std::max(worst, z);
      ok = ok && z <= 4;
    }
  }
  return {ok, "max |freq - mu| / sigma = " + fmt(worst) + " over 20 (map, n) pairs"};
}

struct Criterion {
  const char* id;
  const char* title;
  double limit_seconds;  // 0: no runtime limit
  std::function<Verdict()> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"AC1", "oracle exactness |Phi-Psi| <= 1, N <= 20", 10, ac1},
      {"AC2", "pairwise independence on average, b = 12", 60, ac2},
      {"AC3", "mixing bound, doubling and tent, n <= 12", 60, ac3},
      {"AC4", "sandwich inclusions, doubling and 2-d product", 0, ac4},
      {"AC5", "1-d recurrence counts, doubling, N = 1e6", 300, ac5},
      {"AC6", "2-d recurrence counts, toral-diag(2,3), N = 1e5", 300, ac6},
      {"AC7", "shrinking target x0 = 1/2, N = 1e6", 0, ac7},
      {"AC8", "convergence case, final R <= 20", 0, ac8},
      {"AC9", "variance statistic and synthetic coins", 0, ac9},
      {"AC10", "Monte Carlo vs exact measure, n <= 10", 0, ac10},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.fn();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0 && secs > c.limit_seconds) {
      v.passed = false;
      v.detail += " runtime over " + fmt(c.limit_seconds) + " s";
    }
    if (!v.passed) ++failures;
    std::ostringstream line;
    line << (v.passed ? "PASS " : "FAIL ") << c.id << " " << c.title << " [" << std::fixed << std::setprecision(2) << secs << " s] " << v.detail;
    std::cout << line.str() << std::endl;
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criteria failed" : "acceptance: all passed")
            << std::endl;
  return failures ? 1 : 0;
}
