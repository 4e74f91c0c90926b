#pragma once

// Monte Carlo experiments over sampled points and the statistics built on
// them.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "shrinkrec/counting.hpp"
#include "shrinkrec/exact_measure.hpp"

namespace shrinkrec {

// ---------------------------------------------------------------------------
// Parallel map over indices

// SHRINKREC_THREADS if set and positive, else the hardware concurrency.
inline unsigned default_threads() {
  if (const char* env = std::getenv("SHRINKREC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Calls fn(i) for i in [0, count) on up to `threads` workers. Workers claim
// indices from a shared counter; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Small statistics

namespace stats {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Unbiased sample variance; 0 for fewer than two values.
inline double variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Linear interpolation between order statistics (Hyndman-Fan type 7).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

}  // namespace stats

// ---------------------------------------------------------------------------
// Configuration

// |R - Psi| <= scale * Psi^{1/2} * max(log Psi, 0)^power + offset
struct Envelope {
  double scale = 4;
  double power = 1.6;
  double offset = 50;

  double operator()(double psi) const {
    const double l = psi > 1 ? std::log(psi) : 0.0;
    return scale * std::sqrt(std::max(psi, 0.0)) * std::pow(l, power) + offset;
  }
};

// Realized depth allowed per point: n_max + ceil(log_lambda(1/psi_min)) + 256,
// where psi_min is the smallest positive radius used up to n_max.
inline std::size_t precision_budget(const MapSpec& map, const RateFunction& rate, std::uint64_t n_max) {
  double psi_min = 1;
  for (std::size_t i = 0; i < rate.dimension(); ++i) {
    const AxisRate& r = rate.axis(i);
    std::vector<double> probe;
    if (r.family() == RateFamily::Table) {
      for (std::uint64_t n = 1; n <= std::min<std::uint64_t>(n_max, r.values().size()); ++n) probe.push_back(r.approx(n));
    } else {
      probe = {r.approx(1), r.approx(n_max)};
    }
    for (double v : probe) {
      if (v > 0) psi_min = std::min(psi_min, v);
    }
  }
  const double lambda = to_double(map.lambda());
  const auto extra = static_cast<std::size_t>(std::ceil(std::log(1 / psi_min) / std::log(lambda)));
  return static_cast<std::size_t>(n_max) + extra + 256;
}

using PointFactory = std::function<GenericPoint(std::size_t index, std::uint64_t seed)>;

enum class TargetMode { Fixed, Sampled };

struct ExperimentConfig {
  ExperimentConfig(MapSpec m, RateFunction r) : map(std::move(m)), rate(std::move(r)) {}

  MapSpec map;
  RateFunction rate;
  CountKind kind = CountKind::Recurrence;
  TargetSpec target;                      // used when kind == Target and target_mode == Fixed
  TargetMode target_mode = TargetMode::Fixed;
  std::vector<std::uint64_t> checkpoints;  // strictly increasing
  std::size_t samples = 0;
  std::uint64_t master_seed = 0;
  PredicateOptions predicate;
  std::size_t budget = 0;  // 0 selects precision_budget()
  unsigned threads = 0;    // 0 selects default_threads()
  bool keep_indicators = false;
  Envelope envelope;
  PointFactory point_factory;  // test hook; default samples point_seed(master_seed, i)
};

struct CheckpointStats {
  std::uint64_t n = 0;
  std::size_t samples = 0;
  double main_term = 0;  // mean over points when targets are sampled
  std::optional<Rational> main_term_exact;
  double mean = 0;
  double variance = 0;
  double mean_abs_error = 0;
  double median_abs_error = 0;
  double q90_abs_error = 0;
  double max_abs_error = 0;
  double median_relative_error = 0;
  double envelope = 0;
  double envelope_fraction = 0;
  std::uint64_t unresolved = 0;
};

struct ExperimentResult {
  std::vector<std::uint64_t> checkpoints;
  std::vector<CountRecord> records;  // in sample order
  std::vector<CheckpointStats> stats;
  double envelope_fraction = 0;  // over all (point, checkpoint) pairs
  std::uint64_t unresolved = 0;
  std::vector<std::string> diagnostics;
};

inline void validate(const ExperimentConfig& c) {
  std::vector<std::string> problems;
  if (c.samples < 2) problems.push_back("samples: S must be >= 2");
  if (c.rate.dimension() != c.map.dimension()) problems.push_back("rate: dimension does not match map");
  try {
    validate_checkpoints(c.checkpoints);
  } catch (const Error& e) {
    problems.push_back(std::string("checkpoints: ") + e.what());
  }
  if (c.kind == CountKind::Target && c.target_mode == TargetMode::Fixed) {
    try {
      c.target.validate(c.map.dimension());
    } catch (const Error& e) {
      problems.push_back(std::string("target: ") + e.what());
    }
  }
  if (!problems.empty()) throw ValidationError(problems);
  const std::size_t budget = c.budget ? c.budget : precision_budget(c.map, c.rate, c.checkpoints.back());
  const OrbitProbe probe(c.map, c.predicate);
  const std::size_t need = c.checkpoints.back() + lookahead(probe);
  if (need > budget) {
    throw BudgetExceeded("n_max=" + std::to_string(c.checkpoints.back()) + " needs " + std::to_string(need) +
                         " symbols per axis, precision budget is " + std::to_string(budget));
  }
}

// Dyadic x0 drawn from the point's own seed, for the sampled-target mode.
inline TargetSpec sampled_target(std::size_t dimension, std::uint64_t seed) {
  std::mt19937_64 gen(splitmix64_mix(seed ^ 0x5851F42D4C957F2DULL));
  TargetSpec t;
  for (std::size_t i = 0; i < dimension; ++i) {
    t.center.push_back(from_u64(gen() >> 11) / Rational(Integer(1) << 53));
  }
  return t;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  validate(c);
  const std::size_t budget = c.budget ? c.budget : precision_budget(c.map, c.rate, c.checkpoints.back());
  const OrbitProbe probe(c.map, c.predicate);
  const std::uint64_t n_max = c.checkpoints.back();

  std::optional<RateSchedule> shared;
  if (c.kind == CountKind::Recurrence) {
    shared.emplace(probe, c.rate, n_max);
  } else if (c.target_mode == TargetMode::Fixed) {
    shared.emplace(probe, c.rate, n_max, &c.target);
  }

  ExperimentResult out;
  out.checkpoints = c.checkpoints;
  out.records.resize(c.samples);
  const unsigned threads = c.threads ? c.threads : default_threads();
  parallel_for(c.samples, threads, [&](std::size_t i) {
    const std::uint64_t seed = point_seed(c.master_seed, i);
    GenericPoint p = c.point_factory ? c.point_factory(i, seed) : GenericPoint::sample(c.map, seed, budget);
    CountOptions options{c.keep_indicators};
    if (shared) {
      out.records[i] = count_with_schedule(probe, *shared, p, c.checkpoints, options);
    } else {
      const TargetSpec t = sampled_target(c.map.dimension(), seed);
      const RateSchedule own(probe, c.rate, n_max, &t);
      out.records[i] = count_with_schedule(probe, own, p, c.checkpoints, options);
    }
  });

  std::size_t inside = 0, pairs = 0;
  for (std::size_t j = 0; j < c.checkpoints.size(); ++j) {
    CheckpointStats s;
    s.n = c.checkpoints[j];
    s.samples = c.samples;
    std::vector<double> counts, main, abs_err, rel_err;
    for (const auto& r : out.records) {
      const double rv = static_cast<double>(r.counts[j]);
      counts.push_back(rv);
      main.push_back(r.main_term[j]);
      abs_err.push_back(std::abs(rv - r.main_term[j]));
      rel_err.push_back(r.main_term[j] > 0 ? std::abs(rv - r.main_term[j]) / r.main_term[j] : 0.0);
      s.unresolved += r.unresolved[j];
      const bool ok = abs_err.back() <= c.envelope(r.main_term[j]);
      if (ok) ++inside;
      ++pairs;
    }
    s.main_term = stats::mean(main);
    if (shared) s.main_term_exact = shared->main_term_exact(s.n);
    s.mean = stats::mean(counts);
    s.variance = stats::variance(counts);
    s.mean_abs_error = stats::mean(abs_err);
    s.median_abs_error = stats::median(abs_err);
    s.q90_abs_error = stats::quantile(abs_err, 0.9);
    s.max_abs_error = *std::max_element(abs_err.begin(), abs_err.end());
    s.median_relative_error = stats::median(rel_err);
    s.envelope = c.envelope(s.main_term);
    std::size_t in_here = 0;
    for (std::size_t k = 0; k < abs_err.size(); ++k) {
      if (abs_err[k] <= c.envelope(main[k])) ++in_here;
    }
    s.envelope_fraction = static_cast<double>(in_here) / static_cast<double>(abs_err.size());
    out.stats.push_back(std::move(s));
  }
  out.envelope_fraction = pairs ? static_cast<double>(inside) / static_cast<double>(pairs) : 0;
  for (const auto& r : out.records) {
    out.unresolved += r.unresolved.empty() ? 0 : r.unresolved.back();
    for (const auto& d : r.diagnostics) {
      if (out.diagnostics.size() < 32) out.diagnostics.push_back(d);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Block variance statistic

// c_n for n = 1..b: exact mu(A_n) for n <= oracle_depth (rational rates
// only), 2^d psi(n) beyond.
struct CSequence {
  std::vector<double> values;                 // values[n-1]
  std::vector<std::optional<Rational>> exact;  // set where the oracle supplied the value
  std::uint64_t proxy_from = 0;               // first n taken from the proxy, 0 if none
};

inline CSequence c_sequence(const MapSpec& map, const RateFunction& rate, std::uint64_t b, unsigned oracle_depth,
                            std::uint64_t cap = kDefaultCylinderCap) {
  CSequence s;
  const double scale = std::ldexp(1.0, static_cast<int>(map.dimension()));
  for (std::uint64_t n = 1; n <= b; ++n) {
    std::optional<Rational> e;
    if (n <= oracle_depth) {
      bool rational = true;
      for (std::size_t i = 0; i < rate.dimension(); ++i) rational = rational && rate.axis(i).exact(n).has_value();
      if (rational) e = recurrence_measure(map, rate, static_cast<unsigned>(n), cap);
    }
    if (e) {
      s.values.push_back(to_double(*e));
    } else {
      if (s.proxy_from == 0) s.proxy_from = n;
      s.values.push_back(scale * rate.approx_product(n));
    }
    s.exact.push_back(std::move(e));
  }
  return s;
}

struct VarianceResult {
  std::uint64_t a = 0, b = 0;
  std::size_t samples = 0;
  double statistic = 0;       // mean over points of (sum_{n=a}^b (f_n - c_n))^2
  double standard_error = 0;  // of that mean
  double phi_sum = 0;         // sum_{n=a}^b phi_n
  double ratio = 0;           // statistic / phi_sum
};

// indicators[k][n-1] is f_n at point k; c and phi are indexed by n-1.
inline VarianceResult variance_statistic(const std::vector<std::vector<bool>>& indicators, std::uint64_t a,
                                         std::uint64_t b, const std::vector<double>& c,
                                         const std::vector<double>& phi) {
  if (a == 0 || a >= b) throw InvalidArgument("variance statistic needs 1 <= a < b");
  if (c.size() < b || phi.size() < b) throw InsufficientData("c_n and phi_n must cover n <= b");
  if (indicators.empty()) throw InsufficientData("no points");
  VarianceResult r;
  r.a = a;
  r.b = b;
  r.samples = indicators.size();
  std::vector<double> squares;
  for (const auto& f : indicators) {
    if (f.size() < b) throw InsufficientData("per-n hit indicators missing; enable keep_indicators");
    double s = 0;
    for (std::uint64_t n = a; n <= b; ++n) s += (f[n - 1] ? 1.0 : 0.0) - c[n - 1];
    squares.push_back(s * s);
  }
  r.statistic = stats::mean(squares);
  r.standard_error = std::sqrt(stats::variance(squares) / static_cast<double>(squares.size()));
  for (std::uint64_t n = a; n <= b; ++n) r.phi_sum += phi[n - 1];
  r.ratio = r.phi_sum > 0 ? r.statistic / r.phi_sum : 0;
  return r;
}

inline std::vector<std::vector<bool>> indicators_of(const ExperimentResult& e) {
  std::vector<std::vector<bool>> out;
  for (const auto& r : e.records) {
    if (r.hits.empty()) throw InsufficientData("per-n hit indicators were not retained");
    out.push_back(r.hits);
  }
  return out;
}

// Independent coins with P(f_n = 1) = c_n, for checking the statistic.
inline std::vector<std::vector<bool>> synthetic_indicators(const std::vector<double>& c, std::size_t samples,
                                                           std::uint64_t seed) {
  std::vector<std::vector<bool>> out(samples, std::vector<bool>(c.size()));
  for (std::size_t k = 0; k < samples; ++k) {
    std::mt19937_64 gen(point_seed(seed, k));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t n = 0; n < c.size(); ++n) out[k][n] = u(gen) < c[n];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Error exponent

struct FitResult {
  double slope = 0;
  double intercept = 0;
  double band_lo = 0;
  double band_hi = 0;
  std::size_t points = 0;  // checkpoints entering the fit
  bool zero_residual = false;
};

inline constexpr double kFitMinMainTerm = 10;
inline constexpr std::size_t kFitMinCheckpoints = 8;
inline constexpr std::size_t kBootstrapRounds = 1000;

namespace detail {

// Ordinary least squares y = slope x + intercept; nullopt when degenerate.
inline std::optional<std::pair<double, double>> ols(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return std::nullopt;
  const double mx = stats::mean(x), my = stats::mean(y);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) return std::nullopt;
  const double slope = sxy / sxx;
  return std::make_pair(slope, my - slope * mx);
}

// Slope of log(median_k residual[k][j]) on log psi[j] over usable j.
inline std::optional<std::pair<double, double>> fit_medians(const std::vector<double>& psi,
                                                           const std::vector<std::vector<double>>& residuals,
                                                           const std::vector<std::size_t>& rows,
                                                           const std::vector<std::size_t>& cols,
                                                           std::size_t* used = nullptr) {
  std::vector<double> x, y;
  std::vector<double> column(rows.size());
  for (auto j : cols) {
    for (std::size_t k = 0; k < rows.size(); ++k) column[k] = residuals[rows[k]][j];
    const double m = stats::median(column);
    if (m > 0) {
      x.push_back(std::log(psi[j]));
      y.push_back(std::log(m));
    }
  }
  if (used) *used = x.size();
  return ols(x, y);
}

}  // namespace detail

// residuals[k][j] = |R - Psi| for point k at checkpoint j; psi[j] the main
// term. The band is the 2.5%..97.5% percentile range of the slope over
// bootstrap resamples of the points.
inline FitResult fit_error_exponent(const std::vector<double>& psi, const std::vector<std::vector<double>>& residuals,
                                    std::uint64_t bootstrap_seed = 0, std::size_t rounds = kBootstrapRounds) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < psi.size(); ++j) {
    if (psi[j] >= kFitMinMainTerm) cols.push_back(j);
  }
  if (cols.size() < kFitMinCheckpoints) {
    throw InsufficientData("exponent fit needs >= " + std::to_string(kFitMinCheckpoints) +
                           " checkpoints with Psi >= 10, got " + std::to_string(cols.size()));
  }
  if (residuals.empty()) throw InsufficientData("no points");
  for (const auto& r : residuals) {
    if (r.size() != psi.size()) throw InvalidArgument("residual rows must match the checkpoints");
  }
  std::vector<std::size_t> all(residuals.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;

  FitResult f;
  auto point = detail::fit_medians(psi, residuals, all, cols, &f.points);
  if (!point) {
    f.zero_residual = true;
    return f;
  }
  f.slope = point->first;
  f.intercept = point->second;

  std::mt19937_64 gen(splitmix64_mix(bootstrap_seed));
  std::uniform_int_distribution<std::size_t> pick(0, residuals.size() - 1);
  std::vector<double> slopes;
  std::vector<std::size_t> rows(residuals.size());
  for (std::size_t b = 0; b < rounds; ++b) {
    for (auto& r : rows) r = pick(gen);
    if (auto s = detail::fit_medians(psi, residuals, rows, cols)) slopes.push_back(s->first);
  }
  if (slopes.empty()) {
    f.band_lo = f.band_hi = f.slope;
  } else {
    f.band_lo = std::min(f.slope, stats::quantile(slopes, 0.025));
    f.band_hi = std::max(f.slope, stats::quantile(slopes, 0.975));
  }
  return f;
}

inline FitResult fit_error_exponent(const ExperimentResult& e, std::uint64_t bootstrap_seed = 0) {
  std::vector<double> psi;
  for (const auto& s : e.stats) psi.push_back(s.main_term);
  std::vector<std::vector<double>> residuals;
  for (const auto& r : e.records) {
    std::vector<double> row;
    for (std::size_t j = 0; j < r.counts.size(); ++j) {
      row.push_back(std::abs(static_cast<double>(r.counts[j]) - r.main_term[j]));
    }
    residuals.push_back(std::move(row));
  }
  return fit_error_exponent(psi, residuals, bootstrap_seed);
}

// ---------------------------------------------------------------------------
// Convergence-case dichotomy

struct DichotomyResult {
  double main_term = 0;        // Psi(N_max) (or Phi for targets)
  std::uint64_t max_final = 0;  // max over points of the final count
  std::uint64_t max_last_hit = 0;
  std::uint64_t threshold = 0;
  bool passed = false;
  std::vector<std::uint64_t> finals;
  std::vector<CountRecord> records;
};

inline constexpr double kDichotomyBound = 10;
inline constexpr std::uint64_t kDichotomyThreshold = 20;

inline DichotomyResult dichotomy_check(const ExperimentConfig& c, double bound = kDichotomyBound,
                                       std::uint64_t threshold = kDichotomyThreshold) {
  validate_checkpoints(c.checkpoints);
  const SumValue total = psi_sum(c.rate, c.checkpoints.back(), c.map.dimension());
  if (total.value > bound) {
    throw PreconditionError("dichotomy check needs a convergent rate: Psi(N_max) = " + format_double(total.value) +
                            " exceeds " + format_double(bound));
  }
  const ExperimentResult e = run_experiment(c);
  DichotomyResult d;
  d.main_term = total.value;
  d.threshold = threshold;
  for (const auto& r : e.records) {
    d.finals.push_back(r.counts.back());
    d.max_final = std::max(d.max_final, r.counts.back());
    d.max_last_hit = std::max(d.max_last_hit, r.last_hit);
  }
  d.passed = d.max_final <= threshold;
  d.records = e.records;
  return d;
}

}  // namespace shrinkrec
