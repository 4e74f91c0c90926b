#include <gtest/gtest.h>

#include "test_support.hpp"

namespace shrinkrec {
namespace {

using testing::q;

ExperimentConfig small_config(const char* map, RateFunction rate, std::uint64_t n_max, std::size_t samples) {
  ExperimentConfig c(builtin_map(map), std::move(rate));
  c.checkpoints = geometric_checkpoints(n_max);
  c.samples = samples;
  c.master_seed = 77;
  return c;
}

TEST(Stats, QuantilesAndVariance) {
  EXPECT_DOUBLE_EQ(stats::median({3, 1, 2}), 2);
  EXPECT_DOUBLE_EQ(stats::median({4, 1, 2, 3}), 2.5);
  EXPECT_DOUBLE_EQ(stats::quantile({0, 10}, 0.9), 9);
  EXPECT_DOUBLE_EQ(stats::variance({1, 2, 3, 4}), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(stats::variance({7}), 0);
}

TEST(Envelope, FormulaAndClamp) {
  const Envelope e;
  EXPECT_DOUBLE_EQ(e(1), 50);
  EXPECT_DOUBLE_EQ(e(0.5), 50);
  EXPECT_NEAR(e(1999), 4 * std::sqrt(1999.0) * std::pow(std::log(1999.0), 1.6) + 50, 1e-9);
}

TEST(ParallelFor, VisitsEveryIndexOnceAndRethrows) {
  std::vector<int> seen(1000, 0);
  parallel_for(seen.size(), 4, [&](std::size_t i) { seen[i] += 1; });
  for (int v : seen) EXPECT_EQ(v, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw InvalidArgument("boom");
               }),
               InvalidArgument);
}

TEST(RunExperiment, ForcedPointsReproduceCountRecurrence) {
  const MapSpec m = builtin_map("doubling");
  ExperimentConfig c(m, testing::constant_rate("1/10"));
  c.checkpoints = {1, 2, 3, 4};
  c.samples = 3;
  const std::vector<std::vector<std::uint8_t>> cycles = {{0, 0, 1, 1}, {0, 1}, {1, 0, 0}};
  c.point_factory = [&](std::size_t i, std::uint64_t) { return GenericPoint::forced(m, {}, cycles[i]); };
  const ExperimentResult e = run_experiment(c);
  for (std::size_t i = 0; i < 3; ++i) {
    GenericPoint p = GenericPoint::forced(m, {}, cycles[i]);
    EXPECT_EQ(e.records[i].counts, count_recurrence(m, c.rate, p, c.checkpoints).counts) << i;
  }
  EXPECT_EQ(e.records[0].counts.back(), 1u);
  EXPECT_EQ(e.records[1].counts.back(), 2u);
  EXPECT_EQ(e.records[2].counts.back(), 1u);
}

TEST(RunExperiment, ZeroRate) {
  const ExperimentResult e = run_experiment(small_config("doubling", testing::constant_rate("0"), 1000, 5));
  for (const auto& s : e.stats) {
    EXPECT_EQ(s.mean, 0);
    EXPECT_EQ(s.variance, 0);
    EXPECT_EQ(s.max_abs_error, 0);
  }
}

TEST(RunExperiment, Validation) {
  EXPECT_THROW(run_experiment(small_config("doubling", testing::constant_rate("1/4"), 100, 1)), ValidationError);
  ExperimentConfig tiny = small_config("doubling", testing::constant_rate("1/4"), 10000, 2);
  tiny.budget = 500;
  EXPECT_THROW(run_experiment(tiny), BudgetExceeded);
  ExperimentConfig wrong = small_config("doubling", testing::constant_rate("1/4", 2), 100, 2);
  EXPECT_THROW(run_experiment(wrong), ValidationError);
}

// Same config, any thread count: identical records and statistics.
TEST(RunExperiment, DeterministicAcrossThreadCounts) {
  ExperimentConfig c = small_config("tent", testing::power_rate("1/2", "1/2"), 20000, 12);
  c.threads = 1;
  const ExperimentResult a = run_experiment(c);
  c.threads = 4;
  const ExperimentResult b = run_experiment(c);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].seed, b.records[i].seed);
    EXPECT_EQ(a.records[i].counts, b.records[i].counts);
  }
  for (std::size_t j = 0; j < a.stats.size(); ++j) {
    EXPECT_EQ(a.stats[j].mean, b.stats[j].mean);
    EXPECT_EQ(a.stats[j].median_relative_error, b.stats[j].median_relative_error);
  }
}

TEST(RunExperiment, SampleSizeConstantAcrossCheckpoints) {
  const ExperimentResult e = run_experiment(small_config("doubling", testing::power_rate("1/2", "1/2"), 3000, 7));
  for (const auto& s : e.stats) EXPECT_EQ(s.samples, 7u);
  EXPECT_EQ(e.stats.size(), e.checkpoints.size());
}

// With psi constant and x0 sampled like x, mean W and mean R agree.
TEST(RunExperiment, RecurrenceTargetParity) {
  ExperimentConfig rec = small_config("doubling", testing::constant_rate("1/100"), 2000, 200);
  ExperimentConfig tgt = rec;
  tgt.kind = CountKind::Target;
  tgt.target_mode = TargetMode::Sampled;
  tgt.master_seed = 78;
  const ExperimentResult a = run_experiment(rec), b = run_experiment(tgt);
  for (std::size_t j = 0; j < a.stats.size(); ++j) {
    const double se = std::sqrt(a.stats[j].variance / 200 + b.stats[j].variance / 200);
    EXPECT_LE(std::abs(a.stats[j].mean - b.stats[j].mean), 4 * se + 1e-12) << "N=" << a.stats[j].n;
  }
}

TEST(VarianceStatistic, CenteredIndicatorsGiveZero) {
  const MapSpec m = builtin_map("doubling");
  ExperimentConfig c(m, testing::constant_rate("1/10"));
  c.checkpoints = {50};
  c.samples = 2;
  c.keep_indicators = true;
  c.point_factory = [&](std::size_t, std::uint64_t) { return GenericPoint::forced(m, std::vector<std::uint8_t>{}, {0}); };
  const ExperimentResult e = run_experiment(c);
  const std::vector<double> ones(50, 1.0);
  const VarianceResult v = variance_statistic(indicators_of(e), 1, 50, ones, ones);
  EXPECT_EQ(v.statistic, 0);
  EXPECT_EQ(v.phi_sum, 50);
}

TEST(VarianceStatistic, SyntheticCoinsMatchBinomialVariance) {
  std::vector<double> c;
  for (int n = 1; n <= 300; ++n) c.push_back(1.0 / n);
  const auto f = synthetic_indicators(c, 4000, 5);
  const VarianceResult v = variance_statistic(f, 1, 300, c, c);
  double expected = 0;
  for (double x : c) expected += x * (1 - x);
  EXPECT_NEAR(v.statistic, expected, 4 * v.standard_error);
}

TEST(VarianceStatistic, Guards) {
  const std::vector<double> c(10, 0.5);
  EXPECT_THROW(variance_statistic({std::vector<bool>(10)}, 5, 5, c, c), InvalidArgument);
  EXPECT_THROW(variance_statistic({std::vector<bool>(4)}, 1, 8, c, c), InsufficientData);
  const ExperimentResult e = run_experiment(small_config("doubling", testing::constant_rate("1/4"), 10, 2));
  EXPECT_THROW(indicators_of(e), InsufficientData);
}

// Cross-covariance of two adjacent blocks is small relative to the total.
TEST(VarianceStatistic, BlocksAreNearlyUncorrelated) {
  ExperimentConfig c = small_config("doubling", testing::harmonic_rate(1, 2, 500), 500, 500);
  c.keep_indicators = true;
  const ExperimentResult e = run_experiment(c);
  const auto f = indicators_of(e);
  const CSequence seq = c_sequence(c.map, c.rate, 500, 16);
  const std::uint64_t a = 50, b = 275, last = 500;
  const VarianceResult whole = variance_statistic(f, a, last, seq.values, seq.values);
  const VarianceResult left = variance_statistic(f, a, b, seq.values, seq.values);
  const VarianceResult right = variance_statistic(f, b + 1, last, seq.values, seq.values);
  double cross = 0;
  for (const auto& row : f) {
    double x = 0, y = 0;
    for (std::uint64_t n = a; n <= b; ++n) x += row[n - 1] - seq.values[n - 1];
    for (std::uint64_t n = b + 1; n <= last; ++n) y += row[n - 1] - seq.values[n - 1];
    cross += x * y;
  }
  cross /= static_cast<double>(f.size());
  EXPECT_NEAR(left.statistic + right.statistic + 2 * cross, whole.statistic, 1e-9 * whole.statistic);
  EXPECT_LE(std::abs(2 * cross), 0.1 * whole.statistic);
}

TEST(CSequence, OracleThenProxy) {
  const MapSpec m = builtin_map("doubling");
  const RateFunction r = testing::harmonic_rate(1, 2, 40);
  const CSequence s = c_sequence(m, r, 30, 10);
  EXPECT_EQ(s.proxy_from, 11u);
  EXPECT_EQ(*s.exact[0], q("1"));
  EXPECT_DOUBLE_EQ(s.values[19], 2.0 / 40.0);
  EXPECT_FALSE(s.exact[19]);
}

TEST(FitErrorExponent, ExactPowerLaw) {
  std::vector<double> psi;
  for (int j = 0; j < 12; ++j) psi.push_back(10.0 * std::pow(2.0, j));
  std::vector<std::vector<double>> residuals(20);
  for (auto& row : residuals) {
    for (double p : psi) row.push_back(std::sqrt(p));
  }
  const FitResult f = fit_error_exponent(psi, residuals, 3);
  EXPECT_NEAR(f.slope, 0.5, 1e-6);
  EXPECT_NEAR(f.band_lo, 0.5, 1e-6);
  EXPECT_NEAR(f.band_hi, 0.5, 1e-6);
  EXPECT_FALSE(f.zero_residual);
  EXPECT_EQ(f.points, 12u);
}

TEST(FitErrorExponent, ZeroResidualIsFlagged) {
  std::vector<double> psi;
  for (int j = 0; j < 10; ++j) psi.push_back(20.0 + j);
  const std::vector<std::vector<double>> residuals(5, std::vector<double>(10, 0.0));
  EXPECT_TRUE(fit_error_exponent(psi, residuals).zero_residual);
}

TEST(FitErrorExponent, NeedsEnoughLargeCheckpoints) {
  const std::vector<double> psi = {1, 2, 5, 11, 12, 13};
  const std::vector<std::vector<double>> residuals(3, std::vector<double>(6, 1.0));
  EXPECT_THROW(fit_error_exponent(psi, residuals), InsufficientData);
}

TEST(Dichotomy, ZeroRateAndDivergentGuard) {
  const DichotomyResult d = dichotomy_check(small_config("doubling", testing::constant_rate("0"), 10000, 4));
  EXPECT_EQ(d.max_final, 0u);
  EXPECT_TRUE(d.passed);
  EXPECT_THROW(dichotomy_check(small_config("doubling", testing::power_rate("1/2", "1/2"), 10000, 4)),
               PreconditionError);
}

TEST(Dichotomy, ConvergentRateGivesSmallCounts) {
  const DichotomyResult d = dichotomy_check(small_config("doubling", testing::power_rate("1/2", "2"), 100000, 20));
  EXPECT_LE(d.max_final, 20u);
  EXPECT_EQ(d.finals.size(), 20u);
  EXPECT_LE(d.max_last_hit, 100000u);
}

TEST(PrecisionBudget, Formula) {
  // psi_min = 1/(2 * 1000) for psi(n) = 1/(2n): ceil(log2 2000) = 11.
  EXPECT_EQ(precision_budget(builtin_map("doubling"), testing::power_rate("1/2", "1"), 1000), 1000u + 11 + 256);
}

}  // namespace
}  // namespace shrinkrec
