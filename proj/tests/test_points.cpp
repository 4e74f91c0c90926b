#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace shrinkrec {
namespace {

using testing::q;

// Reference SplitMix64 stream: state advances by the golden gamma, output is
// the standard finalizer.
class ReferenceSplitMix64 {
 public:
  explicit ReferenceSplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

TEST(Seeding, PointSeedsAreTheSplitMixStream) {
  for (std::uint64_t master : {0ULL, 1ULL, 20240601ULL, 0xFFFFFFFFFFFFFFFFULL}) {
    ReferenceSplitMix64 ref(master);
    for (std::uint64_t i = 0; i < 16; ++i) EXPECT_EQ(point_seed(master, i), ref.next());
  }
  // Published first output of SplitMix64 seeded with 0.
  EXPECT_EQ(point_seed(0, 0), 0xE220A8397B1DCDAFULL);
}

TEST(Seeding, DoublingSymbolsAreLowBitsOfMt19937_64) {
  const MapSpec m = builtin_map("doubling");
  const std::uint64_t seed = point_seed(7, 3);
  GenericPoint p = GenericPoint::sample(m, seed);
  std::mt19937_64 gen(axis_seed(seed, 0));
  for (std::size_t k = 0; k < 1000; ++k) EXPECT_EQ(p.symbol(0, k), gen() % 2) << k;
}

TEST(SamplePoint, DeterministicAndSeedSensitive) {
  const MapSpec m = builtin_map("luroth-trunc-5");
  GenericPoint a = GenericPoint::sample(m, 42), b = GenericPoint::sample(m, 42);
  for (std::size_t depth : {0u, 1u, 7u, 64u}) {
    EXPECT_EQ(enclose(a, depth).axes[0].lo, enclose(b, depth).axes[0].lo);
    EXPECT_EQ(enclose(a, depth).axes[0].hi, enclose(b, depth).axes[0].hi);
  }
  std::size_t distinct = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    GenericPoint x = GenericPoint::sample(m, point_seed(1, s)), y = GenericPoint::sample(m, point_seed(2, s));
    if (enclose(x, 64).axes[0].lo != enclose(y, 64).axes[0].lo) ++distinct;
  }
  EXPECT_EQ(distinct, 100u);
}

// Extending the stream never changes realized symbols.
TEST(SamplePoint, ExtensionIsStable) {
  GenericPoint p = GenericPoint::sample(builtin_map("tent"), 9);
  std::vector<std::uint8_t> first(p.symbols(0, 0, 100).begin(), p.symbols(0, 0, 100).end());
  p.realize(20000);
  for (std::size_t k = 0; k < first.size(); ++k) EXPECT_EQ(p.symbol(0, k), first[k]);
}

// Symbol s appears with frequency equal to the branch length.
TEST(SamplePoint, SymbolFrequenciesMatchBranchLengths) {
  const MapSpec m = builtin_map("luroth-trunc-4");
  GenericPoint p = GenericPoint::sample(m, 123, 1 << 20);
  const std::size_t total = 200000;
  std::vector<double> counts(4, 0);
  for (std::size_t k = 0; k < total; ++k) counts[p.symbol(0, k)] += 1;
  for (std::size_t s = 0; s < 4; ++s) {
    const double prob = to_double(m.axis(0).branch(s).length());
    const double sigma = std::sqrt(total * prob * (1 - prob));
    EXPECT_NEAR(counts[s], total * prob, 5 * sigma) << "symbol " << s;
  }
}

TEST(Enclose, Examples) {
  const MapSpec m = builtin_map("doubling");
  GenericPoint p = GenericPoint::forced(m, {0, 1}, {0});
  EXPECT_EQ(enclose(p, 2).axes[0].lo, q("1/4"));
  EXPECT_EQ(enclose(p, 2).axes[0].hi, q("1/2"));
  EXPECT_EQ(enclose(p, 0).axes[0].lo, q("0"));
  EXPECT_EQ(enclose(p, 0).axes[0].hi, q("1"));
}

TEST(Enclose, NestedAndShrinking) {
  for (const MapSpec& m : {builtin_map("doubling"), builtin_map("tent"), testing::skew_map()}) {
    GenericPoint p = GenericPoint::sample(m, 77);
    RationalInterval prev{0, 1};
    for (std::size_t k = 1; k <= 40; ++k) {
      const RationalInterval cur = enclose(p, k).axes[0];
      EXPECT_TRUE(prev.lo <= cur.lo && cur.hi <= prev.hi);
      EXPECT_LE(cur.width(), prev.width() / m.lambda());
      prev = cur;
    }
  }
}

TEST(Enclose, ForcedAlternatingConvergesToOneThird) {
  GenericPoint p = GenericPoint::forced(builtin_map("doubling"), {}, {0, 1});
  for (std::size_t k = 2; k <= 60; k += 2) {
    const RationalInterval e = enclose(p, k).axes[0];
    EXPECT_TRUE(e.lo <= q("1/3") && q("1/3") <= e.hi);
    EXPECT_EQ(e.width(), pow(q("1/2"), k));
  }
}

TEST(Enclose, BudgetIsEnforced) {
  GenericPoint p = GenericPoint::sample(builtin_map("doubling"), 1, 100);
  EXPECT_THROW(enclose(p, 101), BudgetExceeded);
  EXPECT_NO_THROW(enclose(p, 100));
}

TEST(DistancePredicate, DoublingOneFifthExamples) {
  const MapSpec m = builtin_map("doubling");
  GenericPoint p = GenericPoint::forced(m, {}, {0, 0, 1, 1});  // x = 1/5
  EXPECT_EQ(enclose(p, 4).axes[0].lo, q("3/16"));
  EXPECT_EQ(distance_predicate(m, p, 4, {q("1/10")}), Outcome::Hit);
  EXPECT_EQ(distance_predicate(m, p, 1, {q("1/10")}), Outcome::Miss);
  EXPECT_EQ(distance_predicate(m, p, 4, {q("0")}), Outcome::Miss);
  EXPECT_EQ(distance_predicate(m, p, 3, {q("0")}), Outcome::Miss);
}

// Distance exactly 1/5 at n = 1. A radius equal to the distance cannot be
// decided from finite enclosures, so it is the one Unresolved case.
TEST(DistancePredicate, StrictInequalityAtTheBoundary) {
  const MapSpec m = builtin_map("doubling");
  GenericPoint p = GenericPoint::forced(m, {}, {0, 0, 1, 1});
  EXPECT_EQ(distance_predicate(m, p, 1, {q("1/5")}), Outcome::Unresolved);
  EXPECT_EQ(distance_predicate(m, p, 1, {q("201/1000")}), Outcome::Hit);
  EXPECT_EQ(distance_predicate(m, p, 1, {q("199/1000")}), Outcome::Miss);
}

// Periodic streams return exactly: every multiple of the period hits.
TEST(DistancePredicate, ShiftCorrectnessForPeriodicStreams) {
  struct Case {
    MapSpec map;
    std::vector<std::vector<std::uint8_t>> cycle;
    std::size_t period;
  };
  const std::vector<Case> cases = {
      {builtin_map("doubling"), {{0, 0, 1, 1}}, 4},
      {builtin_map("tent"), {{0, 1}}, 2},
      {builtin_map("base-3"), {{2, 0, 1}}, 3},
      {testing::skew_map(), {{1, 2, 0}}, 3},
      {builtin_map("luroth-trunc-4"), {{3, 1}}, 2},
      {builtin_map("toral-diag(2,3)"), {{0, 1}, {2, 1, 0}}, 6},
  };
  for (const auto& c : cases) {
    const std::vector<std::vector<std::uint8_t>> prefix(c.map.dimension());
    GenericPoint p = GenericPoint::forced(c.map, prefix, c.cycle);
    for (const char* r : {"1/2", "1/1000", "1/1000000000000000000000000000000"}) {
      const std::vector<Rational> radii(c.map.dimension(), q(r));
      for (std::uint64_t n = c.period; n <= 5 * c.period; n += c.period) {
        EXPECT_EQ(distance_predicate(c.map, p, n, radii), Outcome::Hit) << c.map.name() << " n=" << n << " r=" << r;
      }
    }
  }
}

// Exact check on a deep cylinder midpoint. For doubling T^n(mid) is read off
// the binary digits directly.
TEST(DistancePredicate, AgreesWithExactMidpointOracle) {
  const MapSpec m = builtin_map("doubling");
  std::mt19937_64 gen(2024);
  std::size_t compared = 0;
  const Rational margin = pow(q("1/2"), 58);
  for (std::uint64_t s = 0; s < 50; ++s) {
    GenericPoint p = GenericPoint::sample(m, point_seed(99, s));
    for (std::uint64_t n = 1; n <= 30; ++n) {
      const std::size_t depth = n + 60;
      Rational x = 0, tx = 0;
      for (std::size_t k = 0; k < depth; ++k) x += Rational(p.symbol(0, k)) * pow(q("1/2"), k + 1);
      x += pow(q("1/2"), depth + 1);
      tx = x * Rational(Integer(1) << static_cast<unsigned>(n));
      tx -= Rational(shrinkrec::floor(tx));
      const Rational dist = rational_abs(tx - x);
      const Rational radius = testing::random_rational(gen, 1 << 20) / 2;
      if (rational_abs(dist - radius) <= margin) continue;
      const Outcome expected = dist < radius ? Outcome::Hit : Outcome::Miss;
      EXPECT_EQ(distance_predicate(m, p, n, {radius}), expected) << "seed " << s << " n " << n;
      ++compared;
    }
  }
  EXPECT_GT(compared, 1400u);
}

// Enlarging radii never loses a hit.
TEST(DistancePredicate, MonotoneInRadius) {
  for (const MapSpec& m : {builtin_map("doubling"), builtin_map("tent"), testing::skew_map()}) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      GenericPoint p = GenericPoint::sample(m, point_seed(5, s));
      for (std::uint64_t n = 1; n <= 40; ++n) {
        const Outcome small = distance_predicate(m, p, n, {q("1/16")});
        const Outcome large = distance_predicate(m, p, n, {q("1/8")});
        if (small == Outcome::Hit) {
          EXPECT_EQ(large, Outcome::Hit);
        }
      }
    }
  }
}

// The digit-window path and the generic fixed-point path agree.
TEST(DistancePredicate, DigitPathMatchesGenericPath) {
  const MapSpec m = builtin_map("base-3");
  const RateFunction rate = testing::power_rate("1/2", "1/2");
  const PredicateOptions generic{Metric::Interval, kDefaultRefineCap, true};
  for (std::uint64_t s = 0; s < 20; ++s) {
    GenericPoint p = GenericPoint::sample(m, point_seed(8, s));
    for (std::uint64_t n = 1; n <= 300; ++n) {
      EXPECT_EQ(distance_predicate(m, p, n, rate), distance_predicate(m, p, n, rate, generic));
    }
  }
}

TEST(DistancePredicate, TorusMetricWrapsAround) {
  const MapSpec m = builtin_map("doubling");
  // x = 15/16 and T^5 x = 0: 15/16 apart on the line, 1/16 on the circle.
  GenericPoint p = GenericPoint::forced(m, {1, 1, 1, 1, 0}, {0});
  const PredicateOptions torus{Metric::Torus, kDefaultRefineCap, false};
  EXPECT_EQ(distance_predicate(m, p, 5, {q("1/10")}), Outcome::Miss);
  EXPECT_EQ(distance_predicate(m, p, 5, {q("1/10")}, torus), Outcome::Hit);
  EXPECT_EQ(distance_predicate(m, p, 5, {q("1/20")}, torus), Outcome::Miss);
  // T x = 7/8: 1/16 apart under both metrics.
  EXPECT_EQ(distance_predicate(m, p, 1, {q("1/10")}), Outcome::Hit);
  EXPECT_EQ(distance_predicate(m, p, 1, {q("1/10")}, torus), Outcome::Hit);
}

TEST(TargetPredicate, DoublingOneThird) {
  const MapSpec m = builtin_map("doubling");
  GenericPoint p = GenericPoint::forced(m, {}, {0, 1});  // x = 1/3
  const RateFunction r = testing::constant_rate("2/5");
  EXPECT_EQ(target_predicate(m, p, 1, r, {q("0")}), Outcome::Miss);
  EXPECT_EQ(target_predicate(m, p, 2, r, {q("0")}), Outcome::Hit);
  EXPECT_EQ(target_predicate(m, p, 4, testing::constant_rate("0"), {q("0")}), Outcome::Miss);
}

TEST(Predicate, RejectsBadArguments) {
  const MapSpec m = builtin_map("doubling");
  GenericPoint p = GenericPoint::sample(m, 1);
  EXPECT_THROW(distance_predicate(m, p, 0, {q("1/2")}), InvalidArgument);
  EXPECT_THROW(distance_predicate(m, p, 1, testing::constant_rate("1/2", 2)), InvalidArgument);
}

}  // namespace
}  // namespace shrinkrec
