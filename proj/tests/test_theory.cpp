#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ablo/counterexample.hpp"
#include "ablo/theory.hpp"
#include "ablo/verification.hpp"
#include "helpers.hpp"

namespace ablo {
namespace {

const RegularityConstants kUnit{1.0, 0.0, 1.0, 1.0, 0.0};

CostModel paper_cost() { return CostModel{1.0, 1.0, 10, 0.0}; }

// Root of a q^2 + b q + c on (0, 1) by plain bisection.
double bisect(const QuadCoeffs& p) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (p(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(Bounds, DBoundSubstitution) {
  EXPECT_DOUBLE_EQ(d_bound(kUnit, InnerSchedule::constant(1.0, 1)), 4.0);
  EXPECT_EQ(d_bound(kUnit, InnerSchedule{}), 0.0);
  RegularityConstants flat = kUnit;
  flat.L2 = 0.0;
  EXPECT_EQ(d_bound(flat, InnerSchedule::constant(0.3, 8)), 0.0);
}

TEST(Bounds, VBoundSubstitution) {
  EXPECT_DOUBLE_EQ(v_bound(kUnit, InnerSchedule::constant(1.0, 1)), 5.0);
  RegularityConstants k{0.7, 0.0, 2.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(v_bound(k, InnerSchedule{}), 2.0 * 1.7);
  RegularityConstants pos{0.3, 0.2, 1.1, 0.8, 0.4};
  double prev = 0.0;
  for (std::size_t r = 0; r < 30; ++r) {
    const double v = v_bound(pos, InnerSchedule::constant(0.05, r));
    EXPECT_GE(v, prev);
    prev = v;
  }
}

// Direct double-loop evaluation of the Lipschitz-constant definitions.
double reference_c(const RegularityConstants& k, const std::vector<double>& alpha) {
  const std::size_t r = alpha.size();
  auto al = [&](std::size_t j) { return j == 0 ? 0.0 : alpha[j - 1]; };
  auto P = [&](std::size_t a, std::size_t b) {
    double p = 1.0;
    for (std::size_t j = a; j <= b; ++j) p *= 1.0 + al(j) * k.L2;
    return p;
  };
  std::vector<double> A(r + 1), B(r + 1);
  for (std::size_t j = 0; j <= r; ++j) {
    A[j] = k.M1 * P(1, j);
    for (std::size_t i = 1; i <= j; ++i) A[j] += k.L2 * al(i) * P(i + 1, j);
  }
  for (std::size_t j = 0; j <= r; ++j) {
    double s = 0.0;
    for (std::size_t i = j + 1; i <= r; ++i) s += al(i) * (1.0 + A[i - 1]);
    B[j] = (k.L2 * (1.0 + A[r]) * (1.0 + al(j) * k.L2) + k.L1 * k.L3 * s) * P(j + 1, r);
  }
  double c = k.L2 + k.L2 * A[r] + k.M1 * B[0] + k.M2 * k.L1 * P(1, r);
  for (std::size_t j = 1; j <= r; ++j) c += al(j) * (k.L2 * B[j] + k.L3 * (1.0 + A[j - 1]) * k.L1 * P(j + 1, r));
  return c;
}

TEST(Lipschitz, ZeroConstants) { EXPECT_EQ(lipschitz_c({}, InnerSchedule::constant(0.1, 5)), 0.0); }

TEST(Lipschitz, NoInnerSteps) {
  const RegularityConstants k{0.6, 0.4, 1.3, 0.9, 0.2};
  const auto t = lipschitz_terms(k, InnerSchedule{});
  ASSERT_EQ(t.A.size(), 1u);
  EXPECT_DOUBLE_EQ(t.A[0], 0.6);
  EXPECT_DOUBLE_EQ(t.B[0], 0.9 * 1.6);
  EXPECT_DOUBLE_EQ(t.C, 0.9 + 0.9 * 0.6 + 0.6 * t.B[0] + 0.4 * 1.3);
}

TEST(Lipschitz, MatchesReferenceEvaluation) {
  Rng rng = make_rng(31);
  for (int n = 0; n < 50; ++n) {
    const RegularityConstants k{uniform(rng, 0, 2), uniform(rng, 0, 2), uniform(rng, 0, 2), uniform(rng, 0, 2),
                                uniform(rng, 0, 2)};
    std::vector<double> alpha(static_cast<std::size_t>(n % 7));
    for (auto& a : alpha) a = uniform(rng, 0.01, 0.5);
    const double ref = reference_c(k, alpha);
    EXPECT_NEAR(lipschitz_c(k, InnerSchedule{alpha}), ref, 1e-12 * std::max(1.0, ref));
  }
}

TEST(Lipschitz, CurvatureFreeDependsOnL1OnlyThroughM2) {
  const RegularityConstants k{0.5, 0.3, 1.0, 0.0, 0.0};
  RegularityConstants k2 = k;
  k2.L1 = 2.0;
  const auto s = InnerSchedule::constant(0.2, 6);
  EXPECT_DOUBLE_EQ(lipschitz_c(k2, s) - lipschitz_c(k, s), 0.3 * 1.0);
}

TEST(CostModelTest, DerivedCosts) {
  const auto c = paper_cost();
  EXPECT_DOUBLE_EQ(c.C_det(), 11.0);
  EXPECT_DOUBLE_EQ(c.C_rnd(), 55.0);
  EXPECT_THROW((CostModel{1.0, 1.0, 10, 0.5}).validate(), ConfigError);
  EXPECT_THROW((CostModel{0.0, 1.0, 10, 0.0}).validate(), ConfigError);
}

TEST(Condition, Threshold) {
  EXPECT_NEAR(ufom_threshold(paper_cost()), 55.0 / 132.0, 1e-15);
  EXPECT_EQ(ufom_beats_exact(0.1, 1.0, paper_cost()), Verdict::ufom_faster);
  EXPECT_EQ(ufom_beats_exact(0.0, 1.0, paper_cost()), Verdict::ufom_faster);
  EXPECT_EQ(ufom_beats_exact(1.0, 1.0, paper_cost()), Verdict::exact_faster);
  EXPECT_EQ(ufom_beats_exact(0.1, 0.0, paper_cost()), Verdict::indeterminate);
}

TEST(OptimalQ, PaperExampleAgainstBisection) {
  const auto p = qstar_quadratic(0.1, 1.0, paper_cost());
  EXPECT_DOUBLE_EQ(p.a, 49.5);
  EXPECT_DOUBLE_EQ(p.b, -5.5);
  EXPECT_DOUBLE_EQ(p.c, -2.2);
  EXPECT_LT(p(0.0), 0.0);
  EXPECT_GT(p(1.0), 0.0);
  const double q = optimal_q(0.1, 1.0, paper_cost());
  EXPECT_NEAR(q, bisect(p), 1e-12);
  EXPECT_NEAR(q, 0.27357, 1e-5);
  EXPECT_LT(std::abs(p(q)), 1e-12);
}

TEST(OptimalQ, Degenerate) {
  EXPECT_EQ(optimal_q(0.9, 1.0, paper_cost()), 1.0);
  EXPECT_EQ(optimal_q(0.1, 0.0, paper_cost()), 1.0);
  EXPECT_EQ(optimal_q(0.0, 1.0, paper_cost()), 0.0);
  double prev = 1.0;
  for (double d : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const double q = optimal_q(d, 1.0, paper_cost());
    EXPECT_LT(q, prev);
    EXPECT_GT(q, 0.0);
    prev = q;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(OptimalQ, SingleSignChangeWheneverFaster) {
  Rng rng = make_rng(17);
  for (int n = 0; n < 500; ++n) {
    const CostModel c{uniform(rng, 0.1, 3), uniform(rng, 0.1, 3), static_cast<std::size_t>(uniform(rng, 1, 40)),
                      uniform(rng, 0.0, 0.45)};
    const double V2 = uniform(rng, 0.1, 5.0);
    const double D2 = uniform(rng, 0.0, 1.0) * V2;
    if (ufom_beats_exact(D2, V2, c) != Verdict::ufom_faster || D2 == 0.0) continue;
    const auto p = qstar_quadratic(D2, V2, c);
    EXPECT_LT(p(0.0), 0.0);
    EXPECT_GT(p(1.0), 0.0);
    int changes = 0;
    double last = p(0.0);
    for (int i = 1; i <= 2000; ++i) {
      const double v = p(i / 2000.0);
      if ((v > 0) != (last > 0)) ++changes;
      last = v;
    }
    EXPECT_EQ(changes, 1);
    const double q = optimal_q(D2, V2, c);
    EXPECT_NEAR(q, bisect(p), 1e-9);
  }
}

TEST(ExpectedTime, MinimisedAtOptimalQ) {
  const auto c = paper_cost();
  const double q = optimal_q(0.1, 1.0, c);
  EXPECT_LT(expected_time(q, 0.1, 1.0, c), expected_time(1.0, 0.1, 1.0, c));
  EXPECT_LT(expected_time(q, 0.1, 1.0, c), expected_time(0.02, 0.1, 1.0, c));
  EXPECT_DOUBLE_EQ(expected_time(1.0, 0.1, 2.0, c), 4.0 * 66.0);
  // Fine grid minimum sits within one cell of q*.
  const int n = 10000;
  int best = 1;
  for (int i = 1; i <= n; ++i)
    if (expected_time(i / double(n), 0.1, 1.0, c) < expected_time(best / double(n), 0.1, 1.0, c)) best = i;
  EXPECT_LE(std::abs(best / double(n) - q), 1.0 / n);
}

TEST(ExpectedTime, ScaleConsistency) {
  CostModel c{0.7, 1.9, 8, 0.1};
  CostModel c3{2.1, 5.7, 8, 0.1};
  EXPECT_NEAR(optimal_q(0.05, 1.2, c), optimal_q(0.05, 1.2, c3), 1e-14);
  EXPECT_NEAR(expected_time(0.4, 0.05, 1.2, c3), 3.0 * expected_time(0.4, 0.05, 1.2, c), 1e-10);
}

TEST(ExpectedTime, PureCostWithoutBias) {
  const auto c = paper_cost();
  double prev = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double t = expected_time(i / 100.0, 0.0, 1.0, c);
    EXPECT_GT(t, prev);
    prev = t;
  }
  EXPECT_THROW(expected_time(0.0, 0.1, 1.0, c), ConfigError);
}

TEST(ConvergenceRhs, Terms) {
  const std::vector<double> zeros(5, 0.0);
  EXPECT_EQ(convergence_rhs(3.0, 2.0, 0.5, 0.1, 1.0, zeros), 3.0);
  const std::vector<double> g{1.0, 0.5};
  EXPECT_DOUBLE_EQ(convergence_rhs(3.0, 2.0, 1.0, 0.7, 1.0, g), 3.0 + 2.0 * 1.25);
  EXPECT_DOUBLE_EQ(convergence_rhs(0.0, 1.0, 0.5, 0.2, 1.0, g), 1.2 * 1.25);
}

TEST(BoundDominance, CounterexampleGridStats) {
  const auto base = explicit_counterexample(0.5, 1.5, 10.0, 10.0, 0.01, 10);
  for (double alpha : {1e-3, 1e-2, 5e-2}) {
    auto spec = base;
    spec.alpha = alpha;
    const auto pb = as_problem(spec);
    const auto s = InnerSchedule::constant(alpha, 10);
    const auto gs = grid_sup_stats(*pb, s, -50.0, 50.0, 2001);
    const auto k = *pb->regularity();
    EXPECT_LE(gs.D2_hat, std::pow(d_bound(k, s), 2));
    EXPECT_LE(gs.V2_hat, std::pow(v_bound(k, s), 2));
  }
}

}  // namespace
}  // namespace ablo
