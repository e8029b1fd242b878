#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ablo/outer_loop.hpp"
#include "helpers.hpp"

namespace ablo {
namespace {

using testing::reference_spec;

OuterSchedule harmonic(double c, std::size_t iters) { return {OuterSchedule::Kind::harmonic, c, iters}; }

void expect_same(const RunRecord& a, const RunRecord& b) {
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const RunRow& x = a.rows[i];
    const RunRow& y = b.rows[i];
    EXPECT_EQ(x.theta, y.theta);
    EXPECT_EQ(x.task, y.task);
    EXPECT_EQ(x.xi, y.xi);
    EXPECT_EQ(x.cum_grad, y.cum_grad);
    EXPECT_EQ(x.cum_hvp, y.cum_hvp);
    EXPECT_EQ(std::isnan(x.grad_norm_sq), std::isnan(y.grad_norm_sq));
    if (!std::isnan(x.grad_norm_sq)) EXPECT_EQ(x.grad_norm_sq, y.grad_norm_sq);
  }
}

TEST(OuterSchedule, StepSizes) {
  EXPECT_DOUBLE_EQ(harmonic(10.0, 0).gamma(4), 2.5);
  EXPECT_DOUBLE_EQ((OuterSchedule{OuterSchedule::Kind::inverse_sqrt, 1.0, 0}).gamma(16), 0.25);
  const OuterSchedule flat{OuterSchedule::Kind::constant, 0.3, 0};
  EXPECT_DOUBLE_EQ(flat.gamma(1000), 0.3);
  EXPECT_FALSE(flat.satisfies_step_conditions());
  EXPECT_TRUE(harmonic(1.0, 0).satisfies_step_conditions());
  EXPECT_THROW(harmonic(0.0, 1).validate(), ConfigError);
}

TEST(Adaptive, FirstUpdateBiasCorrection) {
  AdaptiveState s = AdaptiveState::from(AdaptiveConfig{});
  EXPECT_TRUE(std::isnan(s.d2_bar()));
  s = adaptive_update(s, 4.0, 9.0);
  EXPECT_NEAR(s.D2_sm, 0.04, 1e-15);
  EXPECT_NEAR(s.V2_sm, 0.09, 1e-15);
  EXPECT_NEAR(s.d2_bar(), 4.0, 1e-12);
  EXPECT_NEAR(s.v2_bar(), 9.0, 1e-12);
  EXPECT_EQ(s.k_upd, 1u);

  AdaptiveConfig scaled;
  scaled.bias_scale = 0.1;
  const AdaptiveState t = adaptive_update(AdaptiveState::from(scaled), 4.0, 9.0);
  EXPECT_NEAR(t.d2_bar(), 0.4, 1e-12);
}

TEST(Adaptive, ChooseQ) {
  const CostModel c{1.0, 1.0, 10, 0.0};
  AdaptiveState s = AdaptiveState::from(AdaptiveConfig{});
  EXPECT_EQ(choose_q(s, c), 1.0);
  const AdaptiveState zero = adaptive_update(s, 0.0, 1.0);
  EXPECT_EQ(choose_q(zero, c), 0.05);
  const AdaptiveState ex = adaptive_update(s, 0.1, 1.0);
  EXPECT_NEAR(choose_q(ex, c), 0.27357, 1e-5);
  AdaptiveState high = s;
  high.q_min = 0.5;
  EXPECT_EQ(choose_q(adaptive_update(high, 0.1, 1.0), c), 0.5);
  EXPECT_EQ(choose_q(adaptive_update(s, 1.0, 1.0), c), 1.0);
}

TEST(Adaptive, ConfigValidation) {
  AdaptiveConfig c;
  c.beta = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.q_min = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RunSgd, ZeroIterationsKeepsOnlyStart) {
  const auto pb = as_problem(reference_spec());
  const auto rec = run_sgd(*pb, Fom{}, InnerSchedule::constant(0.1, 10), harmonic(10.0, 0), Vec::Constant(1, 3.0), 1);
  ASSERT_EQ(rec.rows.size(), 1u);
  EXPECT_EQ(rec.rows[0].k, 0u);
  EXPECT_EQ(rec.rows[0].theta[0], 3.0);
  EXPECT_EQ(rec.rows[0].cum_calls(), 0u);
}

TEST(RunSgd, UpdateRuleMatchesManualIteration) {
  const auto pb = make_scalar_quadratic(1.0, 0.0);
  const auto inner = InnerSchedule::constant(0.5, 1);
  const auto rec = run_sgd(*pb, ExactCached{}, inner, harmonic(1.0, 3), Vec::Constant(1, 2.0), 9);
  // dL/dtheta = theta / 4 here.
  double th = 2.0;
  for (int k = 1; k <= 3; ++k) th -= (1.0 / k) * th / 4.0;
  EXPECT_NEAR(rec.theta_final[0], th, 1e-15);
  EXPECT_EQ(rec.rows.back().cum_grad, 6u);
  EXPECT_EQ(rec.rows.back().cum_hvp, 3u);
}

TEST(RunSgd, DeterministicReplay) {
  const auto pb = as_problem(reference_spec());
  const auto inner = InnerSchedule::constant(0.1, 10);
  AdaptiveUfom ad;
  for (const EstimatorChoice& e : {EstimatorChoice{Ufom{0.3}}, EstimatorChoice{ad}, EstimatorChoice{Fom{}}}) {
    const auto a = run_sgd(*pb, e, inner, harmonic(10.0, 200), Vec::Constant(1, 4.0), 77);
    const auto b = run_sgd(*pb, e, inner, harmonic(10.0, 200), Vec::Constant(1, 4.0), 77);
    expect_same(a, b);
  }
}

TEST(RunSgd, TaskAndCoinStreamsAreIndependent) {
  const auto pb = as_problem(reference_spec());
  const auto inner = InnerSchedule::constant(0.1, 10);
  RunOptions base;
  base.diagnostics = false;
  RunOptions other_coins = base;
  other_coins.coin_seed = 12345;
  const auto a = run_sgd(*pb, Ufom{0.4}, inner, harmonic(10.0, 300), Vec::Constant(1, 4.0), 5, base);
  const auto b = run_sgd(*pb, Ufom{0.4}, inner, harmonic(10.0, 300), Vec::Constant(1, 4.0), 5, other_coins);
  std::size_t coin_diff = 0;
  for (std::size_t k = 1; k < a.rows.size(); ++k) {
    EXPECT_EQ(a.rows[k].task, b.rows[k].task);
    coin_diff += a.rows[k].xi != b.rows[k].xi;
  }
  EXPECT_GT(coin_diff, 0u);

  RunOptions fixed_coins = base;
  fixed_coins.coin_seed = 5;
  const auto c = run_sgd(*pb, Ufom{0.4}, inner, harmonic(10.0, 300), Vec::Constant(1, 4.0), 6, fixed_coins);
  std::size_t task_diff = 0;
  for (std::size_t k = 1; k < a.rows.size(); ++k) {
    EXPECT_EQ(a.rows[k].xi, c.rows[k].xi);
    task_diff += a.rows[k].task != c.rows[k].task;
  }
  EXPECT_GT(task_diff, 0u);
}

TEST(RunSgd, AdaptiveBookkeepingMatchesLog) {
  const auto pb = as_problem(reference_spec());
  const auto inner = InnerSchedule::constant(0.1, 10);
  AdaptiveUfom ad;
  ad.cfg.beta = 0.9;
  ad.cfg.bias_scale = 0.5;
  const auto rec = run_sgd(*pb, ad, inner, harmonic(10.0, 400), Vec::Constant(1, 20.0), 3);
  double d = 0.0, v = 0.0;
  std::size_t upd = 0;
  for (std::size_t k = 1; k < rec.rows.size(); ++k) {
    const RunRow& row = rec.rows[k];
    EXPECT_GE(row.q, ad.cfg.q_min);
    EXPECT_LE(row.q, 1.0);
    if (upd == 0) EXPECT_EQ(row.q, 1.0);
    if (row.xi == 1) {
      d = 0.9 * d + 0.1 * row.bias_sq;
      v = 0.9 * v + 0.1 * row.exact_sq;
      ++upd;
    } else {
      EXPECT_TRUE(std::isnan(row.bias_sq));
    }
    const double corr = 1.0 - std::pow(0.9, static_cast<double>(upd));
    EXPECT_NEAR(row.d2_bar, 0.5 * d / corr, 1e-12 * (1.0 + row.d2_bar));
    EXPECT_NEAR(row.v2_bar, v / corr, 1e-12 * (1.0 + row.v2_bar));
  }
  EXPECT_GT(upd, 0u);
  EXPECT_LT(upd, rec.rows.size() - 1);
}

TEST(RunSgd, CountersNondecreasing) {
  const auto pb = as_problem(reference_spec());
  const auto rec = run_sgd(*pb, Ufom{0.2}, InnerSchedule::constant(0.1, 10), harmonic(10.0, 300),
                           Vec::Constant(1, 0.0), 8);
  for (std::size_t k = 1; k < rec.rows.size(); ++k) {
    EXPECT_GE(rec.rows[k].cum_grad, rec.rows[k - 1].cum_grad);
    EXPECT_GE(rec.rows[k].cum_hvp, rec.rows[k - 1].cum_hvp);
    const std::size_t dg = rec.rows[k].cum_grad - rec.rows[k - 1].cum_grad;
    EXPECT_EQ(dg, rec.rows[k].xi == 1 ? 56u : 11u);
  }
}

TEST(RunSgd, CallBudgetStopsRun) {
  const auto pb = as_problem(reference_spec());
  RunOptions opt;
  opt.call_budget = 1000;
  const auto rec =
      run_sgd(*pb, ExactRecompute{}, InnerSchedule::constant(0.1, 10), harmonic(1.0, 10000), Vec::Zero(1), 1, opt);
  EXPECT_TRUE(rec.stopped_by_budget);
  EXPECT_GE(rec.rows.back().cum_calls(), 1000u);
  EXPECT_LT(rec.rows.back().cum_calls(), 1000u + 66u);
}

TEST(RunSgd, ClipBoundsStep) {
  const auto pb = make_scalar_quadratic(1.0, 0.0);
  RunOptions opt;
  opt.clip = 0.1;
  const auto rec = run_sgd(*pb, ExactCached{}, InnerSchedule::constant(0.5, 1),
                           {OuterSchedule::Kind::constant, 1.0, 1}, Vec::Constant(1, 100.0), 1, opt);
  EXPECT_DOUBLE_EQ(rec.theta_final[0], 99.9);
}

TEST(RunSgd, SnapshotStride) {
  const auto pb = as_problem(reference_spec());
  RunOptions opt;
  opt.snapshot_stride = 10;
  const auto rec = run_sgd(*pb, Fom{}, InnerSchedule::constant(0.1, 3), harmonic(1.0, 25), Vec::Zero(1), 1, opt);
  for (const auto& row : rec.rows) EXPECT_EQ(row.theta.size() == 1, row.k % 10 == 0);
}

TEST(RunSgd, DivergenceReportsOuterIteration) {
  const auto pb = make_scalar_quadratic(1.0, 0.0);
  try {
    run_sgd(*pb, ExactCached{}, InnerSchedule::constant(0.5, 1), {OuterSchedule::Kind::constant, 20.0, 100000},
            Vec::Constant(1, 1.0), 1);
    FAIL() << "expected DivergentRun";
  } catch (const DivergentRun& e) {
    EXPECT_GT(e.iteration(), 1u);
  }
}

TEST(RunSgd, RejectsBadInputs) {
  const auto pb = as_problem(reference_spec());
  const auto inner = InnerSchedule::constant(0.1, 3);
  EXPECT_THROW(run_sgd(*pb, Fom{}, inner, harmonic(1.0, 1), Vec::Zero(2), 1), ConfigError);
  EXPECT_THROW(run_sgd(*pb, Ufom{0.0}, inner, harmonic(1.0, 1), Vec::Zero(1), 1), ConfigError);
  EXPECT_THROW(run_replicas(*pb, Fom{}, inner, harmonic(1.0, 1), 1, 0, -1, 1), ConfigError);
}

TEST(RunSgd, FirstOrderStallsOnCounterexample) {
  const auto spec = reference_spec();
  const auto pb = as_problem(spec);
  const auto rec = run_sgd(*pb, Fom{}, InnerSchedule::constant(spec.alpha, spec.r), harmonic(10.0, 3000),
                           Vec::Constant(1, 25.0), 4);
  double late = 0.0;
  for (std::size_t k = 2700; k <= 3000; ++k) late += rec.rows[k].grad_norm_sq;
  late /= 301.0;
  EXPECT_GT(late, 0.06);
  EXPECT_LT(late, 0.18);
}

TEST(RunSgd, ExactWithInverseSqrtStepsApproachesStationarity) {
  const auto spec = reference_spec();
  const auto pb = as_problem(spec);
  const auto rec = run_sgd(*pb, ExactCached{}, InnerSchedule::constant(spec.alpha, spec.r),
                           {OuterSchedule::Kind::inverse_sqrt, 1.0, 5000}, Vec::Constant(1, -8.0), 2);
  double best = rec.rows[0].grad_norm_sq;
  double prev_best = best;
  for (const auto& row : rec.rows) {
    best = std::min(best, row.grad_norm_sq);
    EXPECT_LE(best, prev_best);
    prev_best = best;
  }
  EXPECT_LT(best, 1e-4);
}

TEST(RunReplicas, SerialMatchesParallel) {
  const auto pb = as_problem(reference_spec());
  const auto inner = InnerSchedule::constant(0.1, 10);
  const auto s = run_replicas(*pb, Ufom{0.25}, inner, harmonic(10.0, 150), 3, 6, -10, 30, {}, Execution::serial);
  const auto p = run_replicas(*pb, Ufom{0.25}, inner, harmonic(10.0, 150), 3, 6, -10, 30, {}, Execution::parallel);
  ASSERT_EQ(s.size(), p.size());
  for (std::size_t i = 0; i < s.size(); ++i) expect_same(s[i], p[i]);
  EXPECT_NE(s[0].rows[0].theta[0], s[1].rows[0].theta[0]);
}

}  // namespace
}  // namespace ablo
