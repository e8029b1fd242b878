#include "ablo/outer_loop.hpp"

#include <algorithm>
#include <cmath>

namespace ablo {

double OuterSchedule::gamma(std::size_t k) const {
  const double kk = static_cast<double>(k);
  switch (kind) {
    case Kind::harmonic:
      return c / kk;
    case Kind::inverse_sqrt:
      return c / std::sqrt(kk);
    case Kind::constant:
      return c;
  }
  return c;
}

void OuterSchedule::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("outer schedule: c must be positive and finite");
}

void AdaptiveConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("adaptive: beta must lie in (0, 1)");
  if (!(q_min > 0.0 && q_min <= 1.0)) throw ConfigError("adaptive: q_min must lie in (0, 1]");
  if (!(bias_scale >= 0.0) || !std::isfinite(bias_scale)) throw ConfigError("adaptive: bias_scale must be >= 0");
  CostModel{C1, C2, 1, epsilon}.validate();
}

AdaptiveState AdaptiveState::from(const AdaptiveConfig& cfg) {
  cfg.validate();
  AdaptiveState s;
  s.beta = cfg.beta;
  s.q_min = cfg.q_min;
  s.bias_scale = cfg.bias_scale;
  return s;
}

double AdaptiveState::d2_bar() const {
  if (k_upd == 0) return std::numeric_limits<double>::quiet_NaN();
  return bias_scale * D2_sm / (1.0 - std::pow(beta, static_cast<double>(k_upd)));
}

double AdaptiveState::v2_bar() const {
  if (k_upd == 0) return std::numeric_limits<double>::quiet_NaN();
  return V2_sm / (1.0 - std::pow(beta, static_cast<double>(k_upd)));
}

AdaptiveState adaptive_update(AdaptiveState state, double bias_sq, double exact_sq) {
  state.D2_sm = state.beta * state.D2_sm + (1.0 - state.beta) * bias_sq;
  state.V2_sm = state.beta * state.V2_sm + (1.0 - state.beta) * exact_sq;
  ++state.k_upd;
  return state;
}

double choose_q(const AdaptiveState& state, const CostModel& cost) {
  if (state.k_upd == 0) return 1.0;
  return std::max(optimal_q(state.d2_bar(), state.v2_bar(), cost), state.q_min);
}

std::string estimator_name(const EstimatorChoice& choice) {
  struct Namer {
    std::string operator()(const ExactCached&) const { return "exact_cached"; }
    std::string operator()(const ExactRecompute&) const { return "exact_recompute"; }
    std::string operator()(const Fom&) const { return "fom"; }
    std::string operator()(const Ufom&) const { return "ufom"; }
    std::string operator()(const AdaptiveUfom&) const { return "adaptive_ufom"; }
  };
  return std::visit(Namer{}, choice);
}

namespace {

void diagnose(const BilevelProblem& pb, const InnerSchedule& inner, const RunOptions& opt, RunRow& row,
              const Vec& theta) {
  if (opt.diagnostics) row.grad_norm_sq = expected_exact_gradient(pb, theta, inner).squaredNorm();
  if (opt.track_objective) row.objective = point_stats(pb, theta, inner).objective;
}

void snapshot(const RunOptions& opt, RunRow& row, const Vec& theta) {
  row.theta_norm = theta.norm();
  if (row.k % opt.snapshot_stride == 0) row.theta = theta;
}

}  // namespace

RunRecord run_sgd(const BilevelProblem& problem, const EstimatorChoice& choice, const InnerSchedule& inner,
                  const OuterSchedule& outer, const Vec& theta0, std::uint64_t seed, const RunOptions& options,
                  std::uint64_t replica) {
  inner.validate();
  outer.validate();
  if (static_cast<std::size_t>(theta0.size()) != problem.outer_dim())
    throw ConfigError("run_sgd: theta0 has dimension " + std::to_string(theta0.size()) + ", expected " +
                      std::to_string(problem.outer_dim()));
  if (options.snapshot_stride == 0) throw ConfigError("run_sgd: snapshot_stride must be >= 1");
  if ((options.diagnostics || options.track_objective) && !problem.has_finite_tasks())
    throw ConfigError("run_sgd: diagnostics need a finite task set");
  if (const auto* u = std::get_if<Ufom>(&choice); u && !(u->q > 0.0 && u->q <= 1.0))
    throw ConfigError("run_sgd: ufom q must lie in (0, 1]");

  Rng task_rng = make_rng(seed, Stream::tasks, replica);
  Rng coin_rng = make_rng(options.coin_seed.value_or(seed), Stream::bernoulli, replica);

  std::optional<AdaptiveState> adaptive;
  CostModel cost{1.0, 1.0, inner.r(), 0.0};
  if (const auto* a = std::get_if<AdaptiveUfom>(&choice)) {
    adaptive = AdaptiveState::from(a->cfg);
    cost = CostModel{a->cfg.C1, a->cfg.C2, inner.r(), a->cfg.epsilon};
  }

  RunRecord rec;
  rec.estimator = estimator_name(choice);
  rec.seed = seed;
  rec.replica = replica;
  rec.rows.reserve(std::min<std::size_t>(outer.iterations, 1u << 16) + 1);

  Vec theta = theta0;
  if (!theta.allFinite()) throw DivergentRun(0, "non-finite theta0");
  {
    RunRow row;
    snapshot(options, row, theta);
    diagnose(problem, inner, options, row, theta);
    rec.rows.push_back(std::move(row));
  }

  std::size_t cum_grad = 0;
  std::size_t cum_hvp = 0;
  for (std::size_t k = 1; k <= outer.iterations; ++k) {
    const Task task = problem.sample_task(task_rng);
    RunRow row;
    row.k = k;
    GradientEstimate est;
    try {
      if (std::holds_alternative<ExactCached>(choice)) {
        est = exact_gradient_cached(problem, theta, task, inner);
        row.q = 1.0;
      } else if (std::holds_alternative<ExactRecompute>(choice)) {
        est = exact_gradient_recompute(problem, theta, task, inner);
        row.q = 1.0;
      } else if (std::holds_alternative<Fom>(choice)) {
        est = fom_gradient(problem, theta, task, inner);
        row.q = 0.0;
      } else if (const auto* u = std::get_if<Ufom>(&choice)) {
        est = ufom_gradient(problem, theta, task, inner, u->q, coin_rng);
        row.q = u->q;
      } else {
        row.q = choose_q(*adaptive, cost);
        est = ufom_gradient(problem, theta, task, inner, row.q, coin_rng);
        if (est.xi == 1) adaptive = adaptive_update(*adaptive, *est.bias_sq, *est.exact_sq);
        row.d2_bar = adaptive->d2_bar();
        row.v2_bar = adaptive->v2_bar();
      }
    } catch (const DivergentRollout& e) {
      throw DivergentRun(k, e.what());
    }
    row.xi = est.xi;
    row.task = task.index;
    if (est.bias_sq) row.bias_sq = *est.bias_sq;
    if (est.exact_sq) row.exact_sq = *est.exact_sq;

    Vec g = std::move(est.grad);
    if (options.clip) g = g.cwiseMax(-*options.clip).cwiseMin(*options.clip);
    theta -= outer.gamma(k) * g;
    if (!theta.allFinite()) throw DivergentRun(k, "non-finite theta");

    cum_grad += est.counter.grad_evals;
    cum_hvp += est.counter.hvp_evals;
    row.cum_grad = cum_grad;
    row.cum_hvp = cum_hvp;
    snapshot(options, row, theta);
    diagnose(problem, inner, options, row, theta);
    rec.rows.push_back(std::move(row));

    if (options.call_budget && cum_grad + cum_hvp >= *options.call_budget) {
      rec.stopped_by_budget = true;
      break;
    }
  }
  rec.theta_final = theta;
  return rec;
}

Vec draw_theta0(const BilevelProblem& problem, std::uint64_t seed, std::uint64_t replica, double lo, double hi) {
  if (!(lo <= hi)) throw ConfigError("theta0 range: lo must not exceed hi");
  Rng rng = make_rng(seed, Stream::init, replica);
  Vec v(static_cast<Eigen::Index>(problem.outer_dim()));
  for (auto& e : v) e = uniform(rng, lo, hi);
  return v;
}

std::vector<RunRecord> run_replicas(const BilevelProblem& problem, const EstimatorChoice& choice,
                                    const InnerSchedule& inner, const OuterSchedule& outer, std::uint64_t seed,
                                    std::size_t replicas, double theta_lo, double theta_hi,
                                    const RunOptions& options, Execution exec) {
  if (replicas == 0) throw ConfigError("run_replicas: need at least one replica");
  std::vector<RunRecord> out(replicas);
  for_each_index(exec, replicas, [&](std::size_t i) {
    const Vec theta0 = draw_theta0(problem, seed, i, theta_lo, theta_hi);
    out[i] = run_sgd(problem, choice, inner, outer, theta0, seed, options, i);
  });
  return out;
}

}  // namespace ablo
