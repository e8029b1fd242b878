#pragma once

// Outer SGD over theta with one sampled task per step, and the adaptive
// controller that picks the UFOM probability online.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ablo/estimators.hpp"
#include "ablo/parallel.hpp"
#include "ablo/problem.hpp"
#include "ablo/theory.hpp"

namespace ablo {

struct OuterSchedule {
  enum class Kind { harmonic, inverse_sqrt, constant };

  Kind kind = Kind::harmonic;
  double c = 1.0;
  std::size_t iterations = 0;

  /// gamma_k for k >= 1: c/k, c/sqrt(k) or c.
  double gamma(std::size_t k) const;
  /// False for a constant step: sum gamma_k = inf holds but gamma_k does not vanish.
  bool satisfies_step_conditions() const { return kind != Kind::constant; }
  void validate() const;
};

struct AdaptiveConfig {
  double beta = 0.99;
  double q_min = 0.05;
  double bias_scale = 1.0;
  double C1 = 1.0;
  double C2 = 1.0;
  double epsilon = 0.0;

  void validate() const;
};

struct AdaptiveState {
  double D2_sm = 0.0;
  double V2_sm = 0.0;
  std::size_t k_upd = 0;
  double beta = 0.99;
  double q_min = 0.05;
  double bias_scale = 1.0;

  static AdaptiveState from(const AdaptiveConfig& cfg);
  /// Bias-corrected, scaled by bias_scale. NaN before the first update.
  double d2_bar() const;
  /// Bias-corrected. NaN before the first update.
  double v2_bar() const;
};

/// One exponential-smoothing step; call only after a xi = 1 draw.
AdaptiveState adaptive_update(AdaptiveState state, double bias_sq, double exact_sq);

/// max(q*(d2_bar, v2_bar), q_min), or 1 before any update.
double choose_q(const AdaptiveState& state, const CostModel& cost);

struct ExactCached {};
struct ExactRecompute {};
struct Fom {};
struct Ufom {
  double q = 1.0;
};
struct AdaptiveUfom {
  AdaptiveConfig cfg;
};
using EstimatorChoice = std::variant<ExactCached, ExactRecompute, Fom, Ufom, AdaptiveUfom>;

std::string estimator_name(const EstimatorChoice& choice);

struct RunOptions {
  bool diagnostics = true;        // exact dM/dtheta per row (finite task sets only)
  bool track_objective = false;   // expected outer objective per row (finite task sets only)
  std::size_t snapshot_stride = 1;
  std::optional<double> clip;     // per-entry clip of the gradient estimate to [-clip, clip]
  std::optional<std::size_t> call_budget;  // stop once grad + hvp calls reach this
  std::optional<std::uint64_t> coin_seed;  // coin stream seed; defaults to the run seed
};

struct RunRow {
  std::size_t k = 0;
  Vec theta;                 // empty unless k is a multiple of the snapshot stride
  double theta_norm = 0.0;
  double grad_norm_sq = std::numeric_limits<double>::quiet_NaN();
  double q = std::numeric_limits<double>::quiet_NaN();
  int xi = -1;
  std::size_t task = 0;
  double bias_sq = std::numeric_limits<double>::quiet_NaN();   // xi = 1 rows only
  double exact_sq = std::numeric_limits<double>::quiet_NaN();  // xi = 1 rows only
  std::size_t cum_grad = 0;
  std::size_t cum_hvp = 0;
  double d2_bar = std::numeric_limits<double>::quiet_NaN();
  double v2_bar = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();

  std::size_t cum_calls() const { return cum_grad + cum_hvp; }
};

struct RunRecord {
  std::string estimator;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::vector<RunRow> rows;  // rows[0] is theta_0
  Vec theta_final;
  bool stopped_by_budget = false;
};

/// theta_k = theta_{k-1} - gamma_k G(theta_{k-1}, T_k). Tasks come from stream
/// (seed, tasks, replica), coin flips from (coin_seed or seed, bernoulli, replica).
/// Throws DivergentRun with the outer iteration on any non-finite value.
RunRecord run_sgd(const BilevelProblem& problem, const EstimatorChoice& choice, const InnerSchedule& inner,
                  const OuterSchedule& outer, const Vec& theta0, std::uint64_t seed,
                  const RunOptions& options = {}, std::uint64_t replica = 0);

/// Uniform theta_0 in [lo, hi]^s from stream (seed, init, replica).
Vec draw_theta0(const BilevelProblem& problem, std::uint64_t seed, std::uint64_t replica, double lo, double hi);

/// Independent replicas 0..n-1, each with its own theta_0 from draw_theta0.
std::vector<RunRecord> run_replicas(const BilevelProblem& problem, const EstimatorChoice& choice,
                                    const InnerSchedule& inner, const OuterSchedule& outer, std::uint64_t seed,
                                    std::size_t replicas, double theta_lo, double theta_hi,
                                    const RunOptions& options = {}, Execution exec = Execution::parallel);

}  // namespace ablo
