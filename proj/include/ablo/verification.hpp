#pragma once

// Independent checks of the oracles and estimators: central finite differences,
// Monte-Carlo unbiasedness, grid estimates of D^2 / V^2 and empirical q* search.
//
// Every data-parallel routine takes an Execution argument; Execution::serial is
// the reference path and both paths return identical results.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ablo/estimators.hpp"
#include "ablo/outer_loop.hpp"
#include "ablo/parallel.hpp"
#include "ablo/problem.hpp"

namespace ablo {

struct FDConfig {
  double rel_step = 1e-5;  // h = rel_step * max(1, |x|) per coordinate
  double rtol = 1e-5;
  double atol = 1e-8;

  double step(double x) const;
  /// ||a - b|| <= atol + rtol * max(||a||, ||b||)
  bool close(const Vec& a, const Vec& b) const;
  void validate() const;
};

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
double relative_error(const Vec& a, const Vec& b);

/// d f / d x by central differences, one coordinate at a time.
template <class F>
Vec central_gradient(F&& f, const Vec& x, const FDConfig& fd) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd.step(x[i]);
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

struct OracleCheck {
  std::string oracle;
  double max_rel_error = 0.0;
  std::size_t failures = 0;
  std::string worst_point;
};

struct FDReport {
  std::vector<OracleCheck> checks;
  bool passed() const;
  std::string summary() const;
};

/// Compares inner_grad_phi, outer_grad_phi, outer_grad_theta, hvp_phi_phi,
/// hvp_theta_phi and jvp_start against central differences at sampled points.
FDReport fd_check_gradients(const BilevelProblem& problem, std::size_t samples, const FDConfig& fd, Rng& rng);

/// Largest relative deviation of hvp(alpha b1 + b2) from alpha hvp(b1) + hvp(b2)
/// over both HVP oracles at sampled points.
double hvp_linearity_error(const BilevelProblem& problem, std::size_t samples, Rng& rng);

/// Central differences of theta -> L_out(theta, inner_rollout(theta), task).
Vec fd_total_gradient(const BilevelProblem& problem, const Vec& theta, Task task, const InnerSchedule& schedule,
                      const FDConfig& fd = {});

enum class McEstimator { ufom, fom };

struct McReport {
  Vec mean;
  Vec exact;
  Vec std_error;
  Vec z;
  double max_abs_z = 0.0;
  Vec second_moment;  // per-coordinate E[G^2] sample mean
  std::size_t draws = 0;
};

/// Each draw is sum_t p_t G(theta, t) with an independent coin per task, so the
/// task expectation is exact and only the coins are sampled. Draws run in fixed
/// batches with their own streams (seed, batch). Throws ConfigError for problems
/// without a finite task set.
McReport mc_unbiasedness(const BilevelProblem& problem, const Vec& theta, const InnerSchedule& schedule,
                         double q, std::size_t draws, std::uint64_t seed,
                         McEstimator estimator = McEstimator::ufom, Execution exec = Execution::parallel,
                         std::size_t batch = 1024);

/// Second moment of a single-task-sampled UFOM draw, E||G||^2 with T ~ p(T),
/// estimated from `draws` samples; returns (mean, standard error).
std::pair<double, double> mc_second_moment(const BilevelProblem& problem, const Vec& theta,
                                           const InnerSchedule& schedule, double q, std::size_t draws,
                                           std::uint64_t seed, Execution exec = Execution::parallel,
                                           std::size_t batch = 1024);

struct GridStats {
  std::vector<double> grid;
  std::vector<double> d2;  // E||b_FO - b_Exact||^2 per grid point
  std::vector<double> v2;  // E||b_Exact||^2 per grid point
  double D2_hat = 0.0;
  double V2_hat = 0.0;
};

/// n_grid evenly spaced scalar theta values on [lo, hi]. Requires s = 1 and a
/// finite task set (ConfigError otherwise).
GridStats grid_sup_stats(const BilevelProblem& problem, const InnerSchedule& schedule, double lo, double hi,
                         std::size_t n_grid, Execution exec = Execution::parallel);

struct QCurve {
  double q = 0.0;
  std::vector<double> mean_abs_grad;  // mean over replicas of |dM/dtheta|, k = 0..tau
  std::vector<double> mean_calls;     // mean cumulative grad + hvp calls, k = 0..tau
  std::optional<std::size_t> crossing;  // first k with mean_abs_grad <= threshold
  double time = 0.0;                  // mean_calls at the crossing, +inf if none
};

struct QstarResult {
  double best_q = 0.0;
  double reference_q = 0.0;
  double threshold = 0.0;
  std::vector<QCurve> curves;
};

struct QstarSetup {
  std::vector<double> q_grid;
  std::size_t replicas = 0;
  OuterSchedule outer;
  double theta_lo = -50.0;
  double theta_hi = 50.0;
  std::uint64_t seed = 0;
};

/// Runs UFOM for each q. The reference is the smallest q in the grid; its final
/// mean level is the threshold, and best_q reaches it in the fewest mean calls.
/// Replica i uses the same theta_0 and task stream for every q. Throws
/// ConfigError on an empty grid, q outside (0, 1] or zero replicas.
QstarResult empirical_qstar(const BilevelProblem& problem, const InnerSchedule& schedule, const QstarSetup& setup,
                            Execution exec = Execution::parallel);

/// Shared per-iteration summaries of replica runs.
struct CurveSummary {
  std::vector<double> mean;       // mean of |dM/dtheta| per k
  std::vector<double> std_error;  // standard error of that mean
  std::vector<double> mean_calls;
};

/// Rows beyond a run's length (budget stop) carry the run's last row forward.
CurveSummary summarize_abs_grad(const std::vector<RunRecord>& runs);

}  // namespace ablo
