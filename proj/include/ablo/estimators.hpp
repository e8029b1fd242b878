#pragma once

// Hypergradient estimators through an r-step inner gradient descent.
//
// Call accounting: grad_evals counts evaluations of dL/dphi (inner and outer
// loss), hvp_evals counts (d2L/dtheta dphi, d2L/dphi2) pairs. Evaluations of
// dL_out/dtheta and of V or its jvp are free. peak_states is the largest number
// of inner iterates phi_j held in memory at the same time.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "ablo/problem.hpp"
#include "ablo/rng.hpp"

namespace ablo {

struct InnerSchedule {
  std::vector<double> alphas;  // alpha_1 .. alpha_r

  std::size_t r() const { return alphas.size(); }
  double alpha(std::size_t j) const { return alphas[j - 1]; }  // 1-based

  static InnerSchedule constant(double alpha, std::size_t r);
  /// Throws ConfigError unless every step is positive and finite.
  void validate() const;
};

struct CallCounter {
  std::size_t grad_evals = 0;
  std::size_t hvp_evals = 0;
  std::size_t peak_states = 0;

  std::size_t total() const { return grad_evals + hvp_evals; }
};

enum class EstimatorBranch { cached, recompute, fom, ufom };

struct GradientEstimate {
  Vec grad;
  CallCounter counter;
  EstimatorBranch branch = EstimatorBranch::cached;
  int xi = -1;  // UFOM only: 0 or 1
  // UFOM with xi = 1 only.
  std::optional<double> bias_sq;   // ||b_FO - b_Exact||^2
  std::optional<double> exact_sq;  // ||b_Exact||^2
};

struct Rollout {
  Vec phi;
  std::vector<Vec> trajectory;  // phi_0 .. phi_{r-1} when requested
  CallCounter counter;
};

/// Throws DivergentRollout carrying the step index on non-finite iterates.
Rollout inner_rollout(const BilevelProblem& problem, const Vec& theta, Task task,
                      const InnerSchedule& schedule, bool keep_trajectory = false);

GradientEstimate exact_gradient_cached(const BilevelProblem& problem, const Vec& theta, Task task,
                                       const InnerSchedule& schedule);

/// Same gradient as the cached version; each phi_{j-1} is recomputed from V.
GradientEstimate exact_gradient_recompute(const BilevelProblem& problem, const Vec& theta, Task task,
                                          const InnerSchedule& schedule);

GradientEstimate fom_gradient(const BilevelProblem& problem, const Vec& theta, Task task,
                              const InnerSchedule& schedule);

/// xi ~ Bernoulli(q) from rng, drawn after the forward pass. Throws ConfigError
/// unless q is in (0, 1].
GradientEstimate ufom_gradient(const BilevelProblem& problem, const Vec& theta, Task task,
                               const InnerSchedule& schedule, double q, Rng& rng);

/// UFOM with the coin outcome fixed by the caller.
GradientEstimate ufom_gradient(const BilevelProblem& problem, const Vec& theta, Task task,
                               const InnerSchedule& schedule, double q, bool xi);

/// (r + 1 + q r (r - 1) / 2, q r). q = 0 gives the FOM cost.
std::pair<double, double> expected_call_counts(std::size_t r, double q);

/// Task expectations at one theta, by enumeration of a finite task set.
struct PointStats {
  Vec exact_grad;      // dM/dtheta
  Vec fom_grad;        // E[b_FO]
  double d2 = 0.0;     // E||b_FO - b_Exact||^2
  double v2 = 0.0;     // E||b_Exact||^2
  double objective = 0.0;
};

/// Throws ConfigError for problems without a finite task set.
PointStats point_stats(const BilevelProblem& problem, const Vec& theta, const InnerSchedule& schedule);

/// dM/dtheta by enumeration. Throws ConfigError for problems without a finite task set.
Vec expected_exact_gradient(const BilevelProblem& problem, const Vec& theta, const InnerSchedule& schedule);

}  // namespace ablo
