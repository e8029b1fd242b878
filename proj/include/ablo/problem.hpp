#pragma once

// Oracle contract for approximate bi-level problems and the analytic toy problems.
//
// A problem has outer parameters theta (dimension s), inner parameters phi
// (dimension p) and a task distribution. Inner GD starts at start_point(theta, task)
// and descends inner_loss in phi; the outer objective averages outer_loss at the
// end of the rollout over tasks. All oracles are analytic and deterministic.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ablo/rng.hpp"
#include "ablo/types.hpp"

namespace ablo {

struct Task {
  std::size_t index = 0;
};

/// Global bounds on the start map and loss derivatives:
/// M1 >= |dV/dtheta|, M2 = Lipschitz(dV/dtheta), L1 >= |dL/d(theta,phi)|,
/// L2 = Lipschitz(first derivatives), L3 = Lipschitz(second derivatives).
struct RegularityConstants {
  double M1 = 0.0;
  double M2 = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
  double L3 = 0.0;
};

class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t outer_dim() const = 0;
  virtual std::size_t inner_dim() const = 0;

  /// Probabilities of a finite task set, or empty when tasks can only be sampled.
  virtual std::span<const double> task_probabilities() const = 0;
  bool has_finite_tasks() const { return !task_probabilities().empty(); }
  std::size_t task_count() const { return task_probabilities().size(); }

  /// Default draws from task_probabilities().
  virtual Task sample_task(Rng& rng) const;

  virtual double inner_loss(const Vec& theta, const Vec& phi, Task task) const = 0;
  virtual double outer_loss(const Vec& theta, const Vec& phi, Task task) const = 0;

  virtual Vec inner_grad_phi(const Vec& theta, const Vec& phi, Task task) const = 0;
  virtual Vec outer_grad_theta(const Vec& theta, const Vec& phi, Task task) const = 0;
  virtual Vec outer_grad_phi(const Vec& theta, const Vec& phi, Task task) const = 0;

  /// (d^2 L_in / dtheta dphi)^T b, an s-vector.
  virtual Vec hvp_theta_phi(const Vec& theta, const Vec& phi, Task task, const Vec& b) const = 0;
  /// (d^2 L_in / dphi^2)^T b, a p-vector.
  virtual Vec hvp_phi_phi(const Vec& theta, const Vec& phi, Task task, const Vec& b) const = 0;

  /// Inner GD starting point V(theta, task).
  virtual Vec start_point(const Vec& theta, Task task) const = 0;
  /// (dV/dtheta)^T b, an s-vector.
  virtual Vec jvp_start(const Vec& theta, Task task, const Vec& b) const = 0;

  virtual std::optional<RegularityConstants> regularity() const { return std::nullopt; }

  /// Representative points for oracle checks. Defaults to U[-1, 1] per coordinate.
  virtual Vec sample_theta(Rng& rng) const;
  virtual Vec sample_phi(Rng& rng) const;
};

using ProblemPtr = std::shared_ptr<const BilevelProblem>;

/// L_in = (phi - w theta)^2 / 2, L_out = phi^2 / 2, V = v0, one task, s = p = 1.
/// Constant-step rollout: phi_r = (1 - a)^r v0 + (1 - (1 - a)^r) w theta.
ProblemPtr make_scalar_quadratic(double w, double v0);

/// Labelled binary classification data for the sample-weighting toy.
struct WeightedToyData {
  Mat features;      // n x d
  Vec labels;        // n, entries in {0, 1}
  Mat val_features;  // m x d
  Vec val_labels;    // m, entries in {0, 1}
};

/// Sample-weighting problem. theta holds one weight logit per training sample,
/// phi a logistic-regression weight vector:
///   L_in(theta, phi)  = sum_i sigmoid(theta_i) * bce(x_i . phi, y_i)
///   L_out(theta, phi) = mean_k bce(v_k . phi+, u_k),  phi+ = phi - fold_step * dL_in/dphi
/// The last inner step is folded into L_out so that L_out depends on theta while
/// V(theta) = 0 is constant. Throws ConfigError on dimension mismatch.
ProblemPtr make_weighted_toy(std::size_t n, const Mat& features, const Vec& labels,
                             const Mat& val_features, const Vec& val_labels, double fold_step);

/// Linearly separable synthetic data with a known set of flipped training labels.
struct SyntheticWeightedData {
  WeightedToyData data;
  std::vector<bool> corrupted;  // per training sample
};

/// Gaussian features (last column is a constant bias), labels from a fixed random
/// teacher, and a fraction of training labels flipped. Validation labels are clean.
SyntheticWeightedData make_synthetic_weighted_data(std::size_t n_train, std::size_t n_val,
                                                   std::size_t dim, double corrupted_fraction,
                                                   std::uint64_t seed);

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace ablo
