#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ablo/counterexample.hpp"
#include "ablo/estimators.hpp"
#include "ablo/problem.hpp"

namespace ablo::testing {

inline CounterexampleSpec reference_spec() { return build_counterexample(0.5, 1.5, 0.06, 0.1, 10); }

struct Builtin {
  std::string label;
  ProblemPtr problem;
  InnerSchedule schedule;
};

inline ProblemPtr small_weighted_toy(double fold = 0.3) {
  const auto syn = make_synthetic_weighted_data(6, 8, 3, 0.3, 11);
  const auto& d = syn.data;
  return make_weighted_toy(6, d.features, d.labels, d.val_features, d.val_labels, fold);
}

inline std::vector<Builtin> builtins() {
  std::vector<Builtin> out;
  out.push_back({"scalar_quadratic", make_scalar_quadratic(1.3, -0.4), InnerSchedule::constant(0.3, 5)});
  out.push_back({"weighted_toy", small_weighted_toy(), InnerSchedule{{0.2, 0.1, 0.3, 0.15}}});
  out.push_back({"counterexample", as_problem(reference_spec()), InnerSchedule::constant(0.1, 10)});
  out.push_back({"counterexample_p3", as_problem(reference_spec(), 3), InnerSchedule::constant(0.1, 4)});
  return out;
}

/// Forwards to a base problem, adding a constant offset to one oracle.
class PerturbedProblem final : public BilevelProblem {
 public:
  enum class Target { inner_grad_phi, hvp_phi_phi, jvp_start };

  PerturbedProblem(ProblemPtr base, Target target, double offset)
      : base_(std::move(base)), target_(target), offset_(offset) {}

  std::string name() const override { return base_->name() + "_perturbed"; }
  std::size_t outer_dim() const override { return base_->outer_dim(); }
  std::size_t inner_dim() const override { return base_->inner_dim(); }
  std::span<const double> task_probabilities() const override { return base_->task_probabilities(); }
  double inner_loss(const Vec& t, const Vec& p, Task k) const override { return base_->inner_loss(t, p, k); }
  double outer_loss(const Vec& t, const Vec& p, Task k) const override { return base_->outer_loss(t, p, k); }
  Vec inner_grad_phi(const Vec& t, const Vec& p, Task k) const override {
    return bump(Target::inner_grad_phi, base_->inner_grad_phi(t, p, k));
  }
  Vec outer_grad_theta(const Vec& t, const Vec& p, Task k) const override { return base_->outer_grad_theta(t, p, k); }
  Vec outer_grad_phi(const Vec& t, const Vec& p, Task k) const override { return base_->outer_grad_phi(t, p, k); }
  Vec hvp_theta_phi(const Vec& t, const Vec& p, Task k, const Vec& b) const override {
    return base_->hvp_theta_phi(t, p, k, b);
  }
  Vec hvp_phi_phi(const Vec& t, const Vec& p, Task k, const Vec& b) const override {
    return bump(Target::hvp_phi_phi, base_->hvp_phi_phi(t, p, k, b));
  }
  Vec start_point(const Vec& t, Task k) const override { return base_->start_point(t, k); }
  Vec jvp_start(const Vec& t, Task k, const Vec& b) const override {
    return bump(Target::jvp_start, base_->jvp_start(t, k, b));
  }
  Vec sample_theta(Rng& rng) const override { return base_->sample_theta(rng); }
  Vec sample_phi(Rng& rng) const override { return base_->sample_phi(rng); }

 private:
  Vec bump(Target t, Vec v) const {
    if (t == target_) v.array() += offset_;
    return v;
  }

  ProblemPtr base_;
  Target target_;
  double offset_;
};

}  // namespace ablo::testing
