#include "ablo/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ablo {

Task BilevelProblem::sample_task(Rng& rng) const {
  const auto probs = task_probabilities();
  if (probs.empty()) throw ConfigError(name() + ": no task distribution to sample from");
  if (probs.size() == 1) return Task{0};
  std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
  return Task{pick(rng)};
}

Vec BilevelProblem::sample_theta(Rng& rng) const {
  Vec v(static_cast<Eigen::Index>(outer_dim()));
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

Vec BilevelProblem::sample_phi(Rng& rng) const {
  Vec v(static_cast<Eigen::Index>(inner_dim()));
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

namespace {

class ScalarQuadratic final : public BilevelProblem {
 public:
  ScalarQuadratic(double w, double v0) : w_(w), v0_(v0) {}

  std::string name() const override { return "scalar_quadratic"; }
  std::size_t outer_dim() const override { return 1; }
  std::size_t inner_dim() const override { return 1; }
  std::span<const double> task_probabilities() const override { return probs_; }

  double inner_loss(const Vec& theta, const Vec& phi, Task) const override {
    const double d = phi[0] - w_ * theta[0];
    return 0.5 * d * d;
  }
  double outer_loss(const Vec&, const Vec& phi, Task) const override {
    return 0.5 * phi[0] * phi[0];
  }
  Vec inner_grad_phi(const Vec& theta, const Vec& phi, Task) const override {
    return Vec::Constant(1, phi[0] - w_ * theta[0]);
  }
  Vec outer_grad_theta(const Vec&, const Vec&, Task) const override { return Vec::Zero(1); }
  Vec outer_grad_phi(const Vec&, const Vec& phi, Task) const override { return phi; }
  Vec hvp_theta_phi(const Vec&, const Vec&, Task, const Vec& b) const override {
    return -w_ * b;
  }
  Vec hvp_phi_phi(const Vec&, const Vec&, Task, const Vec& b) const override { return b; }
  Vec start_point(const Vec&, Task) const override { return Vec::Constant(1, v0_); }
  Vec jvp_start(const Vec&, Task, const Vec&) const override { return Vec::Zero(1); }

  // L1 is unbounded: the inner gradient grows linearly in phi - w theta.
  std::optional<RegularityConstants> regularity() const override {
    return RegularityConstants{0.0, 0.0, std::numeric_limits<double>::infinity(),
                               std::max(1.0, std::abs(w_)), 0.0};
  }

  Vec sample_theta(Rng& rng) const override { return Vec::Constant(1, uniform(rng, -5, 5)); }
  Vec sample_phi(Rng& rng) const override { return Vec::Constant(1, uniform(rng, -5, 5)); }

 private:
  double w_;
  double v0_;
  std::vector<double> probs_{1.0};
};

}  // namespace

ProblemPtr make_scalar_quadratic(double w, double v0) {
  if (!std::isfinite(w) || !std::isfinite(v0)) throw ConfigError("scalar_quadratic: non-finite parameter");
  return std::make_shared<ScalarQuadratic>(w, v0);
}

}  // namespace ablo
