#include "ablo/estimators.hpp"

#include <cmath>
#include <string>

namespace ablo {

InnerSchedule InnerSchedule::constant(double alpha, std::size_t r) {
  InnerSchedule s{std::vector<double>(r, alpha)};
  s.validate();
  return s;
}

void InnerSchedule::validate() const {
  for (std::size_t j = 0; j < alphas.size(); ++j)
    if (!(alphas[j] > 0.0) || !std::isfinite(alphas[j]))
      throw ConfigError("inner schedule: alpha_" + std::to_string(j + 1) + " must be positive and finite");
}

namespace {

// Live/peak count of inner iterates.
struct States {
  std::size_t live = 0;
  std::size_t peak = 0;
  void hold(std::size_t n = 1) {
    live += n;
    if (live > peak) peak = live;
  }
  void drop(std::size_t n = 1) { live -= n; }
};

void check_finite(const Vec& v, std::size_t step, const char* what) {
  if (!v.allFinite()) throw DivergentRollout(step, std::string("non-finite ") + what);
}

// phi <- phi - alpha_j dL_in/dphi(theta, phi), steps first..last (1-based, inclusive).
void descend(const BilevelProblem& pb, const Vec& theta, Task t, const InnerSchedule& s, Vec& phi,
             std::size_t first, std::size_t last, CallCounter& c) {
  for (std::size_t j = first; j <= last; ++j) {
    const Vec g = pb.inner_grad_phi(theta, phi, t);
    ++c.grad_evals;
    check_finite(g, j, "inner gradient");
    phi -= s.alpha(j) * g;
    check_finite(phi, j, "inner iterate");
  }
}

struct Forward {
  Vec g_theta;  // dL_out/dtheta at phi_r
  Vec g_phi;    // dL_out/dphi at phi_r
};

Forward outer_grads(const BilevelProblem& pb, const Vec& theta, Task t, const Vec& phi_r, std::size_t r,
                    CallCounter& c) {
  Forward f{pb.outer_grad_theta(theta, phi_r, t), pb.outer_grad_phi(theta, phi_r, t)};
  ++c.grad_evals;
  check_finite(f.g_theta, r, "outer gradient");
  check_finite(f.g_phi, r, "outer gradient");
  return f;
}

Vec first_order(const BilevelProblem& pb, const Vec& theta, Task t, const Forward& f) {
  return f.g_theta + pb.jvp_start(theta, t, f.g_phi);
}

// Reverse accumulation given phi_{j-1} for j = r..1 from prev(j).
template <class Prev>
Vec backward(const BilevelProblem& pb, const Vec& theta, Task t, const InnerSchedule& s, const Forward& f,
             CallCounter& c, Prev&& prev) {
  Vec b1 = f.g_theta;
  Vec b2 = f.g_phi;
  for (std::size_t j = s.r(); j >= 1; --j) {
    const Vec& phi = prev(j);
    const double a = s.alpha(j);
    b1 -= a * pb.hvp_theta_phi(theta, phi, t, b2);
    b2 -= a * pb.hvp_phi_phi(theta, phi, t, b2);
    ++c.hvp_evals;
    check_finite(b2, j, "adjoint");
  }
  Vec g = b1 + pb.jvp_start(theta, t, b2);
  check_finite(g, 0, "hypergradient");
  return g;
}

// Forward pass shared by FOM, UFOM and recompute: one live iterate.
struct LeanForward {
  Forward f;
  CallCounter c;
};

LeanForward lean_forward(const BilevelProblem& pb, const Vec& theta, Task t, const InnerSchedule& s,
                         States& st) {
  LeanForward out;
  Vec phi = pb.start_point(theta, t);
  st.hold();
  check_finite(phi, 0, "start point");
  descend(pb, theta, t, s, phi, 1, s.r(), out.c);
  out.f = outer_grads(pb, theta, t, phi, s.r(), out.c);
  st.drop();
  return out;
}

Vec recompute_backward(const BilevelProblem& pb, const Vec& theta, Task t, const InnerSchedule& s,
                       const Forward& f, CallCounter& c, States& st) {
  Vec phi;
  st.hold();
  Vec g = backward(pb, theta, t, s, f, c, [&](std::size_t j) -> const Vec& {
    phi = pb.start_point(theta, t);
    descend(pb, theta, t, s, phi, 1, j - 1, c);
    return phi;
  });
  st.drop();
  return g;
}

}  // namespace

Rollout inner_rollout(const BilevelProblem& problem, const Vec& theta, Task task, const InnerSchedule& schedule,
                      bool keep_trajectory) {
  Rollout out;
  States st;
  Vec phi = problem.start_point(theta, task);
  st.hold();
  check_finite(phi, 0, "start point");
  if (keep_trajectory) out.trajectory.reserve(schedule.r());
  for (std::size_t j = 1; j <= schedule.r(); ++j) {
    if (keep_trajectory) {
      out.trajectory.push_back(phi);
      st.hold();
    }
    descend(problem, theta, task, schedule, phi, j, j, out.counter);
  }
  out.phi = std::move(phi);
  out.counter.peak_states = st.peak;
  return out;
}

GradientEstimate exact_gradient_cached(const BilevelProblem& problem, const Vec& theta, Task task,
                                       const InnerSchedule& schedule) {
  const std::size_t r = schedule.r();
  GradientEstimate est;
  est.branch = EstimatorBranch::cached;
  States st;

  // Stores phi_1 .. phi_{r-1}; phi_0 = V(theta) is cheap to rebuild and phi_r
  // is only needed for the outer gradients.
  std::vector<Vec> stored;
  stored.reserve(r > 0 ? r - 1 : 0);
  Vec phi = problem.start_point(theta, task);
  st.hold();
  check_finite(phi, 0, "start point");
  for (std::size_t j = 1; j <= r; ++j) {
    descend(problem, theta, task, schedule, phi, j, j, est.counter);
    if (j < r) {
      stored.push_back(phi);
      st.hold();
    }
  }
  const Forward f = outer_grads(problem, theta, task, phi, r, est.counter);
  st.drop();

  Vec phi0;
  est.grad = backward(problem, theta, task, schedule, f, est.counter, [&](std::size_t j) -> const Vec& {
    if (j >= 2) return stored[j - 2];
    phi0 = problem.start_point(theta, task);
    st.hold();
    return phi0;
  });
  est.counter.peak_states = st.peak;
  return est;
}

GradientEstimate exact_gradient_recompute(const BilevelProblem& problem, const Vec& theta, Task task,
                                          const InnerSchedule& schedule) {
  States st;
  LeanForward fw = lean_forward(problem, theta, task, schedule, st);
  GradientEstimate est;
  est.branch = EstimatorBranch::recompute;
  est.counter = fw.c;
  est.grad = recompute_backward(problem, theta, task, schedule, fw.f, est.counter, st);
  est.counter.peak_states = st.peak;
  return est;
}

GradientEstimate fom_gradient(const BilevelProblem& problem, const Vec& theta, Task task,
                              const InnerSchedule& schedule) {
  States st;
  LeanForward fw = lean_forward(problem, theta, task, schedule, st);
  GradientEstimate est;
  est.branch = EstimatorBranch::fom;
  est.counter = fw.c;
  est.grad = first_order(problem, theta, task, fw.f);
  check_finite(est.grad, schedule.r(), "first-order gradient");
  est.counter.peak_states = st.peak;
  return est;
}

namespace {

void check_q(double q) {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("ufom: q must lie in (0, 1], got " + std::to_string(q));
}

template <class Coin>
GradientEstimate ufom_impl(const BilevelProblem& problem, const Vec& theta, Task task,
                           const InnerSchedule& schedule, double q, Coin&& coin) {
  check_q(q);
  States st;
  LeanForward fw = lean_forward(problem, theta, task, schedule, st);
  GradientEstimate est;
  est.branch = EstimatorBranch::ufom;
  est.counter = fw.c;
  const Vec b_fo = first_order(problem, theta, task, fw.f);
  const bool xi = coin();
  est.xi = xi ? 1 : 0;
  if (!xi) {
    est.grad = b_fo;
  } else {
    const Vec b_e = recompute_backward(problem, theta, task, schedule, fw.f, est.counter, st);
    est.grad = b_fo + (b_e - b_fo) / q;
    est.bias_sq = (b_fo - b_e).squaredNorm();
    est.exact_sq = b_e.squaredNorm();
  }
  check_finite(est.grad, schedule.r(), "ufom gradient");
  est.counter.peak_states = st.peak;
  return est;
}

}  // namespace

GradientEstimate ufom_gradient(const BilevelProblem& problem, const Vec& theta, Task task,
                               const InnerSchedule& schedule, double q, Rng& rng) {
  return ufom_impl(problem, theta, task, schedule, q, [&] { return bernoulli(rng, q); });
}

GradientEstimate ufom_gradient(const BilevelProblem& problem, const Vec& theta, Task task,
                               const InnerSchedule& schedule, double q, bool xi) {
  return ufom_impl(problem, theta, task, schedule, q, [xi] { return xi; });
}

std::pair<double, double> expected_call_counts(std::size_t r, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("expected_call_counts: q must lie in [0, 1]");
  const double rr = static_cast<double>(r);
  return {rr + 1.0 + q * rr * (rr - 1.0) / 2.0, q * rr};
}

PointStats point_stats(const BilevelProblem& problem, const Vec& theta, const InnerSchedule& schedule) {
  const auto probs = problem.task_probabilities();
  if (probs.empty()) throw ConfigError(problem.name() + ": task expectations need a finite task set");
  const auto s = static_cast<Eigen::Index>(problem.outer_dim());
  PointStats out{Vec::Zero(s), Vec::Zero(s)};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const Task t{i};
    const double p = probs[i];
    const auto ex = exact_gradient_cached(problem, theta, t, schedule);
    const auto fo = fom_gradient(problem, theta, t, schedule);
    const Rollout ro = inner_rollout(problem, theta, t, schedule);
    out.exact_grad += p * ex.grad;
    out.fom_grad += p * fo.grad;
    out.d2 += p * (fo.grad - ex.grad).squaredNorm();
    out.v2 += p * ex.grad.squaredNorm();
    out.objective += p * problem.outer_loss(theta, ro.phi, t);
  }
  return out;
}

Vec expected_exact_gradient(const BilevelProblem& problem, const Vec& theta, const InnerSchedule& schedule) {
  const auto probs = problem.task_probabilities();
  if (probs.empty()) throw ConfigError(problem.name() + ": task expectations need a finite task set");
  Vec g = Vec::Zero(static_cast<Eigen::Index>(problem.outer_dim()));
  for (std::size_t i = 0; i < probs.size(); ++i)
    g += probs[i] * exact_gradient_cached(problem, theta, Task{i}, schedule).grad;
  return g;
}

}  // namespace ablo
