#include <algorithm>
#include <sstream>

#include "ablo/experiments/scenarios.hpp"
#include "ablo/verification.hpp"

namespace ablo::experiments {

std::vector<NamedProblem> builtin_problems() {
  const auto reference = build_counterexample(0.5, 1.5, 0.06, 0.1, 10);
  const auto syn = make_synthetic_weighted_data(6, 8, 3, 0.3, 11);
  const auto& d = syn.data;
  std::vector<NamedProblem> out;
  out.push_back({"scalar_quadratic", make_scalar_quadratic(1.3, -0.4), InnerSchedule::constant(0.3, 5)});
  out.push_back({"weighted_toy", make_weighted_toy(6, d.features, d.labels, d.val_features, d.val_labels, 0.3),
                 InnerSchedule{{0.2, 0.1, 0.3, 0.15}}});
  out.push_back({"counterexample", as_problem(reference), InnerSchedule::constant(0.1, 10)});
  out.push_back({"counterexample_p3", as_problem(reference, 3), InnerSchedule::constant(0.1, 4)});
  return out;
}

namespace {

template <class... Args>
std::string str(const Args&... args) {
  std::ostringstream os;
  os.precision(6);
  (os << ... << args);
  return os.str();
}

VerifyCheck check(std::string name, bool ok, std::string detail) { return {std::move(name), ok, std::move(detail)}; }

}  // namespace

std::vector<VerifyCheck> verify_battery(std::uint64_t seed, Execution exec) {
  std::vector<VerifyCheck> out;
  const FDConfig fd;

  for (const auto& b : builtin_problems()) {
    Rng rng = make_rng(seed, {0x7665, std::hash<std::string>{}(b.label)});
    const FDReport rep = fd_check_gradients(*b.problem, 25, fd, rng);
    out.push_back(check("fd_oracles/" + b.label, rep.passed(), rep.summary()));

    const double lin = hvp_linearity_error(*b.problem, 25, rng);
    out.push_back(check("hvp_linearity/" + b.label, lin <= 1e-10, str("max relative deviation ", lin)));

    double worst_rc = 0.0, worst_fd = 0.0;
    for (int n = 0; n < 25; ++n) {
      const Vec theta = b.problem->sample_theta(rng);
      const Task t = b.problem->sample_task(rng);
      const Vec cached = exact_gradient_cached(*b.problem, theta, t, b.schedule).grad;
      const Vec recompute = exact_gradient_recompute(*b.problem, theta, t, b.schedule).grad;
      const Vec numeric = fd_total_gradient(*b.problem, theta, t, b.schedule, fd);
      worst_rc = std::max(worst_rc, relative_error(cached, recompute));
      if (!fd.close(cached, numeric)) worst_fd = std::max(worst_fd, relative_error(cached, numeric));
    }
    out.push_back(check("cached_eq_recompute/" + b.label, worst_rc <= 1e-12, str("max relative error ", worst_rc)));
    out.push_back(check("exact_eq_fd_total/" + b.label, worst_fd == 0.0,
                        worst_fd == 0.0 ? "all within tolerance" : str("worst failing relative error ", worst_fd)));
  }

  // Call accounting and memory on the counterexample.
  const auto spec = build_counterexample(0.5, 1.5, 0.06, 0.1, 10);
  const auto pb = as_problem(spec);
  const Vec theta = Vec::Constant(1, 3.0);
  {
    const std::size_t r = 10;
    const auto sched = InnerSchedule::constant(0.1, r);
    const auto c0 = ufom_gradient(*pb, theta, Task{0}, sched, 0.1, false).counter;
    const auto c1 = ufom_gradient(*pb, theta, Task{0}, sched, 0.1, true).counter;
    const bool ok = c0.grad_evals == r + 1 && c0.hvp_evals == 0 && c1.grad_evals == r + 1 + r * (r - 1) / 2 &&
                    c1.hvp_evals == r;
    out.push_back(check("call_accounting", ok,
                        str("xi=0: (", c0.grad_evals, ", ", c0.hvp_evals, ") xi=1: (", c1.grad_evals, ", ",
                            c1.hvp_evals, ")")));
  }
  for (std::size_t r : {1, 10, 100}) {
    const auto sched = InnerSchedule::constant(0.001, r);
    const auto cached = exact_gradient_cached(*pb, theta, Task{1}, sched).counter.peak_states;
    const auto recompute = exact_gradient_recompute(*pb, theta, Task{1}, sched).counter.peak_states;
    const auto fom = fom_gradient(*pb, theta, Task{1}, sched).counter.peak_states;
    const auto ufom = ufom_gradient(*pb, theta, Task{1}, sched, 0.5, true).counter.peak_states;
    const bool ok = cached == r && recompute <= 3 && fom <= 3 && ufom <= 3;
    out.push_back(check(str("peak_states/r=", r), ok,
                        str("cached ", cached, " recompute ", recompute, " fom ", fom, " ufom ", ufom)));
  }

  // Monte Carlo unbiasedness, plus FOM at the FOM fixed point as a negative control.
  const auto sched = InnerSchedule::constant(spec.alpha, spec.r);
  for (double th : {-4.0, 1.0, 7.5}) {
    for (double q : {0.1, 0.5}) {
      const McReport mc = mc_unbiasedness(*pb, Vec::Constant(1, th), sched, q, 20000, seed, McEstimator::ufom, exec);
      out.push_back(check(str("mc_unbiased/theta=", th, "/q=", q), mc.max_abs_z < 4.0,
                          str("max |z| ", mc.max_abs_z, " mean ", mc.mean[0], " exact ", mc.exact[0])));
    }
  }
  {
    const auto st = stationary_stats(spec);
    const McReport mc =
        mc_unbiasedness(*pb, Vec::Constant(1, st.x_star), sched, 1.0, 20000, seed, McEstimator::fom, exec);
    out.push_back(check("mc_negative_control/fom", mc.max_abs_z > 10.0,
                        str("FOM bias detected with max |z| ", mc.max_abs_z)));
  }
  return out;
}

}  // namespace ablo::experiments
