#include "ablo/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ablo {
namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

struct TaskParams {
  double a;
  double b;
};

TaskParams params(const CounterexampleSpec& spec, int task) {
  if (task == 1) return {spec.a1, spec.b1};
  if (task == 2) return {spec.a2, spec.b2};
  throw ConfigError("counterexample: task index must be 1 or 2, got " + std::to_string(task));
}

FValues evaluate(const CounterexampleSpec& spec, int task, double x) {
  const auto [a, b] = params(spec, task);
  const double c = b / a;
  const double z = std::abs(x - c);
  const Branch br = z <= spec.A ? Branch::quadratic : (z <= spec.A + 1.0 ? Branch::cubic : Branch::linear);
  return f_on_branch(a, c, spec.A, br, x);
}

void check_base(double a1, double a2, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("counterexample: alpha must be positive");
  if (!(a1 > 0.0 && a1 < 1.0 / alpha) || !(a2 > 0.0 && a2 < 1.0 / alpha))
    throw ConfigError("counterexample: a1, a2 must lie in (0, 1/alpha)");
  if (a1 == a2) throw ConfigError("counterexample: a1 == a2 gives a degenerate family");
}

}  // namespace

FValues f_on_branch(double a, double centre, double A, Branch branch, double x) {
  const double s = sign(x - centre);
  const double z = std::abs(x - centre);
  switch (branch) {
    case Branch::quadratic:
      return {0.5 * a * z * z, a * (x - centre), a};
    case Branch::cubic: {
      const double u = z - A;
      const double f = -a / 6.0 * u * u * u + 0.5 * a * u * u + a * A * z - 0.5 * a * A * A;
      const double dz = -0.5 * a * u * u + a * u + a * A;
      return {f, s * dz, a - a * u};
    }
    case Branch::linear: {
      const double slope = 0.5 * a + a * A;
      return {slope * z - a / 6.0 - 0.5 * a * A * A - 0.5 * a * A, s * slope, 0.0};
    }
  }
  return {};
}

double f_eval(const CounterexampleSpec& spec, int task, double x) { return evaluate(spec, task, x).f; }
double f_prime(const CounterexampleSpec& spec, int task, double x) { return evaluate(spec, task, x).df; }
double f_second(const CounterexampleSpec& spec, int task, double x) { return evaluate(spec, task, x).d2f; }

void validate(const CounterexampleSpec& spec) {
  check_base(spec.a1, spec.a2, spec.alpha);
  if (!(spec.b2 > 0.0) || !std::isfinite(spec.b2)) throw ConfigError("counterexample: b2 must be positive");
  if (spec.b1 != 0.0) throw ConfigError("counterexample: b1 is fixed to 0");
  if (!(spec.A > std::abs(spec.b1 / spec.a1 - spec.b2 / spec.a2)) || !std::isfinite(spec.A))
    throw ConfigError("counterexample: A must exceed |b1/a1 - b2/a2|");
}

StationaryStats stationary_stats(const CounterexampleSpec& spec) {
  const double u1 = std::pow(1.0 - spec.alpha * spec.a1, static_cast<double>(spec.r));
  const double u2 = std::pow(1.0 - spec.alpha * spec.a2, static_cast<double>(spec.r));
  StationaryStats st;
  st.a_star = 0.5 * (spec.a1 * u1 + spec.a2 * u2);
  st.b_star = 0.5 * (spec.b1 * u1 + spec.b2 * u2);
  st.x_star = st.b_star / st.a_star;
  st.a_hat = 0.5 * (spec.a1 * u1 * u1 + spec.a2 * u2 * u2);
  st.b_hat = 0.5 * (spec.b1 * u1 * u1 + spec.b2 * u2 * u2);
  const double g = st.a_hat * st.x_star - st.b_hat;
  st.limit_grad_sq = g * g;
  return st;
}

CounterexampleSpec build_counterexample(double a1, double a2, double D, double alpha, std::size_t r) {
  check_base(a1, a2, alpha);
  if (!(D > 0.0) || !std::isfinite(D)) throw ConfigError("counterexample: D must be positive");
  const double rr = static_cast<double>(r);
  const double u1 = std::pow(1.0 - alpha * a1, rr);
  const double u2 = std::pow(1.0 - alpha * a2, rr);
  const double ratio = (a1 * u1 * u1 + a2 * u2 * u2) / (a1 * u1 + a2 * u2);
  const double denom = std::abs(ratio * u2 - u2 * u2);
  if (!(denom > 0.0)) throw ConfigError("counterexample: degenerate b2 denominator (r = 0?)");

  CounterexampleSpec spec;
  spec.a1 = a1;
  spec.a2 = a2;
  spec.b1 = 0.0;
  spec.b2 = 2.0 * std::sqrt(2.0 * D) / denom;
  spec.A = std::abs(spec.b1 / a1 - spec.b2 / a2) + 1.0;
  spec.D = D;
  spec.alpha = alpha;
  spec.r = r;
  return spec;
}

CounterexampleSpec explicit_counterexample(double a1, double a2, double b2, double A, double alpha,
                                           std::size_t r) {
  CounterexampleSpec spec;
  spec.a1 = a1;
  spec.a2 = a2;
  spec.b2 = b2;
  spec.A = A;
  spec.alpha = alpha;
  spec.r = r;
  validate(spec);
  spec.D = 0.5 * stationary_stats(spec).limit_grad_sq;
  return spec;
}

std::pair<double, double> quadratic_interval(const CounterexampleSpec& spec) {
  const double c1 = spec.b1 / spec.a1;
  const double c2 = spec.b2 / spec.a2;
  return {std::max(c1, c2) - spec.A, std::min(c1, c2) + spec.A};
}

namespace {

double closed_form(const CounterexampleSpec& spec, int task, double theta, double power) {
  const auto [lo, hi] = quadratic_interval(spec);
  if (!(theta >= lo && theta <= hi))
    throw DomainError("counterexample: closed form only valid on [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  const auto [a, b] = params(spec, task);
  return a * std::pow(1.0 - spec.alpha * a, power * static_cast<double>(spec.r)) * (theta - b / a);
}

class CounterexampleProblem final : public BilevelProblem {
 public:
  CounterexampleProblem(CounterexampleSpec spec, std::size_t p) : spec_(spec), p_(p) {}

  std::string name() const override { return "counterexample"; }
  std::size_t outer_dim() const override { return 1; }
  std::size_t inner_dim() const override { return p_; }
  std::span<const double> task_probabilities() const override { return probs_; }

  double inner_loss(const Vec&, const Vec& phi, Task t) const override { return f_eval(spec_, id(t), phi[0]); }
  double outer_loss(const Vec&, const Vec& phi, Task t) const override { return f_eval(spec_, id(t), phi[0]); }

  Vec inner_grad_phi(const Vec&, const Vec& phi, Task t) const override { return first(f_prime(spec_, id(t), phi[0])); }
  Vec outer_grad_phi(const Vec&, const Vec& phi, Task t) const override { return first(f_prime(spec_, id(t), phi[0])); }
  Vec outer_grad_theta(const Vec&, const Vec&, Task) const override { return Vec::Zero(1); }

  Vec hvp_theta_phi(const Vec&, const Vec&, Task, const Vec&) const override { return Vec::Zero(1); }
  Vec hvp_phi_phi(const Vec&, const Vec& phi, Task t, const Vec& b) const override {
    return first(f_second(spec_, id(t), phi[0]) * b[0]);
  }

  Vec start_point(const Vec& theta, Task) const override { return first(theta[0]); }
  Vec jvp_start(const Vec&, Task, const Vec& b) const override { return Vec::Constant(1, b[0]); }

  std::optional<RegularityConstants> regularity() const override {
    const double amax = std::max(spec_.a1, spec_.a2);
    return RegularityConstants{1.0, 0.0, amax * (spec_.A + 0.5), amax, amax};
  }

  Vec sample_theta(Rng& rng) const override { return Vec::Constant(1, uniform(rng, -50.0, 50.0)); }
  Vec sample_phi(Rng& rng) const override {
    Vec v(static_cast<Eigen::Index>(p_));
    for (auto& e : v) e = uniform(rng, -50.0, 50.0);
    return v;
  }

 private:
  static int id(Task t) { return static_cast<int>(t.index) + 1; }
  Vec first(double v) const {
    Vec out = Vec::Zero(static_cast<Eigen::Index>(p_));
    out[0] = v;
    return out;
  }

  CounterexampleSpec spec_;
  std::size_t p_;
  std::vector<double> probs_{0.5, 0.5};
};

}  // namespace

double closed_form_fom_grad(const CounterexampleSpec& spec, int task, double theta) {
  return closed_form(spec, task, theta, 1.0);
}

double closed_form_full_grad(const CounterexampleSpec& spec, int task, double theta) {
  return closed_form(spec, task, theta, 2.0);
}

ProblemPtr as_problem(const CounterexampleSpec& spec, std::size_t p) {
  validate(spec);
  if (p == 0) throw ConfigError("counterexample: p must be >= 1");
  return std::make_shared<CounterexampleProblem>(spec, p);
}

}  // namespace ablo
