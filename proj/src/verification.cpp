#include "ablo/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace ablo {

double FDConfig::step(double x) const { return rel_step * std::max(1.0, std::abs(x)); }

bool FDConfig::close(const Vec& a, const Vec& b) const {
  return (a - b).norm() <= atol + rtol * std::max(a.norm(), b.norm());
}

void FDConfig::validate() const {
  if (!(rel_step > 0.0)) throw ConfigError("fd: step must be positive");
  if (!(rtol >= 0.0) || !(atol >= 0.0)) throw ConfigError("fd: tolerances must be nonnegative");
}

double relative_error(const Vec& a, const Vec& b) {
  const double scale = std::max(a.norm(), b.norm());
  const double diff = (a - b).norm();
  return scale == 0.0 ? diff : diff / scale;
}

bool FDReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const OracleCheck& c) { return c.failures == 0; });
}

std::string FDReport::summary() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << c.oracle << ": max_rel_error=" << c.max_rel_error << " failures=" << c.failures;
    if (c.failures > 0) os << " worst at " << c.worst_point;
    os << '\n';
  }
  return os.str();
}

namespace {

Vec normal_vec(std::size_t n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec v(static_cast<Eigen::Index>(n));
  for (auto& e : v) e = nd(rng);
  return v;
}

std::string describe(const Vec& theta, const Vec& phi, Task t) {
  std::ostringstream os;
  os.precision(17);
  os << "task=" << t.index << " theta=[" << theta.transpose() << "] phi=[" << phi.transpose() << "]";
  return os.str();
}

void record(OracleCheck& c, const Vec& analytic, const Vec& fd_value, const FDConfig& fd, const std::string& where) {
  const double e = relative_error(analytic, fd_value);
  const bool ok = fd.close(analytic, fd_value);
  if (!ok) ++c.failures;
  if (e > c.max_rel_error || (!ok && c.worst_point.empty())) {
    c.max_rel_error = std::max(c.max_rel_error, e);
    if (!ok || c.worst_point.empty()) c.worst_point = where;
  }
}

}  // namespace

FDReport fd_check_gradients(const BilevelProblem& problem, std::size_t samples, const FDConfig& fd, Rng& rng) {
  fd.validate();
  FDReport rep;
  for (const char* name :
       {"inner_grad_phi", "outer_grad_phi", "outer_grad_theta", "hvp_phi_phi", "hvp_theta_phi", "jvp_start"}) {
    OracleCheck c;
    c.oracle = name;
    rep.checks.push_back(c);
  }
  for (std::size_t n = 0; n < samples; ++n) {
    const Vec theta = problem.sample_theta(rng);
    const Vec phi = problem.sample_phi(rng);
    const Task t = problem.sample_task(rng);
    Vec b = normal_vec(problem.inner_dim(), rng);
    b /= b.norm();
    const std::string where = describe(theta, phi, t);

    auto in_phi = [&](const Vec& x) { return problem.inner_loss(theta, x, t); };
    auto out_phi = [&](const Vec& x) { return problem.outer_loss(theta, x, t); };
    auto out_theta = [&](const Vec& x) { return problem.outer_loss(x, phi, t); };
    record(rep.checks[0], problem.inner_grad_phi(theta, phi, t), central_gradient(in_phi, phi, fd), fd, where);
    record(rep.checks[1], problem.outer_grad_phi(theta, phi, t), central_gradient(out_phi, phi, fd), fd, where);
    record(rep.checks[2], problem.outer_grad_theta(theta, phi, t), central_gradient(out_theta, theta, fd), fd,
           where);

    // Directional difference of the inner gradient along unit b.
    const double h = fd.step(phi.cwiseAbs().maxCoeff());
    const Vec hvp_fd =
        (problem.inner_grad_phi(theta, phi + h * b, t) - problem.inner_grad_phi(theta, phi - h * b, t)) / (2.0 * h);
    record(rep.checks[3], problem.hvp_phi_phi(theta, phi, t, b), hvp_fd, fd, where);

    auto cross = [&](const Vec& x) { return problem.inner_grad_phi(x, phi, t).dot(b); };
    record(rep.checks[4], problem.hvp_theta_phi(theta, phi, t, b), central_gradient(cross, theta, fd), fd, where);

    auto start = [&](const Vec& x) { return problem.start_point(x, t).dot(b); };
    record(rep.checks[5], problem.jvp_start(theta, t, b), central_gradient(start, theta, fd), fd, where);
  }
  return rep;
}

double hvp_linearity_error(const BilevelProblem& problem, std::size_t samples, Rng& rng) {
  double worst = 0.0;
  for (std::size_t n = 0; n < samples; ++n) {
    const Vec theta = problem.sample_theta(rng);
    const Vec phi = problem.sample_phi(rng);
    const Task t = problem.sample_task(rng);
    const Vec b1 = normal_vec(problem.inner_dim(), rng);
    const Vec b2 = normal_vec(problem.inner_dim(), rng);
    const double a = uniform(rng, -3.0, 3.0);
    const Vec mix = a * b1 + b2;
    worst = std::max(worst, relative_error(problem.hvp_phi_phi(theta, phi, t, mix),
                                           a * problem.hvp_phi_phi(theta, phi, t, b1) +
                                               problem.hvp_phi_phi(theta, phi, t, b2)));
    worst = std::max(worst, relative_error(problem.hvp_theta_phi(theta, phi, t, mix),
                                           a * problem.hvp_theta_phi(theta, phi, t, b1) +
                                               problem.hvp_theta_phi(theta, phi, t, b2)));
  }
  return worst;
}

Vec fd_total_gradient(const BilevelProblem& problem, const Vec& theta, Task task, const InnerSchedule& schedule,
                      const FDConfig& fd) {
  fd.validate();
  auto unrolled = [&](const Vec& x) {
    return problem.outer_loss(x, inner_rollout(problem, x, task, schedule).phi, task);
  };
  return central_gradient(unrolled, theta, fd);
}

namespace {

// Per-coordinate running moments; batches are merged in index order.
struct Moments {
  double n = 0.0;
  Vec mean;
  Vec m2;

  explicit Moments(Eigen::Index dim) : mean(Vec::Zero(dim)), m2(Vec::Zero(dim)) {}

  void push(const Vec& x) {
    n += 1.0;
    const Vec delta = x - mean;
    mean += delta / n;
    m2 += delta.cwiseProduct(x - mean);
  }

  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    const double total = n + o.n;
    const Vec delta = o.mean - mean;
    mean += delta * (o.n / total);
    m2 += o.m2 + delta.cwiseProduct(delta) * (n * o.n / total);
    n = total;
  }
};

constexpr std::uint64_t kMcTag = 0x6d63;  // separates these streams from run streams

template <class Draw>
Moments batched_moments(Eigen::Index dim, std::size_t draws, std::uint64_t seed, Execution exec,
                        std::size_t batch, Draw&& draw) {
  if (batch == 0) throw ConfigError("monte carlo: batch size must be >= 1");
  const std::size_t n_batches = (draws + batch - 1) / batch;
  std::vector<Moments> parts(n_batches, Moments(dim));
  for_each_index(exec, n_batches, [&](std::size_t bi) {
    Rng rng = make_rng(seed, {kMcTag, bi});
    const std::size_t count = std::min(batch, draws - bi * batch);
    for (std::size_t i = 0; i < count; ++i) parts[bi].push(draw(rng));
  });
  Moments total(dim);
  for (const auto& p : parts) total.merge(p);
  return total;
}

}  // namespace

McReport mc_unbiasedness(const BilevelProblem& problem, const Vec& theta, const InnerSchedule& schedule, double q,
                         std::size_t draws, std::uint64_t seed, McEstimator estimator, Execution exec,
                         std::size_t batch) {
  const auto probs = problem.task_probabilities();
  if (probs.empty()) throw ConfigError(problem.name() + ": unbiasedness check needs a finite task set");
  if (draws < 2) throw ConfigError("mc_unbiasedness: need at least two draws");
  const auto dim = static_cast<Eigen::Index>(problem.outer_dim());

  const Moments m = batched_moments(dim, draws, seed, exec, batch, [&](Rng& rng) {
    Vec g = Vec::Zero(dim);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const Task t{i};
      const GradientEstimate e = estimator == McEstimator::ufom
                                     ? ufom_gradient(problem, theta, t, schedule, q, rng)
                                     : fom_gradient(problem, theta, t, schedule);
      g += probs[i] * e.grad;
    }
    return g;
  });

  McReport rep;
  rep.draws = draws;
  rep.mean = m.mean;
  rep.exact = expected_exact_gradient(problem, theta, schedule);
  const double nn = static_cast<double>(draws);
  rep.std_error = (m.m2 / (nn - 1.0) / nn).cwiseSqrt();
  rep.second_moment = m.m2 / nn + m.mean.cwiseProduct(m.mean);
  rep.z.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double diff = rep.mean[i] - rep.exact[i];
    if (rep.std_error[i] > 0.0) {
      rep.z[i] = diff / rep.std_error[i];
    } else {
      rep.z[i] = std::abs(diff) <= 1e-12 * std::max(1.0, std::abs(rep.exact[i]))
                     ? 0.0
                     : std::numeric_limits<double>::infinity();
    }
  }
  rep.max_abs_z = rep.z.cwiseAbs().maxCoeff();
  return rep;
}

std::pair<double, double> mc_second_moment(const BilevelProblem& problem, const Vec& theta,
                                           const InnerSchedule& schedule, double q, std::size_t draws,
                                           std::uint64_t seed, Execution exec, std::size_t batch) {
  if (draws < 2) throw ConfigError("mc_second_moment: need at least two draws");
  const Moments m = batched_moments(1, draws, seed, exec, batch, [&](Rng& rng) {
    const Task t = problem.sample_task(rng);
    return Vec::Constant(1, ufom_gradient(problem, theta, t, schedule, q, rng).grad.squaredNorm());
  });
  const double nn = static_cast<double>(draws);
  return {m.mean[0], std::sqrt(m.m2[0] / (nn - 1.0) / nn)};
}

GridStats grid_sup_stats(const BilevelProblem& problem, const InnerSchedule& schedule, double lo, double hi,
                         std::size_t n_grid, Execution exec) {
  if (problem.outer_dim() != 1) throw ConfigError("grid_sup_stats: needs a scalar theta");
  if (!problem.has_finite_tasks()) throw ConfigError("grid_sup_stats: needs a finite task set");
  if (n_grid < 2 || !(lo < hi)) throw ConfigError("grid_sup_stats: need n_grid >= 2 and lo < hi");
  GridStats gs;
  gs.grid.resize(n_grid);
  gs.d2.resize(n_grid);
  gs.v2.resize(n_grid);
  const double step = (hi - lo) / static_cast<double>(n_grid - 1);
  for_each_index(exec, n_grid, [&](std::size_t i) {
    const double x = i + 1 == n_grid ? hi : lo + step * static_cast<double>(i);
    const PointStats ps = point_stats(problem, Vec::Constant(1, x), schedule);
    gs.grid[i] = x;
    gs.d2[i] = ps.d2;
    gs.v2[i] = ps.v2;
  });
  gs.D2_hat = *std::max_element(gs.d2.begin(), gs.d2.end());
  gs.V2_hat = *std::max_element(gs.v2.begin(), gs.v2.end());
  return gs;
}

QstarResult empirical_qstar(const BilevelProblem& problem, const InnerSchedule& schedule, const QstarSetup& setup,
                            Execution exec) {
  if (setup.q_grid.empty()) throw ConfigError("empirical_qstar: empty q grid");
  if (setup.replicas == 0) throw ConfigError("empirical_qstar: replicas must be >= 1");
  for (double q : setup.q_grid)
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("empirical_qstar: q outside (0, 1]");

  const std::size_t nq = setup.q_grid.size();
  const std::size_t reps = setup.replicas;
  const std::size_t len = setup.outer.iterations + 1;
  std::vector<std::vector<double>> abs_grad(nq * reps);
  std::vector<std::vector<double>> calls(nq * reps);

  RunOptions opt;
  opt.snapshot_stride = std::numeric_limits<std::size_t>::max();
  for_each_index(exec, nq * reps, [&](std::size_t cell) {
    const std::size_t qi = cell / reps;
    const std::size_t rep = cell % reps;
    const Vec theta0 = draw_theta0(problem, setup.seed, rep, setup.theta_lo, setup.theta_hi);
    const RunRecord rec =
        run_sgd(problem, Ufom{setup.q_grid[qi]}, schedule, setup.outer, theta0, setup.seed, opt, rep);
    auto& g = abs_grad[cell];
    auto& c = calls[cell];
    g.resize(len);
    c.resize(len);
    for (std::size_t k = 0; k < len; ++k) {
      g[k] = std::sqrt(rec.rows[k].grad_norm_sq);
      c[k] = static_cast<double>(rec.rows[k].cum_calls());
    }
  });

  QstarResult res;
  res.curves.resize(nq);
  for (std::size_t qi = 0; qi < nq; ++qi) {
    QCurve& cv = res.curves[qi];
    cv.q = setup.q_grid[qi];
    cv.mean_abs_grad.assign(len, 0.0);
    cv.mean_calls.assign(len, 0.0);
    for (std::size_t rep = 0; rep < reps; ++rep)
      for (std::size_t k = 0; k < len; ++k) {
        cv.mean_abs_grad[k] += abs_grad[qi * reps + rep][k];
        cv.mean_calls[k] += calls[qi * reps + rep][k];
      }
    for (std::size_t k = 0; k < len; ++k) {
      cv.mean_abs_grad[k] /= static_cast<double>(reps);
      cv.mean_calls[k] /= static_cast<double>(reps);
    }
  }

  const auto ref = std::min_element(setup.q_grid.begin(), setup.q_grid.end()) - setup.q_grid.begin();
  res.reference_q = setup.q_grid[static_cast<std::size_t>(ref)];
  res.threshold = res.curves[static_cast<std::size_t>(ref)].mean_abs_grad.back();

  double best_time = std::numeric_limits<double>::infinity();
  res.best_q = res.reference_q;
  for (auto& cv : res.curves) {
    cv.time = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k)
      if (cv.mean_abs_grad[k] <= res.threshold) {
        cv.crossing = k;
        cv.time = cv.mean_calls[k];
        break;
      }
    if (cv.time < best_time) {
      best_time = cv.time;
      res.best_q = cv.q;
    }
  }
  return res;
}

CurveSummary summarize_abs_grad(const std::vector<RunRecord>& runs) {
  CurveSummary out;
  if (runs.empty()) return out;
  std::size_t len = 0;
  for (const auto& r : runs) len = std::max(len, r.rows.size());
  out.mean.assign(len, 0.0);
  out.std_error.assign(len, 0.0);
  out.mean_calls.assign(len, 0.0);
  const double n = static_cast<double>(runs.size());
  for (std::size_t k = 0; k < len; ++k) {
    double sum = 0.0;
    double sq = 0.0;
    double calls = 0.0;
    for (const auto& r : runs) {
      const RunRow& row = r.rows[std::min(k, r.rows.size() - 1)];
      const double g = std::sqrt(row.grad_norm_sq);
      sum += g;
      sq += g * g;
      calls += static_cast<double>(row.cum_calls());
    }
    out.mean[k] = sum / n;
    out.mean_calls[k] = calls / n;
    const double var = runs.size() > 1 ? std::max(0.0, (sq - sum * sum / n) / (n - 1.0)) : 0.0;
    out.std_error[k] = std::sqrt(var / n);
  }
  return out;
}

}  // namespace ablo
