#include "ablo/experiments/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ablo/experiments/csv.hpp"
#include "ablo/verification.hpp"

namespace ablo::experiments {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  auto v = linspace(std::log(lo), std::log(hi), n);
  for (auto& x : v) x = std::exp(x);
  if (n > 1) {
    v.front() = lo;
    v.back() = hi;
  }
  return v;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::ufom_faster:
      return "ufom_faster";
    case Verdict::exact_faster:
      return "exact_faster";
    case Verdict::indeterminate:
      return "indeterminate";
  }
  return "indeterminate";
}

BuiltProblem require_counterexample(const ExperimentConfig& cfg, const char* scenario) {
  auto built = build_problem(cfg.problem);
  if (!built.spec) throw ConfigError(std::string(scenario) + ": needs a counterexample problem");
  return built;
}

// Expected function calls per outer step for a coin probability q (0 = FOM).
double calls_per_step(std::size_t r, double q) {
  const auto [g, h] = expected_call_counts(r, q);
  return g + h;
}

double objective_at(const BilevelProblem& pb, const Vec& theta, const InnerSchedule& inner) {
  const auto probs = pb.task_probabilities();
  double m = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const Task t{i};
    m += probs[i] * pb.outer_loss(theta, inner_rollout(pb, theta, t, inner).phi, t);
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

ScenarioResult scenario_divergence(const ExperimentConfig& cfg, Execution exec) {
  const auto built = require_counterexample(cfg, "divergence");
  const auto inner = cfg.inner();
  const auto st = stationary_stats(*built.spec);

  ScenarioResult res;
  res.summary["limit_grad_sq"] = st.limit_grad_sq;
  res.summary["x_star"] = st.x_star;
  res.summary["D"] = built.spec->D;

  const std::vector<std::pair<std::string, EstimatorChoice>> methods{{"fom", Fom{}}, {"ufom", Ufom{cfg.ufom_q}}};
  for (const auto& [label, choice] : methods) {
    const auto runs = run_replicas(*built.problem, choice, inner, cfg.outer, cfg.seed, cfg.replicas, cfg.theta_lo,
                                   cfg.theta_hi, RunOptions{}, exec);
    json reps = json::array();
    double late_sum = 0.0;
    for (const auto& run : runs) {
      const std::string name = "divergence_" + label + "_rep" + std::to_string(run.replica) + ".csv";
      CsvWriter w(join(cfg.out, name), {"seed", "replica", "k", "cum_calls", "theta", "abs_grad", "grad_norm_sq",
                                        "min_grad_norm_sq", "q", "xi", "task"});
      double min_so_far = run.rows.front().grad_norm_sq;
      for (std::size_t k = 1; k < run.rows.size(); ++k) {
        const RunRow& row = run.rows[k];
        min_so_far = std::min(min_so_far, row.grad_norm_sq);
        w.row({cell(cfg.seed), cell(run.replica), cell(row.k), cell(row.cum_calls()), cell(row.theta[0]),
               cell(std::sqrt(row.grad_norm_sq)), cell(row.grad_norm_sq), cell(min_so_far), cell(row.q),
               cell(row.xi), cell(row.task)});
      }
      res.files.push_back(name);

      // Mean of |dM|^2 over the last 10% of iterations (at least one).
      const std::size_t tau = run.rows.size() - 1;
      double late = kNaN;
      if (tau > 0) {
        const std::size_t tail = std::max<std::size_t>(1, tau / 10);
        late = 0.0;
        for (std::size_t k = tau - tail + 1; k <= tau; ++k) late += run.rows[k].grad_norm_sq;
        late /= static_cast<double>(tail);
      }
      late_sum += late;
      reps.push_back({{"replica", run.replica},
                      {"theta0", run.rows.front().theta[0]},
                      {"theta_final", run.theta_final[0]},
                      {"late_mean_grad_norm_sq", number_or_null(late)},
                      {"min_grad_norm_sq", min_so_far}});
    }
    res.summary[label] = {{"replicas", reps},
                          {"late_mean_grad_norm_sq", number_or_null(late_sum / static_cast<double>(runs.size()))}};
  }
  return res;
}

// ---------------------------------------------------------------------------

ScenarioResult scenario_convergence(const ExperimentConfig& cfg, Execution exec) {
  const auto built = require_counterexample(cfg, "convergence");
  const auto& pb = *built.problem;
  const auto inner = cfg.inner();
  const auto& sw = cfg.sweep;

  const GridStats gs = grid_sup_stats(pb, inner, sw.grid_lo, sw.grid_hi, sw.grid_points, exec);
  const double C = lipschitz_c(*pb.regularity(), inner);

  // M* estimated as the grid minimum of the objective.
  std::vector<double> objective(gs.grid.size());
  for_each_index(exec, gs.grid.size(),
                 [&](std::size_t i) { objective[i] = objective_at(pb, Vec::Constant(1, gs.grid[i]), inner); });
  const double m_star = *std::min_element(objective.begin(), objective.end());

  std::vector<double> gammas(cfg.outer.iterations);
  for (std::size_t k = 1; k <= cfg.outer.iterations; ++k) gammas[k - 1] = cfg.outer.gamma(k);

  ScenarioResult res;
  res.summary["D2_hat"] = gs.D2_hat;
  res.summary["V2_hat"] = gs.V2_hat;
  res.summary["lipschitz_c"] = C;
  res.summary["M_star_grid"] = m_star;
  json per_q = json::array();

  for (std::size_t qi = 0; qi < cfg.convergence_qs.size(); ++qi) {
    const double q = cfg.convergence_qs[qi];
    const auto runs = run_replicas(pb, Ufom{q}, inner, cfg.outer, cfg.seed, cfg.replicas, cfg.theta_lo,
                                   cfg.theta_hi, RunOptions{}, exec);
    const std::string name = "convergence_q" + format_double(q) + ".csv";
    CsvWriter w(join(cfg.out, name), {"seed", "replica", "k", "cum_calls", "q", "grad_norm_sq", "min_grad_norm_sq",
                                      "weighted_sum", "rhs"});
    std::size_t held = 0;
    std::size_t total = 0;
    for (const auto& run : runs) {
      const double m0 = objective_at(pb, run.rows.front().theta, inner);
      const double gap = std::max(0.0, m0 - m_star);
      double weighted = 0.0;
      double min_so_far = run.rows.front().grad_norm_sq;
      for (std::size_t k = 1; k < run.rows.size(); ++k) {
        const RunRow& row = run.rows[k];
        weighted += gammas[k - 1] * run.rows[k - 1].grad_norm_sq;
        min_so_far = std::min(min_so_far, row.grad_norm_sq);
        const double rhs = convergence_rhs(gap, C, q, gs.D2_hat, gs.V2_hat, std::span(gammas.data(), k));
        held += weighted <= rhs;
        ++total;
        w.row({cell(cfg.seed), cell(run.replica), cell(row.k), cell(row.cum_calls()), cell(q),
               cell(row.grad_norm_sq), cell(min_so_far), cell(weighted), cell(rhs)});
      }
    }
    res.files.push_back(name);
    per_q.push_back({{"q", q},
                     {"bound_held_fraction", total ? static_cast<double>(held) / static_cast<double>(total) : 1.0}});
  }
  res.summary["runs"] = per_q;
  return res;
}

// ---------------------------------------------------------------------------

ScenarioResult scenario_alpha_sweep(const ExperimentConfig& cfg, Execution exec) {
  const auto& sw = cfg.sweep;
  const bool empirical = sw.empirical || cfg.scenario == Scenario::qstar_theory_vs_experiment;
  if (cfg.problem.name != "counterexample" && cfg.problem.name != "counterexample_explicit")
    throw ConfigError("alpha sweep: needs a counterexample problem");

  const std::string sweep_name =
      (cfg.scenario == Scenario::qstar_theory_vs_experiment ? "qstar_theory_vs_experiment" : "bias_variance_sweep") +
      std::string(".csv");
  CsvWriter w(join(cfg.out, sweep_name),
              {"seed", "index", "alpha", "b2", "A", "D2_hat", "V2_hat", "d_bound_sq", "v_bound_sq", "verdict",
               "qstar_theory", "qstar_empirical", "ratio", "threshold", "cum_calls"});
  std::optional<CsvWriter> curves;
  if (empirical)
    curves.emplace(join(cfg.out, "qstar_curves.csv"),
                   std::vector<std::string>{"seed", "index", "alpha", "q", "k", "cum_calls", "mean_abs_grad"});

  ScenarioResult res;
  res.files.push_back(sweep_name);
  if (empirical) res.files.push_back("qstar_curves.csv");

  const auto alphas = logspace(sw.alpha_lo, sw.alpha_hi, sw.alpha_points);
  const auto q_grid = linspace(sw.q_lo, sw.q_hi, sw.q_points);
  json rows = json::array();
  std::size_t agree = 0;
  bool dominated = true;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    ProblemConfig p = cfg.problem;
    p.alpha = alphas[i];
    const auto spec = counterexample_spec(p);
    const auto pb = as_problem(spec);
    const auto inner = InnerSchedule::constant(p.alpha, p.r);
    const GridStats gs = grid_sup_stats(*pb, inner, sw.grid_lo, sw.grid_hi, sw.grid_points, exec);
    const auto reg = *pb->regularity();
    const double db = d_bound(reg, inner);
    const double vb = v_bound(reg, inner);
    const CostModel cost{cfg.cost.C1, cfg.cost.C2, p.r, cfg.cost.epsilon};
    const Verdict verdict = ufom_beats_exact(gs.D2_hat, gs.V2_hat, cost);
    const double q_theory = optimal_q(gs.D2_hat, gs.V2_hat, cost);
    dominated = dominated && gs.D2_hat <= db * db && gs.V2_hat <= vb * vb;

    double q_emp = kNaN, ratio = kNaN, threshold = kNaN, calls = kNaN;
    if (empirical) {
      QstarSetup setup{q_grid, cfg.replicas, cfg.outer, cfg.theta_lo, cfg.theta_hi, cfg.seed};
      const QstarResult qr = empirical_qstar(*pb, inner, setup, exec);
      q_emp = qr.best_q;
      threshold = qr.threshold;
      ratio = std::max(q_emp / q_theory, q_theory / q_emp);
      agree += ratio <= 2.0;
      for (const auto& cv : qr.curves) {
        if (cv.q == q_emp) calls = cv.time;
        for (std::size_t k = 0; k < cv.mean_abs_grad.size(); ++k)
          curves->row({cell(cfg.seed), cell(i), cell(p.alpha), cell(cv.q), cell(k), cell(cv.mean_calls[k]),
                       cell(cv.mean_abs_grad[k])});
      }
    }
    w.row({cell(cfg.seed), cell(i), cell(p.alpha), cell(spec.b2), cell(spec.A), cell(gs.D2_hat), cell(gs.V2_hat),
           cell(db * db), cell(vb * vb), cell(std::string(verdict_name(verdict))), cell(q_theory), cell(q_emp),
           cell(ratio), cell(threshold), cell(calls)});
    rows.push_back({{"alpha", p.alpha},
                    {"D2_hat", gs.D2_hat},
                    {"V2_hat", gs.V2_hat},
                    {"d_bound_sq", db * db},
                    {"v_bound_sq", vb * vb},
                    {"verdict", verdict_name(verdict)},
                    {"qstar_theory", q_theory},
                    {"qstar_empirical", number_or_null(q_emp)},
                    {"ratio", number_or_null(ratio)}});
  }
  res.summary["points"] = rows;
  res.summary["bounds_dominate"] = dominated;
  if (empirical)
    res.summary["agree_within_factor_2"] = static_cast<double>(agree) / static_cast<double>(alphas.size());
  return res;
}

// ---------------------------------------------------------------------------

ScenarioResult scenario_qstar_race(const ExperimentConfig& cfg, Execution exec) {
  const auto built = require_counterexample(cfg, "qstar_race");
  const auto& pb = *built.problem;
  const auto inner = cfg.inner();
  const auto& sw = cfg.sweep;
  const std::size_t r = inner.r();

  const GridStats gs = grid_sup_stats(pb, inner, sw.grid_lo, sw.grid_hi, sw.grid_points, exec);
  const CostModel cost = cfg.cost_model();
  const double q_star = optimal_q(gs.D2_hat, gs.V2_hat, cost);
  if (!(q_star > 0.0)) throw ConfigError("qstar_race: q* is zero (D^2 = 0), nothing to race");

  // Curves are sampled on a common function-call grid: each checkpoint takes the
  // value at the last snapshot whose call count does not exceed it.
  constexpr std::size_t kCheckpoints = 200;
  const std::size_t budget = cfg.race.budget;
  const double spacing = static_cast<double>(budget) / static_cast<double>(kCheckpoints);

  struct Method {
    std::string label;
    EstimatorChoice choice;
    double q;
  };
  const std::vector<Method> methods{{"fom", Fom{}, 0.0}, {"ufom_qstar", Ufom{q_star}, q_star}, {"ufom_q1", Ufom{1.0}, 1.0}};

  CsvWriter w(join(cfg.out, "qstar_race.csv"),
              {"seed", "method", "q", "index", "cum_calls", "mean_abs_grad", "std_error"});
  ScenarioResult res;
  res.files.push_back("qstar_race.csv");
  res.summary["qstar"] = q_star;
  res.summary["D2_hat"] = gs.D2_hat;
  res.summary["V2_hat"] = gs.V2_hat;

  std::vector<std::vector<double>> means(methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const Method& m = methods[mi];
    OuterSchedule outer = cfg.outer;
    outer.iterations = std::numeric_limits<std::size_t>::max() - 1;
    RunOptions opt;
    opt.diagnostics = false;
    opt.call_budget = budget;
    opt.snapshot_stride = std::max<std::size_t>(1, static_cast<std::size_t>(spacing / calls_per_step(r, m.q) / 2));

    std::vector<std::vector<double>> values(cfg.replicas, std::vector<double>(kCheckpoints + 1));
    for_each_index(exec, cfg.replicas, [&](std::size_t rep) {
      const Vec theta0 = draw_theta0(pb, cfg.seed, rep, cfg.theta_lo, cfg.theta_hi);
      const RunRecord rec = run_sgd(pb, m.choice, inner, outer, theta0, cfg.seed, opt, rep);
      auto& v = values[rep];
      std::size_t j = 0;
      double last = kNaN;
      for (const RunRow& row : rec.rows) {
        if (row.theta.size() == 0) continue;
        const double calls = static_cast<double>(row.cum_calls());
        while (j <= kCheckpoints && static_cast<double>(j) * spacing < calls) v[j++] = last;
        last = expected_exact_gradient(pb, row.theta, inner).norm();
      }
      while (j <= kCheckpoints) v[j++] = last;
    });

    auto& mean = means[mi];
    mean.assign(kCheckpoints + 1, 0.0);
    const double n = static_cast<double>(cfg.replicas);
    for (std::size_t j = 0; j <= kCheckpoints; ++j) {
      double s = 0.0, s2 = 0.0;
      for (const auto& v : values) s += v[j];
      mean[j] = s / n;
      for (const auto& v : values) s2 += (v[j] - mean[j]) * (v[j] - mean[j]);
      const double se = cfg.replicas > 1 ? std::sqrt(s2 / (n - 1.0) / n) : 0.0;
      w.row({cell(cfg.seed), cell(m.label), cell(m.q), cell(j), cell(static_cast<double>(j) * spacing),
             cell(mean[j]), cell(se)});
    }
  }

  // Target: the level exact-gradient SGD (q = 1) reaches with the full budget.
  const double target = means.back().back();
  res.summary["target"] = target;
  json calls = json::object();
  std::vector<double> hit(methods.size(), kNaN);
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t j = 0; j <= kCheckpoints; ++j)
      if (means[mi][j] <= target) {
        hit[mi] = static_cast<double>(j) * spacing;
        break;
      }
    calls[methods[mi].label] = number_or_null(hit[mi]);
  }
  res.summary["calls_to_target"] = calls;
  res.summary["qstar_faster_than_q1"] = std::isfinite(hit[1]) && hit[1] < hit[2];
  res.summary["fom_reaches_target"] = std::isfinite(hit[0]);
  return res;
}

// ---------------------------------------------------------------------------

ScenarioResult scenario_weighted_toy(const ExperimentConfig& cfg, Execution exec) {
  (void)exec;
  if (cfg.problem.name != "weighted_toy") throw ConfigError("weighted_toy: needs problem.name = weighted_toy");
  const auto built = build_problem(cfg.problem);
  const auto& pb = *built.problem;
  const auto& corrupted = built.data->corrupted;
  const auto inner = cfg.inner();
  const std::size_t r = inner.r();
  const std::size_t budget = cfg.race.budget;

  struct Method {
    std::string label;
    EstimatorChoice choice;
    double q_hint;  // for the snapshot stride only
  };
  AdaptiveConfig ad = cfg.adaptive;
  const std::vector<Method> methods{
      {"exact_recompute", ExactRecompute{}, 1.0}, {"fom", Fom{}, 0.0}, {"adaptive_ufom", AdaptiveUfom{ad}, ad.q_min}};

  CsvWriter trace(join(cfg.out, "weighted_toy_trace.csv"),
                  {"seed", "replica", "method", "k", "cum_calls", "val_loss", "mean_clean_logit",
                   "mean_corrupted_logit"});
  CsvWriter logits(join(cfg.out, "weighted_toy_logits.csv"),
                   {"seed", "replica", "method", "index", "corrupted", "logit", "cum_calls"});
  CsvWriter qtrace(join(cfg.out, "weighted_toy_adaptive_q.csv"),
                   {"seed", "replica", "k", "cum_calls", "q", "xi", "d2_bar", "v2_bar"});

  auto split_means = [&](const Vec& theta) {
    double clean = 0.0, bad = 0.0;
    std::size_t nc = 0, nb = 0;
    for (std::size_t i = 0; i < corrupted.size(); ++i) {
      const double t = theta[static_cast<Eigen::Index>(i)];
      if (corrupted[i]) {
        bad += t;
        ++nb;
      } else {
        clean += t;
        ++nc;
      }
    }
    return std::pair{nc ? clean / static_cast<double>(nc) : kNaN, nb ? bad / static_cast<double>(nb) : kNaN};
  };

  ScenarioResult res;
  res.files = {"weighted_toy_trace.csv", "weighted_toy_logits.csv", "weighted_toy_adaptive_q.csv"};
  json per_method = json::object();
  double q_lo = 1.0, q_hi = 0.0;
  std::size_t max_step_cost = 0;
  std::vector<std::vector<std::size_t>> spent(methods.size());

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const Method& m = methods[mi];
    OuterSchedule outer = cfg.outer;
    outer.iterations = std::numeric_limits<std::size_t>::max() - 1;
    RunOptions opt;
    opt.diagnostics = false;
    opt.call_budget = budget;
    opt.snapshot_stride =
        std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(budget) / 200.0 / calls_per_step(r, m.q_hint)));

    json reps = json::array();
    for (std::size_t rep = 0; rep < cfg.replicas; ++rep) {
      const Vec theta0 = draw_theta0(pb, cfg.seed, rep, cfg.theta_lo, cfg.theta_hi);
      const RunRecord rec = run_sgd(pb, m.choice, inner, outer, theta0, cfg.seed, opt, rep);
      std::size_t prev_calls = 0;
      for (const RunRow& row : rec.rows) {
        max_step_cost = std::max(max_step_cost, row.cum_calls() - prev_calls);
        prev_calls = row.cum_calls();
        if (m.label == "adaptive_ufom" && row.k > 0) {
          q_lo = std::min(q_lo, row.q);
          q_hi = std::max(q_hi, row.q);
          qtrace.row({cell(cfg.seed), cell(rep), cell(row.k), cell(row.cum_calls()), cell(row.q), cell(row.xi),
                      cell(row.d2_bar), cell(row.v2_bar)});
        }
        if (row.theta.size() == 0) continue;
        const auto [clean, bad] = split_means(row.theta);
        trace.row({cell(cfg.seed), cell(rep), cell(m.label), cell(row.k), cell(row.cum_calls()),
                   cell(objective_at(pb, row.theta, inner)), cell(clean), cell(bad)});
      }
      const std::size_t used = rec.rows.back().cum_calls();
      spent[mi].push_back(used);
      for (std::size_t i = 0; i < corrupted.size(); ++i)
        logits.row({cell(cfg.seed), cell(rep), cell(m.label), cell(i), cell(corrupted[i] ? 1 : 0),
                    cell(rec.theta_final[static_cast<Eigen::Index>(i)]), cell(used)});
      const auto [clean, bad] = split_means(rec.theta_final);
      reps.push_back({{"replica", rep},
                      {"cum_calls", used},
                      {"iterations", rec.rows.size() - 1},
                      {"val_loss_initial", objective_at(pb, theta0, inner)},
                      {"val_loss_final", objective_at(pb, rec.theta_final, inner)},
                      {"mean_clean_logit", clean},
                      {"mean_corrupted_logit", bad},
                      {"separation", clean - bad}});
    }
    per_method[m.label] = reps;
  }

  std::size_t budget_gap = 0;
  for (std::size_t rep = 0; rep < cfg.replicas; ++rep) {
    std::size_t lo = std::numeric_limits<std::size_t>::max(), hi = 0;
    for (const auto& s : spent) {
      lo = std::min(lo, s[rep]);
      hi = std::max(hi, s[rep]);
    }
    budget_gap = std::max(budget_gap, hi - lo);
  }
  res.summary["methods"] = per_method;
  res.summary["budget"] = budget;
  res.summary["budget_gap"] = budget_gap;
  res.summary["max_step_cost"] = max_step_cost;
  res.summary["adaptive_q_min"] = q_lo;
  res.summary["adaptive_q_max"] = q_hi;
  return res;
}

// ---------------------------------------------------------------------------

ScenarioResult scenario_verify(const ExperimentConfig& cfg, Execution exec) {
  const auto checks = verify_battery(cfg.seed, exec);
  CsvWriter w(join(cfg.out, "verify.csv"), {"seed", "index", "check", "passed", "detail"});
  ScenarioResult res;
  res.files.push_back("verify.csv");
  json list = json::array();
  for (std::size_t i = 0; i < checks.size(); ++i) {
    std::string detail = checks[i].detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    std::replace(detail.begin(), detail.end(), '\n', ' ');
    w.row({cell(cfg.seed), cell(i), cell(checks[i].name), cell(checks[i].passed ? 1 : 0), cell(detail)});
    list.push_back({{"check", checks[i].name}, {"passed", checks[i].passed}, {"detail", checks[i].detail}});
    res.passed = res.passed && checks[i].passed;
  }
  res.summary["checks"] = list;
  res.summary["passed"] = res.passed;
  return res;
}

// ---------------------------------------------------------------------------

ScenarioResult run_scenario(const ExperimentConfig& cfg, Execution exec) {
  validate(cfg);
  std::filesystem::create_directories(cfg.out);
  ScenarioResult res;
  switch (cfg.scenario) {
    case Scenario::divergence:
      res = scenario_divergence(cfg, exec);
      break;
    case Scenario::convergence:
      res = scenario_convergence(cfg, exec);
      break;
    case Scenario::bias_variance_sweep:
    case Scenario::qstar_theory_vs_experiment:
      res = scenario_alpha_sweep(cfg, exec);
      break;
    case Scenario::qstar_race:
      res = scenario_qstar_race(cfg, exec);
      break;
    case Scenario::weighted_toy:
      res = scenario_weighted_toy(cfg, exec);
      break;
    case Scenario::verify:
      res = scenario_verify(cfg, exec);
      break;
  }
  // No timestamps: identical config and seed give a byte-identical manifest.
  json files = json::array();
  for (const auto& f : res.files) files.push_back({{"name", f}, {"schema_version", kCsvSchemaVersion}});
  const json manifest{{"schema_version", kCsvSchemaVersion},
                      {"scenario", to_string(cfg.scenario)},
                      {"config", to_json(cfg)},
                      {"files", files},
                      {"summary", res.summary}};
  std::ofstream(join(cfg.out, "manifest.json"), std::ios::binary) << manifest.dump(2) << '\n';
  return res;
}

// ---------------------------------------------------------------------------

json qstar_report(double D2, double V2, const CostModel& cost) {
  cost.validate();
  const Verdict verdict = ufom_beats_exact(D2, V2, cost);
  const QuadCoeffs poly = qstar_quadratic(D2, V2, cost);
  const double q = optimal_q(D2, V2, cost);
  json out{{"D2", D2},
           {"V2", V2},
           {"C1", cost.C1},
           {"C2", cost.C2},
           {"r", cost.r},
           {"epsilon", cost.epsilon},
           {"C_det", cost.C_det()},
           {"C_rnd", cost.C_rnd()},
           {"threshold", ufom_threshold(cost)},
           {"verdict", verdict_name(verdict)},
           {"q_star", q},
           {"poly", {{"a", poly.a}, {"b", poly.b}, {"c", poly.c}, {"at_0", poly(0.0)}, {"at_1", poly(1.0)}}}};
  out["expected_time"] = {{"q_star", q > 0.0 ? number_or_null(expected_time(q, D2, V2, cost)) : json(nullptr)},
                          {"q_1", number_or_null(expected_time(1.0, D2, V2, cost))}};
  return out;
}

json bounds_report(const ProblemConfig& p, std::size_t grid_points, double grid_lo, double grid_hi) {
  const auto built = build_problem(p);
  const auto reg = built.problem->regularity();
  if (!reg) throw ConfigError("bounds: problem '" + p.name + "' has no analytic regularity constants");
  const auto inner = InnerSchedule::constant(p.alpha, p.r);
  const double db = d_bound(*reg, inner);
  const double vb = v_bound(*reg, inner);
  json out{{"problem", p.name},
           {"alpha", p.alpha},
           {"r", p.r},
           {"regularity", {{"M1", reg->M1}, {"M2", reg->M2}, {"L1", reg->L1}, {"L2", reg->L2}, {"L3", reg->L3}}},
           {"d_bound", db},
           {"v_bound", vb},
           {"d_bound_sq", db * db},
           {"v_bound_sq", vb * vb},
           {"lipschitz_c", lipschitz_c(*reg, inner)}};
  if (built.spec)
    out["counterexample"] = {{"a1", built.spec->a1}, {"a2", built.spec->a2}, {"b1", built.spec->b1},
                             {"b2", built.spec->b2}, {"A", built.spec->A},   {"D", built.spec->D}};
  if (grid_points >= 2 && built.problem->has_finite_tasks() && built.problem->outer_dim() == 1) {
    const GridStats gs = grid_sup_stats(*built.problem, inner, grid_lo, grid_hi, grid_points);
    out["grid"] = {{"lo", grid_lo}, {"hi", grid_hi}, {"points", grid_points}, {"D2_hat", gs.D2_hat},
                   {"V2_hat", gs.V2_hat}};
  }
  return out;
}

}  // namespace ablo::experiments
