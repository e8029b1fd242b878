#pragma once

// Experiment scenarios. Each writes CSV files plus a manifest.json into cfg.out and
// returns a JSON summary of the headline numbers. Replicas run through the
// parallel helpers; every file has a single writer on the calling thread.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ablo/experiments/config.hpp"
#include "ablo/parallel.hpp"
#include "ablo/theory.hpp"

namespace ablo::experiments {

inline constexpr int kCsvSchemaVersion = 1;

struct ScenarioResult {
  std::vector<std::string> files;  // paths relative to cfg.out
  nlohmann::json summary;
  bool passed = true;  // only `verify` can fail
};

ScenarioResult scenario_divergence(const ExperimentConfig& cfg, Execution exec = Execution::parallel);
ScenarioResult scenario_convergence(const ExperimentConfig& cfg, Execution exec = Execution::parallel);
/// Serves both bias_variance_sweep (grid stats and theory q*) and
/// qstar_theory_vs_experiment (adds empirical q* per alpha).
ScenarioResult scenario_alpha_sweep(const ExperimentConfig& cfg, Execution exec = Execution::parallel);
ScenarioResult scenario_qstar_race(const ExperimentConfig& cfg, Execution exec = Execution::parallel);
ScenarioResult scenario_weighted_toy(const ExperimentConfig& cfg, Execution exec = Execution::parallel);
ScenarioResult scenario_verify(const ExperimentConfig& cfg, Execution exec = Execution::parallel);

/// Dispatches on cfg.scenario and writes the manifest.
ScenarioResult run_scenario(const ExperimentConfig& cfg, Execution exec = Execution::parallel);

/// `ablo qstar`: q*, verdict, quadratic and expected times as JSON.
nlohmann::json qstar_report(double D2, double V2, const CostModel& cost);

/// `ablo bounds`: regularity constants, d/v bounds, Lipschitz constant and optionally
/// grid-estimated D^2, V^2 for the counterexample family.
nlohmann::json bounds_report(const ProblemConfig& p, std::size_t grid_points, double grid_lo, double grid_hi);

struct NamedProblem {
  std::string label;
  ProblemPtr problem;
  InnerSchedule schedule;
};

/// Small instances of every built-in problem, used by the verify battery.
std::vector<NamedProblem> builtin_problems();

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Property battery: finite-difference oracle checks, estimator equivalence,
/// Monte Carlo unbiasedness (with a biased negative control), call accounting.
std::vector<VerifyCheck> verify_battery(std::uint64_t seed, Execution exec = Execution::parallel);

}  // namespace ablo::experiments
