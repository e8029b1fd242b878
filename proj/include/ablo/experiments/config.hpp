#pragma once

// Declarative experiment configuration (JSON). Every scenario has defaults;
// a config file overrides them section by section and unknown keys are errors.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ablo/counterexample.hpp"
#include "ablo/estimators.hpp"
#include "ablo/outer_loop.hpp"
#include "ablo/problem.hpp"

namespace ablo::experiments {

enum class Scenario {
  divergence,
  convergence,
  bias_variance_sweep,
  qstar_theory_vs_experiment,
  qstar_race,
  weighted_toy,
  verify,
};

std::string to_string(Scenario s);
/// Throws ConfigError on an unknown name.
Scenario scenario_from_string(const std::string& name);

struct ProblemConfig {
  // counterexample | counterexample_explicit | scalar_quadratic | weighted_toy
  std::string name = "counterexample";
  double a1 = 0.5;
  double a2 = 1.5;
  double D = 0.06;
  double b2 = 10.0;
  double A = 10.0;
  double w = 1.0;
  double v0 = 0.0;
  std::size_t n_train = 40;
  std::size_t n_val = 40;
  std::size_t dim = 5;
  double corrupted_fraction = 0.3;
  std::uint64_t data_seed = 1;
  double fold_step = 0.05;
  double alpha = 0.1;
  std::size_t r = 10;
};

struct SweepConfig {
  double alpha_lo = 1e-3;
  double alpha_hi = 5e-2;
  std::size_t alpha_points = 10;
  double grid_lo = -50.0;
  double grid_hi = 50.0;
  std::size_t grid_points = 10000;
  double q_lo = 0.02;
  double q_hi = 0.4;
  std::size_t q_points = 20;
  bool empirical = false;
};

struct RaceConfig {
  std::size_t budget = 66 * 2000;  // grad + hvp calls per replica
};

struct CostConfig {
  double C1 = 1.0;
  double C2 = 1.0;
  double epsilon = 0.0;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::divergence;
  ProblemConfig problem;
  OuterSchedule outer{OuterSchedule::Kind::harmonic, 10.0, 10000};
  double theta_lo = -10.0;
  double theta_hi = 30.0;
  std::uint64_t seed = 0;
  std::size_t replicas = 5;
  std::string out = "out";
  double ufom_q = 0.1;
  std::vector<double> convergence_qs{1.0, 0.5};
  SweepConfig sweep;
  RaceConfig race;
  AdaptiveConfig adaptive;
  CostConfig cost;

  InnerSchedule inner() const { return InnerSchedule::constant(problem.alpha, problem.r); }
  CostModel cost_model() const { return CostModel{cost.C1, cost.C2, problem.r, cost.epsilon}; }
};

/// Scenario defaults (iteration budgets, replica counts, theta_0 ranges).
ExperimentConfig default_config(Scenario s);

/// Overlays `j` on the scenario defaults. Throws ConfigError on unknown keys,
/// wrong types or invalid values.
ExperimentConfig parse_config(Scenario s, const nlohmann::json& j);
ExperimentConfig load_config(Scenario s, const std::string& path);

/// Checks ranges and cross-field constraints; throws ConfigError.
void validate(const ExperimentConfig& c);

nlohmann::json to_json(const ExperimentConfig& c);

/// Counterexample spec described by the problem section (either form).
CounterexampleSpec counterexample_spec(const ProblemConfig& p);

struct BuiltProblem {
  ProblemPtr problem;
  std::optional<CounterexampleSpec> spec;
  std::optional<SyntheticWeightedData> data;
};

BuiltProblem build_problem(const ProblemConfig& p);

}  // namespace ablo::experiments
