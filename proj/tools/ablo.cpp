// ablo command-line front end.
//
//   ablo <scenario> [--config FILE] [--out DIR] [--seed N] [--replicas N] [--serial]
//   ablo qstar --d2 V --v2 V --r N [--c1 V] [--c2 V] [--eps V]
//   ablo bounds --problem NAME [--alpha V] [--r N] ...
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error, 3 runtime error.

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "ablo/experiments/config.hpp"
#include "ablo/experiments/scenarios.hpp"

namespace ex = ablo::experiments;

namespace {

struct ScenarioFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  bool serial = false;
};

int run(ex::Scenario s, const ScenarioFlags& f) {
  ex::ExperimentConfig cfg = f.config.empty() ? ex::default_config(s) : ex::load_config(s, f.config);
  if (f.out) cfg.out = *f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.replicas) cfg.replicas = *f.replicas;
  ex::validate(cfg);
  const auto res = ex::run_scenario(cfg, f.serial ? ablo::Execution::serial : ablo::Execution::parallel);
  std::cout << res.summary.dump(2) << '\n';
  if (!res.passed) {
    std::cerr << "verification failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate bilevel optimization experiments"};
  app.require_subcommand(1);

  constexpr ex::Scenario kScenarios[] = {ex::Scenario::divergence,
                                         ex::Scenario::convergence,
                                         ex::Scenario::bias_variance_sweep,
                                         ex::Scenario::qstar_theory_vs_experiment,
                                         ex::Scenario::qstar_race,
                                         ex::Scenario::weighted_toy,
                                         ex::Scenario::verify};
  std::vector<ScenarioFlags> flags(std::size(kScenarios));
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(kScenarios); ++i) {
    auto* sub = app.add_subcommand(ex::to_string(kScenarios[i]), "run the " + ex::to_string(kScenarios[i]) + " scenario");
    sub->add_option("--config", flags[i].config, "JSON config file (overrides scenario defaults)")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", flags[i].out, "output directory");
    sub->add_option("--seed", flags[i].seed, "master seed");
    sub->add_option("--replicas", flags[i].replicas, "number of replicas");
    sub->add_flag("--serial", flags[i].serial, "run replicas serially (results are identical)");
    subs.push_back(sub);
  }

  double d2 = 0.0, v2 = 0.0, c1 = 1.0, c2 = 1.0, eps = 0.0;
  std::size_t r = 0;
  auto* qstar = app.add_subcommand("qstar", "optimal UFOM probability for given D^2, V^2 and costs");
  qstar->add_option("--d2", d2, "sup expected squared FOM bias")->required();
  qstar->add_option("--v2", v2, "sup expected squared exact-gradient norm")->required();
  qstar->add_option("--r", r, "inner steps")->required();
  qstar->add_option("--c1", c1, "gradient call cost");
  qstar->add_option("--c2", c2, "HVP call cost");
  qstar->add_option("--eps", eps, "convergence-rate epsilon in [0, 0.5)");

  ex::ProblemConfig bp;
  std::size_t grid_points = 0;
  double grid_lo = -50.0, grid_hi = 50.0;
  auto* bounds = app.add_subcommand("bounds", "analytic D/V bounds and Lipschitz constant for a problem");
  bounds->add_option("--problem", bp.name, "counterexample | counterexample_explicit | scalar_quadratic")->required();
  bounds->add_option("--alpha", bp.alpha, "inner step size");
  bounds->add_option("--r", bp.r, "inner steps");
  bounds->add_option("--a1", bp.a1);
  bounds->add_option("--a2", bp.a2);
  bounds->add_option("--D", bp.D, "counterexample limit half-gap");
  bounds->add_option("--b2", bp.b2);
  bounds->add_option("--A", bp.A);
  bounds->add_option("--grid-points", grid_points, "also estimate D^2, V^2 on a grid (0 = skip)");
  bounds->add_option("--grid-lo", grid_lo);
  bounds->add_option("--grid-hi", grid_hi);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i)
      if (subs[i]->parsed()) return run(kScenarios[i], flags[i]);
    if (qstar->parsed()) {
      std::cout << ex::qstar_report(d2, v2, ablo::CostModel{c1, c2, r, eps}).dump(2) << '\n';
      return 0;
    }
    if (bounds->parsed()) {
      std::cout << ex::bounds_report(bp, grid_points, grid_lo, grid_hi).dump(2) << '\n';
      return 0;
    }
  } catch (const ablo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ablo::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
