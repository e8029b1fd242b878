#include "ablo/experiments/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <nlohmann/json.hpp>

namespace ablo::experiments {

using nlohmann::json;

namespace {

constexpr std::pair<Scenario, const char*> kNames[] = {
    {Scenario::divergence, "divergence"},
    {Scenario::convergence, "convergence"},
    {Scenario::bias_variance_sweep, "bias_variance_sweep"},
    {Scenario::qstar_theory_vs_experiment, "qstar_theory_vs_experiment"},
    {Scenario::qstar_race, "qstar_race"},
    {Scenario::weighted_toy, "weighted_toy"},
    {Scenario::verify, "verify"},
};

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!obj.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw ConfigError(section + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& field, const std::string& section) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(section + "." + key + ": expected true/false");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(section + "." + key + ": expected a nonnegative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(section + "." + key + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(section + "." + key + ": expected a string");
    }
    field = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

OuterSchedule::Kind kind_from(const std::string& s) {
  if (s == "harmonic") return OuterSchedule::Kind::harmonic;
  if (s == "inverse_sqrt") return OuterSchedule::Kind::inverse_sqrt;
  if (s == "constant") return OuterSchedule::Kind::constant;
  throw ConfigError("outer.kind: expected harmonic, inverse_sqrt or constant, got '" + s + "'");
}

std::string kind_name(OuterSchedule::Kind k) {
  switch (k) {
    case OuterSchedule::Kind::harmonic:
      return "harmonic";
    case OuterSchedule::Kind::inverse_sqrt:
      return "inverse_sqrt";
    case OuterSchedule::Kind::constant:
      return "constant";
  }
  return "harmonic";
}

}  // namespace

std::string to_string(Scenario s) {
  for (const auto& [sc, name] : kNames)
    if (sc == s) return name;
  return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
  for (const auto& [sc, n] : kNames)
    if (name == n) return sc;
  throw ConfigError("unknown scenario '" + name + "'");
}

ExperimentConfig default_config(Scenario s) {
  ExperimentConfig c;
  c.scenario = s;
  c.out = "out/" + to_string(s);
  switch (s) {
    case Scenario::divergence:
    case Scenario::verify:
      break;
    case Scenario::convergence:
      c.outer = {OuterSchedule::Kind::inverse_sqrt, 1.0, 5000};
      c.replicas = 5;
      break;
    case Scenario::bias_variance_sweep:
    case Scenario::qstar_theory_vs_experiment:
      c.problem.name = "counterexample_explicit";
      c.problem.alpha = 1e-2;
      c.outer = {OuterSchedule::Kind::harmonic, 10.0, 100};
      c.theta_lo = -50.0;
      c.theta_hi = 50.0;
      c.replicas = 1000;
      c.sweep.empirical = s == Scenario::qstar_theory_vs_experiment;
      break;
    case Scenario::qstar_race:
      c.problem.name = "counterexample_explicit";
      c.problem.alpha = 1e-2;
      c.outer = {OuterSchedule::Kind::harmonic, 10.0, 1000000};
      c.theta_lo = -50.0;
      c.theta_hi = 50.0;
      c.replicas = 1000;
      break;
    case Scenario::weighted_toy:
      c.problem.name = "weighted_toy";
      c.problem.alpha = 0.05;
      c.problem.r = 10;
      c.outer = {OuterSchedule::Kind::inverse_sqrt, 20.0, 1000000};
      c.theta_lo = 0.0;
      c.theta_hi = 0.0;
      c.replicas = 1;
      c.race.budget = 200000;
      c.adaptive.bias_scale = 0.1;
      break;
  }
  return c;
}

ExperimentConfig parse_config(Scenario s, const json& j) {
  ExperimentConfig c = default_config(s);
  check_keys(j,
             {"scenario", "problem", "outer", "theta0", "seed", "replicas", "out", "ufom_q", "convergence_qs",
              "sweep", "race", "adaptive", "cost"},
             "config");
  if (j.contains("scenario")) {
    std::string name;
    read(j, "scenario", name, "config");
    if (scenario_from_string(name) != s)
      throw ConfigError("config: file is for scenario '" + name + "' but '" + to_string(s) + "' was requested");
  }
  if (j.contains("problem")) {
    const json& p = j.at("problem");
    check_keys(p,
               {"name", "a1", "a2", "D", "b2", "A", "w", "v0", "n_train", "n_val", "dim", "corrupted_fraction",
                "data_seed", "fold_step", "alpha", "r"},
               "problem");
    auto& q = c.problem;
    read(p, "name", q.name, "problem");
    read(p, "a1", q.a1, "problem");
    read(p, "a2", q.a2, "problem");
    read(p, "D", q.D, "problem");
    read(p, "b2", q.b2, "problem");
    read(p, "A", q.A, "problem");
    read(p, "w", q.w, "problem");
    read(p, "v0", q.v0, "problem");
    read(p, "n_train", q.n_train, "problem");
    read(p, "n_val", q.n_val, "problem");
    read(p, "dim", q.dim, "problem");
    read(p, "corrupted_fraction", q.corrupted_fraction, "problem");
    read(p, "data_seed", q.data_seed, "problem");
    read(p, "fold_step", q.fold_step, "problem");
    read(p, "alpha", q.alpha, "problem");
    read(p, "r", q.r, "problem");
  }
  if (j.contains("outer")) {
    const json& o = j.at("outer");
    check_keys(o, {"kind", "c", "iterations"}, "outer");
    std::string kind = kind_name(c.outer.kind);
    read(o, "kind", kind, "outer");
    c.outer.kind = kind_from(kind);
    read(o, "c", c.outer.c, "outer");
    read(o, "iterations", c.outer.iterations, "outer");
  }
  if (j.contains("theta0")) {
    const json& t = j.at("theta0");
    check_keys(t, {"lo", "hi"}, "theta0");
    read(t, "lo", c.theta_lo, "theta0");
    read(t, "hi", c.theta_hi, "theta0");
  }
  read(j, "seed", c.seed, "config");
  read(j, "replicas", c.replicas, "config");
  read(j, "out", c.out, "config");
  read(j, "ufom_q", c.ufom_q, "config");
  if (j.contains("convergence_qs")) {
    const json& qs = j.at("convergence_qs");
    if (!qs.is_array()) throw ConfigError("config.convergence_qs: expected an array of numbers");
    c.convergence_qs.clear();
    for (const auto& v : qs) {
      if (!v.is_number()) throw ConfigError("config.convergence_qs: expected an array of numbers");
      c.convergence_qs.push_back(v.get<double>());
    }
  }
  if (j.contains("sweep")) {
    const json& w = j.at("sweep");
    check_keys(w,
               {"alpha_lo", "alpha_hi", "alpha_points", "grid_lo", "grid_hi", "grid_points", "q_lo", "q_hi",
                "q_points", "empirical"},
               "sweep");
    auto& sw = c.sweep;
    read(w, "alpha_lo", sw.alpha_lo, "sweep");
    read(w, "alpha_hi", sw.alpha_hi, "sweep");
    read(w, "alpha_points", sw.alpha_points, "sweep");
    read(w, "grid_lo", sw.grid_lo, "sweep");
    read(w, "grid_hi", sw.grid_hi, "sweep");
    read(w, "grid_points", sw.grid_points, "sweep");
    read(w, "q_lo", sw.q_lo, "sweep");
    read(w, "q_hi", sw.q_hi, "sweep");
    read(w, "q_points", sw.q_points, "sweep");
    read(w, "empirical", sw.empirical, "sweep");
  }
  if (j.contains("race")) {
    const json& r = j.at("race");
    check_keys(r, {"budget"}, "race");
    read(r, "budget", c.race.budget, "race");
  }
  if (j.contains("adaptive")) {
    const json& a = j.at("adaptive");
    check_keys(a, {"beta", "q_min", "bias_scale"}, "adaptive");
    read(a, "beta", c.adaptive.beta, "adaptive");
    read(a, "q_min", c.adaptive.q_min, "adaptive");
    read(a, "bias_scale", c.adaptive.bias_scale, "adaptive");
  }
  if (j.contains("cost")) {
    const json& k = j.at("cost");
    check_keys(k, {"C1", "C2", "epsilon"}, "cost");
    read(k, "C1", c.cost.C1, "cost");
    read(k, "C2", c.cost.C2, "cost");
    read(k, "epsilon", c.cost.epsilon, "cost");
  }
  c.adaptive.C1 = c.cost.C1;
  c.adaptive.C2 = c.cost.C2;
  c.adaptive.epsilon = c.cost.epsilon;
  validate(c);
  return c;
}

ExperimentConfig load_config(Scenario s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return parse_config(s, j);
}

void validate(const ExperimentConfig& c) {
  const auto& p = c.problem;
  if (p.name != "counterexample" && p.name != "counterexample_explicit" && p.name != "scalar_quadratic" &&
      p.name != "weighted_toy")
    throw ConfigError("problem.name: unknown problem '" + p.name + "'");
  if (!(p.alpha > 0.0)) throw ConfigError("problem.alpha must be positive");
  c.outer.validate();
  if (!(c.theta_lo <= c.theta_hi)) throw ConfigError("theta0: lo must not exceed hi");
  if (c.replicas == 0) throw ConfigError("replicas must be >= 1");
  if (!(c.ufom_q > 0.0 && c.ufom_q <= 1.0)) throw ConfigError("ufom_q must lie in (0, 1]");
  for (double q : c.convergence_qs)
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("convergence_qs entries must lie in (0, 1]");
  const auto& sw = c.sweep;
  if (!(sw.alpha_lo > 0.0 && sw.alpha_lo <= sw.alpha_hi)) throw ConfigError("sweep: need 0 < alpha_lo <= alpha_hi");
  if (sw.alpha_points == 0 || sw.q_points == 0) throw ConfigError("sweep: point counts must be >= 1");
  if (sw.grid_points < 2 || !(sw.grid_lo < sw.grid_hi)) throw ConfigError("sweep: need grid_points >= 2, lo < hi");
  if (!(sw.q_lo > 0.0 && sw.q_lo <= sw.q_hi && sw.q_hi <= 1.0)) throw ConfigError("sweep: need 0 < q_lo <= q_hi <= 1");
  if (c.race.budget == 0) throw ConfigError("race.budget must be >= 1");
  c.adaptive.validate();
  c.cost_model().validate();
}

json to_json(const ExperimentConfig& c) {
  const auto& p = c.problem;
  const auto& sw = c.sweep;
  return json{
      {"scenario", to_string(c.scenario)},
      {"problem",
       {{"name", p.name}, {"a1", p.a1}, {"a2", p.a2}, {"D", p.D}, {"b2", p.b2}, {"A", p.A}, {"w", p.w},
        {"v0", p.v0}, {"n_train", p.n_train}, {"n_val", p.n_val}, {"dim", p.dim},
        {"corrupted_fraction", p.corrupted_fraction}, {"data_seed", p.data_seed}, {"fold_step", p.fold_step},
        {"alpha", p.alpha}, {"r", p.r}}},
      {"outer", {{"kind", kind_name(c.outer.kind)}, {"c", c.outer.c}, {"iterations", c.outer.iterations}}},
      {"theta0", {{"lo", c.theta_lo}, {"hi", c.theta_hi}}},
      {"seed", c.seed},
      {"replicas", c.replicas},
      {"out", c.out},
      {"ufom_q", c.ufom_q},
      {"convergence_qs", c.convergence_qs},
      {"sweep",
       {{"alpha_lo", sw.alpha_lo}, {"alpha_hi", sw.alpha_hi}, {"alpha_points", sw.alpha_points},
        {"grid_lo", sw.grid_lo}, {"grid_hi", sw.grid_hi}, {"grid_points", sw.grid_points}, {"q_lo", sw.q_lo},
        {"q_hi", sw.q_hi}, {"q_points", sw.q_points}, {"empirical", sw.empirical}}},
      {"race", {{"budget", c.race.budget}}},
      {"adaptive", {{"beta", c.adaptive.beta}, {"q_min", c.adaptive.q_min}, {"bias_scale", c.adaptive.bias_scale}}},
      {"cost", {{"C1", c.cost.C1}, {"C2", c.cost.C2}, {"epsilon", c.cost.epsilon}}},
  };
}

CounterexampleSpec counterexample_spec(const ProblemConfig& p) {
  if (p.name == "counterexample") return build_counterexample(p.a1, p.a2, p.D, p.alpha, p.r);
  if (p.name == "counterexample_explicit") return explicit_counterexample(p.a1, p.a2, p.b2, p.A, p.alpha, p.r);
  throw ConfigError("problem '" + p.name + "' is not a counterexample");
}

BuiltProblem build_problem(const ProblemConfig& p) {
  BuiltProblem out;
  if (p.name == "counterexample" || p.name == "counterexample_explicit") {
    out.spec = counterexample_spec(p);
    out.problem = as_problem(*out.spec);
  } else if (p.name == "scalar_quadratic") {
    out.problem = make_scalar_quadratic(p.w, p.v0);
  } else if (p.name == "weighted_toy") {
    out.data = make_synthetic_weighted_data(p.n_train, p.n_val, p.dim, p.corrupted_fraction, p.data_seed);
    const auto& d = out.data->data;
    out.problem = make_weighted_toy(p.n_train, d.features, d.labels, d.val_features, d.val_labels, p.fold_step);
  } else {
    throw ConfigError("problem.name: unknown problem '" + p.name + "'");
  }
  return out;
}

}  // namespace ablo::experiments
