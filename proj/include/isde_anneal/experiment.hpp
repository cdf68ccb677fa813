#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isde_anneal/annealing.hpp"
#include "isde_anneal/serialization.hpp"

namespace isde_anneal {

// ISDE_ANNEAL_THREADS caps chain parallelism; 0 means hardware concurrency.
inline int thread_cap_from_env() {
  if (const char* s = std::getenv("ISDE_ANNEAL_THREADS")) {
    const int v = std::atoi(s);
    if (v > 0) return v;
  }
  return 0;
}

struct ObjectiveSpec {
  std::string name = "ackley";  // "ackley" | "oscillator"
  std::size_t dimension = 2;
  OscillatorConfig oscillator;
};

// Everything a run needs, validated up front so a bad config is reported as
// one aggregated list and nothing partial ever executes.
struct ExperimentConfig {
  ObjectiveSpec objective;
  AdmissibleRegion region;
  Algorithm algorithm = Algorithm::isde;
  AnnealSchedule schedule;
  IsdeConfig isde;
  int surrogate_order = 2;
  int initial_control_points = 140;
  double weight_sum_target = 0.0;
  double min_separation = 0.0;
  int chains = 1;
  std::uint64_t seed = 1;
  std::optional<SeedBox> seed_box;
};

inline CostFunction make_objective(const ObjectiveSpec& spec) {
  if (spec.name == "ackley") return make_ackley(spec.dimension);
  if (spec.name == "oscillator") return make_oscillator(spec.oscillator);
  throw std::invalid_argument("unknown objective: " + spec.name);
}

namespace detail {

template <typename T>
bool read_field(const json& j, const char* key, T& out, std::vector<std::string>& issues,
                const char* section) {
  if (!j.contains(key)) return false;
  try {
    out = j.at(key).get<T>();
    return true;
  } catch (const std::exception&) {
    issues.push_back(std::string(section) + "." + key + " has the wrong type");
    return false;
  }
}

}  // namespace detail

// Parses and validates a config, collecting every problem before failing.
inline ExperimentConfig parse_experiment_config(const json& j) {
  std::vector<std::string> issues;
  ExperimentConfig cfg;

  // objective
  if (!j.contains("objective")) {
    issues.push_back("missing \"objective\" section");
  } else {
    const json& jo = j.at("objective");
    detail::read_field(jo, "name", cfg.objective.name, issues, "objective");
    if (cfg.objective.name == "ackley") {
      long long dim = 2;
      detail::read_field(jo, "dimension", dim, issues, "objective");
      if (dim < 1)
        issues.push_back("objective.dimension must be >= 1");
      else
        cfg.objective.dimension = static_cast<std::size_t>(dim);
    } else if (cfg.objective.name == "oscillator") {
      cfg.objective.dimension = 4;
      OscillatorConfig& oc = cfg.objective.oscillator;
      detail::read_field(jo, "mass1", oc.mass1, issues, "objective");
      detail::read_field(jo, "mass2", oc.mass2, issues, "objective");
      detail::read_field(jo, "damping_ratio", oc.damping_ratio, issues, "objective");
      detail::read_field(jo, "time_step", oc.time_step, issues, "objective");
      detail::read_field(jo, "duration", oc.duration, issues, "objective");
      detail::read_field(jo, "blow_up_threshold", oc.blow_up_threshold, issues, "objective");
      detail::read_field(jo, "forcing_angle_deg", oc.forcing_angle_deg, issues, "objective");
      detail::read_field(jo, "forcing_amplitude", oc.forcing_amplitude, issues, "objective");
      detail::read_field(jo, "forcing_frequency", oc.forcing_frequency, issues, "objective");
      detail::read_field(jo, "forcing_phase", oc.forcing_phase, issues, "objective");
      if (!(oc.time_step > 0.0) || !(oc.duration > 0.0))
        issues.push_back("objective: oscillator time step and duration must be > 0");
    } else {
      issues.push_back("objective.name must be \"ackley\" or \"oscillator\"");
    }
  }

  // region
  bool have_region = false;
  if (!j.contains("region")) {
    issues.push_back("missing \"region\" section");
  } else {
    try {
      cfg.region = region_from_json(j.at("region"));
      have_region = true;
    } catch (const std::exception& e) {
      issues.push_back(std::string("region: ") + e.what());
    }
  }
  if (have_region && cfg.region.dimension() != cfg.objective.dimension)
    issues.push_back("region dimension does not match the objective dimension");

  // algorithm
  std::string alg = "isde";
  detail::read_field(j, "algorithm", alg, issues, "config");
  if (alg == "classical")
    cfg.algorithm = Algorithm::classical;
  else if (alg == "isde")
    cfg.algorithm = Algorithm::isde;
  else if (alg == "approx-isde")
    cfg.algorithm = Algorithm::approx_isde;
  else
    issues.push_back("algorithm must be one of classical | isde | approx-isde");

  // schedule
  if (!j.contains("schedule")) {
    issues.push_back("missing \"schedule\" section");
  } else {
    const json& js = j.at("schedule");
    detail::read_field(js, "initial_temperature", cfg.schedule.initial_temperature, issues,
                       "schedule");
    detail::read_field(js, "decay_rate", cfg.schedule.decay_rate, issues, "schedule");
    detail::read_field(js, "floor", cfg.schedule.floor, issues, "schedule");
    detail::read_field(js, "stages", cfg.schedule.stages, issues, "schedule");
    try {
      cfg.schedule.validate();
    } catch (const std::exception& e) {
      issues.push_back(e.what());
    }
  }

  // isde block
  if (j.contains("isde")) {
    const json& ji = j.at("isde");
    detail::read_field(ji, "spectral_divisor", cfg.isde.spectral_divisor, issues, "isde");
    detail::read_field(ji, "damping_ratio", cfg.isde.damping_ratio, issues, "isde");
    detail::read_field(ji, "steps_per_stage", cfg.isde.steps_per_stage, issues, "isde");
    detail::read_field(ji, "gradient_cap", cfg.isde.gradient_cap, issues, "isde");
    detail::read_field(ji, "max_step", cfg.isde.max_step, issues, "isde");
  }
  if (cfg.isde.spectral_divisor <= 10) issues.push_back("isde.spectral_divisor must be > 10");
  if (!(cfg.isde.damping_ratio > 0.0 && cfg.isde.damping_ratio < 1.0))
    issues.push_back("isde.damping_ratio must lie in (0, 1)");
  if (cfg.isde.steps_per_stage < 1) issues.push_back("isde.steps_per_stage must be >= 1");
  if (!(cfg.isde.gradient_cap > 0.0)) issues.push_back("isde.gradient_cap must be > 0");
  if (!(cfg.isde.max_step > 0.0)) issues.push_back("isde.max_step must be > 0");

  // surrogate block
  if (j.contains("surrogate")) {
    const json& js = j.at("surrogate");
    detail::read_field(js, "order", cfg.surrogate_order, issues, "surrogate");
    detail::read_field(js, "initial_points", cfg.initial_control_points, issues, "surrogate");
    detail::read_field(js, "weight_sum_target", cfg.weight_sum_target, issues, "surrogate");
    detail::read_field(js, "min_separation", cfg.min_separation, issues, "surrogate");
  }
  if (cfg.surrogate_order < 2) issues.push_back("surrogate.order must be >= 2");
  if (cfg.weight_sum_target < 0.0) issues.push_back("surrogate.weight_sum_target must be >= 0");
  if (cfg.min_separation < 0.0) issues.push_back("surrogate.min_separation must be >= 0");
  if (cfg.algorithm == Algorithm::approx_isde &&
      cfg.initial_control_points < static_cast<int>(cfg.objective.dimension) + 2)
    issues.push_back("surrogate.initial_points must be >= dimension + 2");

  detail::read_field(j, "chains", cfg.chains, issues, "config");
  if (cfg.chains < 1) issues.push_back("chains must be >= 1");
  if (cfg.chains > 1 && cfg.algorithm != Algorithm::approx_isde)
    issues.push_back("chains > 1 is only supported by approx-isde");
  detail::read_field(j, "seed", cfg.seed, issues, "config");

  if (j.contains("seed_box")) {
    SeedBox sb;
    const json& jb = j.at("seed_box");
    detail::read_field(jb, "lower", sb.lower, issues, "seed_box");
    detail::read_field(jb, "upper", sb.upper, issues, "seed_box");
    cfg.seed_box = std::move(sb);
  }
  if (have_region && cfg.region.kind == RegionKind::positive && !cfg.seed_box)
    issues.push_back("positivity regions require a bounded \"seed_box\"");

  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path});
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  return parse_experiment_config(j);
}

inline RunResult run_experiment(const ExperimentConfig& cfg) {
  const CostFunction cost = make_objective(cfg.objective);
  switch (cfg.algorithm) {
    case Algorithm::classical: {
      ClassicalSaOptions o;
      o.schedule = cfg.schedule;
      o.steps_per_stage = cfg.isde.steps_per_stage;
      o.spectral = cfg.isde;
      o.seed_box = cfg.seed_box;
      return classical_sa(cost, cfg.region, o, cfg.seed);
    }
    case Algorithm::isde: {
      IsdeSaOptions o;
      o.schedule = cfg.schedule;
      o.isde = cfg.isde;
      o.seed_box = cfg.seed_box;
      return isde_sa(cost, cfg.region, o, cfg.seed);
    }
    case Algorithm::approx_isde: {
      ApproxIsdeSaOptions o;
      o.schedule = cfg.schedule;
      o.isde = cfg.isde;
      o.surrogate_order = cfg.surrogate_order;
      o.initial_control_points = cfg.initial_control_points;
      o.weight_sum_target = cfg.weight_sum_target;
      o.min_separation = cfg.min_separation;
      o.chains = cfg.chains;
      o.max_threads = thread_cap_from_env();
      o.seed_box = cfg.seed_box;
      return approx_isde_sa(cost, cfg.region, o, cfg.seed);
    }
  }
  throw std::logic_error("unreachable algorithm dispatch");
}

inline json experiment_summary(const ExperimentConfig& cfg, const RunResult& res) {
  json j = summary_to_json(res);
  j["objective"] = cfg.objective.name;
  j["dimension"] = cfg.objective.dimension;
  j["chains"] = cfg.chains;
  j["stream_derivation"] = "splitmix64(seed + splitmix64(stream)); stream 0 = driver, 1+c = chain c";
  return j;
}

// Writes trace.csv, summary.json and (for approx runs) surrogate.json.
inline void write_artifacts(const ExperimentConfig& cfg, const RunResult& res,
                            const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  {
    std::ofstream trace(dir / "trace.csv", std::ios::binary);
    if (!trace) throw std::runtime_error("cannot write trace.csv in " + out_dir);
    write_trace_csv(trace, res);
  }
  {
    std::ofstream summary(dir / "summary.json");
    if (!summary) throw std::runtime_error("cannot write summary.json in " + out_dir);
    summary << experiment_summary(cfg, res).dump(2) << '\n';
  }
  if (res.final_surrogate) save_surrogate(*res.final_surrogate, (dir / "surrogate.json").string());
}

}  // namespace isde_anneal
