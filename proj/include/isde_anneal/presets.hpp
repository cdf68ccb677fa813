#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "isde_anneal/experiment.hpp"

namespace isde_anneal {

// Benchmark presets shared by the CLI and the acceptance suite, so the pinned
// settings and pass thresholds live in exactly one place.

inline ExperimentConfig preset_ackley_2() {
  ExperimentConfig cfg;
  cfg.objective = {"ackley", 2, {}};
  cfg.region = AdmissibleRegion::box(Vec(2, -5.0), Vec(2, 5.0), Vec(2, 0.3));
  cfg.algorithm = Algorithm::isde;
  cfg.schedule = {36.7, 0.02, 0.0351, 500};
  cfg.isde.steps_per_stage = 40;
  return cfg;
}

inline ExperimentConfig preset_ackley_32() {
  ExperimentConfig cfg;
  cfg.objective = {"ackley", 32, {}};
  cfg.region = AdmissibleRegion::box(Vec(32, -5.0), Vec(32, 5.0), Vec(32, 0.3));
  cfg.algorithm = Algorithm::approx_isde;
  cfg.schedule = {2.5, 0.02, 0.0051, 500};
  cfg.isde.steps_per_stage = 40;
  cfg.surrogate_order = 2;
  cfg.initial_control_points = 140;
  return cfg;
}

inline ExperimentConfig preset_ackley_200() {
  ExperimentConfig cfg;
  cfg.objective = {"ackley", 200, {}};
  cfg.region = AdmissibleRegion::box(Vec(200, -5.0), Vec(200, 5.0), Vec(200, 0.3));
  cfg.algorithm = Algorithm::isde;
  cfg.schedule = {2.5, 0.02, 0.0051, 500};
  cfg.isde.steps_per_stage = 40;
  return cfg;
}

inline ExperimentConfig preset_oscillator() {
  ExperimentConfig cfg;
  cfg.objective.name = "oscillator";
  cfg.objective.dimension = 4;
  cfg.region = AdmissibleRegion::box(Vec(4, 5.0), Vec(4, 40.0));
  cfg.algorithm = Algorithm::approx_isde;
  cfg.schedule = {5.0, 0.03, 0.005, 200};
  cfg.isde.steps_per_stage = 40;
  cfg.surrogate_order = 2;
  cfg.initial_control_points = 140;
  return cfg;
}

// Reference design for the oscillator suite: the box center, mirroring a
// uniform initial stiffness guess.
inline Vec oscillator_reference_point() { return Vec(4, 22.5); }

struct SuiteRow {
  std::uint64_t seed = 0;
  std::string algorithm;
  double best_value = 0.0;
  double metric = 0.0;  // the quantity the threshold applies to
  bool pass = false;
  std::uint64_t gradient_cap_events = 0;
};

struct SuiteReport {
  std::string suite;
  std::string metric_name;
  std::vector<SuiteRow> rows;
  int passes = 0;
  int required = 0;
  bool pass = false;
  double seconds = 0.0;
  // compare suite only
  double median_classical = 0.0;
  double median_isde = 0.0;
  // oscillator suite only
  double reference_cost = 0.0;
};

inline bool known_suite(const std::string& name) {
  return name == "ackley-2" || name == "ackley-32" || name == "ackley-200-compare" ||
         name == "oscillator";
}

// Runs a named suite over seeds 1..n_seeds and applies its pass rule.
inline SuiteReport run_suite(const std::string& name, int n_seeds) {
  if (!known_suite(name)) throw std::invalid_argument("unknown suite: " + name);
  if (n_seeds < 1) throw std::invalid_argument("benchmark needs >= 1 seed");
  SuiteReport report;
  report.suite = name;
  const auto t0 = std::chrono::steady_clock::now();

  if (name == "ackley-200-compare") {
    report.metric_name = "final_best";
    ExperimentConfig cfg = preset_ackley_200();
    const CostFunction cost = make_objective(cfg.objective);
    IsdeConfig base = cfg.isde;
    const ComparisonReport cmp =
        compare_equal_budget(cost, cfg.region, cfg.schedule, base, Algorithm::classical, 170,
                             Algorithm::isde, 40, /*master_seed=*/1, n_seeds);
    report.median_classical = cmp.median_first;
    report.median_isde = cmp.median_second;
    report.pass = cmp.median_second < cmp.median_first;
    for (const ComparisonRow& r : cmp.rows)
      report.rows.push_back({r.seed, algorithm_name(r.algorithm), r.final_best, r.final_best,
                             report.pass, 0});
    report.required = 0;
    report.passes = report.pass ? 1 : 0;
  } else {
    ExperimentConfig cfg;
    double threshold = 0.0;
    double fraction = 0.8;
    double reference = 1.0;
    if (name == "ackley-2") {
      cfg = preset_ackley_2();
      report.metric_name = "final_best";
      threshold = 0.5;
    } else if (name == "ackley-32") {
      cfg = preset_ackley_32();
      report.metric_name = "max_abs_component";
      threshold = 0.5;
      fraction = 0.6;
    } else {
      cfg = preset_oscillator();
      report.metric_name = "best_over_reference";
      threshold = 0.85;
      reference = oscillator_design_cost(oscillator_reference_point(),
                                         cfg.objective.oscillator);
      report.reference_cost = reference;
    }
    for (int i = 1; i <= n_seeds; ++i) {
      cfg.seed = static_cast<std::uint64_t>(i);
      const RunResult res = run_experiment(cfg);
      SuiteRow row;
      row.seed = cfg.seed;
      row.algorithm = algorithm_name(res.algorithm);
      row.best_value = res.best_value;
      row.gradient_cap_events = res.counters.gradient_cap_events;
      if (name == "ackley-2") {
        row.metric = res.best_value;
        row.pass = !res.aborted && row.metric < threshold;
      } else if (name == "ackley-32") {
        row.metric = norm_inf(res.best_point);
        const std::uint64_t budget =
            static_cast<std::uint64_t>(cfg.initial_control_points) +
            static_cast<std::uint64_t>(cfg.schedule.stages) * static_cast<std::uint64_t>(cfg.chains);
        row.pass = !res.aborted && row.metric < threshold && res.evaluations <= budget;
      } else {
        row.metric = res.best_value / reference;
        row.pass = !res.aborted && row.metric <= threshold;
      }
      if (row.pass) ++report.passes;
      report.rows.push_back(row);
    }
    report.required = static_cast<int>(std::ceil(fraction * n_seeds));
    report.pass = report.passes >= report.required;
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline void write_suite_csv(std::ostream& os, const SuiteReport& r) {
  os << "suite,algorithm,seed,best_value," << r.metric_name << ",pass\n";
  for (const SuiteRow& row : r.rows) {
    os << r.suite << ',' << row.algorithm << ',' << row.seed << ','
       << format_double(row.best_value) << ',' << format_double(row.metric) << ','
       << (row.pass ? 1 : 0) << '\n';
  }
}

inline std::string suite_verdict_line(const SuiteReport& r) {
  char buf[320];
  if (r.suite == "ackley-200-compare") {
    std::snprintf(buf, sizeof buf,
                  "[%s] %s: median isde %.6g vs classical %.6g (%.1f s)", r.suite.c_str(),
                  r.pass ? "PASS" : "FAIL", r.median_isde, r.median_classical, r.seconds);
  } else if (r.suite == "oscillator") {
    std::vector<double> improvements;
    for (const SuiteRow& row : r.rows) improvements.push_back(1.0 - row.metric);
    std::snprintf(buf, sizeof buf,
                  "[%s] %s: %d/%zu seeds passed (required %d); reference cost %.6g, median "
                  "improvement %.1f%% (%.1f s)",
                  r.suite.c_str(), r.pass ? "PASS" : "FAIL", r.passes, r.rows.size(),
                  r.required, r.reference_cost,
                  100.0 * detail::median(std::move(improvements)), r.seconds);
  } else {
    std::snprintf(buf, sizeof buf, "[%s] %s: %d/%zu seeds passed (required %d, %.1f s)",
                  r.suite.c_str(), r.pass ? "PASS" : "FAIL", r.passes, r.rows.size(),
                  r.required, r.seconds);
  }
  return buf;
}

}  // namespace isde_anneal
