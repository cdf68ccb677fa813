#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "isde_anneal/isde_anneal.hpp"

namespace ia = isde_anneal;

namespace {

int cmd_run(const std::string& config_path, long long seed_override, const std::string& out_dir) {
  ia::ExperimentConfig cfg;
  try {
    cfg = ia::load_experiment_config(config_path);
  } catch (const ia::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);

  const ia::RunResult res = ia::run_experiment(cfg);
  ia::write_artifacts(cfg, res, out_dir);
  if (res.aborted) {
    std::cerr << "run aborted: " << res.abort_reason << '\n';
    return 3;
  }
  std::printf("%s seed=%llu best=%.10g evaluations=%llu -> %s\n",
              ia::algorithm_name(res.algorithm),
              static_cast<unsigned long long>(res.seed), res.best_value,
              static_cast<unsigned long long>(res.evaluations), out_dir.c_str());
  return 0;
}

int cmd_benchmark(const std::string& suite, int seeds, const std::string& out_dir) {
  if (!ia::known_suite(suite)) {
    std::cerr << "unknown suite: " << suite
              << " (expected ackley-2 | ackley-32 | ackley-200-compare | oscillator)\n";
    return 2;
  }
  const ia::SuiteReport report = ia::run_suite(suite, seeds);
  std::filesystem::create_directories(out_dir);
  const auto csv_path = std::filesystem::path(out_dir) / (suite + "_results.csv");
  std::ofstream csv(csv_path, std::ios::binary);
  ia::write_suite_csv(csv, report);
  for (const ia::SuiteRow& row : report.rows) {
    std::printf("%s seed=%llu best=%.10g %s=%.10g %s\n", row.algorithm.c_str(),
                static_cast<unsigned long long>(row.seed), row.best_value,
                report.metric_name.c_str(), row.metric, row.pass ? "pass" : "fail");
  }
  std::puts(ia::suite_verdict_line(report).c_str());
  return report.pass ? 0 : 1;
}

int cmd_surrogate_check(int dim, int points, int order, std::uint64_t seed) {
  ia::Rng rng(seed);
  std::vector<ia::Vec> pts;
  ia::Vec values;
  const ia::Vec lo(static_cast<std::size_t>(dim), -5.0);
  const ia::Vec hi(static_cast<std::size_t>(dim), 5.0);
  for (int i = 0; i < points; ++i) {
    pts.push_back(rng.uniform_vec(lo, hi));
    values.push_back(ia::ackley(pts.back()));
  }

  ia::PolyharmonicSurrogate s = [&] {
    try {
      return ia::PolyharmonicSurrogate::fit(pts, values, order);
    } catch (const ia::FitError& e) {
      std::fprintf(stderr, "fit failed: %s (condition estimate %.3g)\n", e.what(),
                   e.condition_estimate());
      std::exit(3);
    }
  }();

  double interp_resid = 0.0;
  for (int i = 0; i < points; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    interp_resid = std::max(interp_resid, std::abs(s.predict(pts[ii]) - values[ii]) /
                                              (1.0 + std::abs(values[ii])));
  }
  double wsum = 0.0;
  for (double w : s.weights()) wsum += w;
  const double wsum_resid = std::abs(wsum - s.weight_sum_target());

  // Central differences of the prediction at probes kept away from the
  // control points.
  double grad_err = 0.0;
  int probes = 0;
  while (probes < 100) {
    ia::Vec a = rng.uniform_vec(lo, hi);
    if (s.nearest_distance(a) < 1e-3) continue;
    ++probes;
    const ia::Vec g = s.gradient(a);
    ia::Vec fd(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double h = 1e-6 * (1.0 + std::abs(a[i]));
      ia::Vec p = a;
      p[i] = a[i] + h;
      const double fp = s.predict(p);
      p[i] = a[i] - h;
      const double fm = s.predict(p);
      fd[i] = (fp - fm) / (2.0 * h);
    }
    double diff2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = g[i] - fd[i];
      diff2 += d * d;
    }
    const double rel = std::sqrt(diff2) / std::max(ia::norm(fd), 1e-8);
    grad_err = std::max(grad_err, rel);
  }

  const double wsum_tol = 1e-10 * s.weight_sum_target() * points;
  std::printf("control points        : %d (dimension %d, order %d)\n", points, dim, order);
  std::printf("condition estimate    : %.6g\n", s.condition_estimate());
  std::printf("interpolation residual: %.6g (tolerance 1e-8) %s\n", interp_resid,
              interp_resid < 1e-8 ? "PASS" : "FAIL");
  std::printf("weight-sum residual   : %.6g (tolerance %.3g) %s\n", wsum_resid, wsum_tol,
              wsum_resid < wsum_tol ? "PASS" : "FAIL");
  std::printf("gradient max rel err  : %.6g (tolerance 1e-5) %s\n", grad_err,
              grad_err < 1e-5 ? "PASS" : "FAIL");
  return (interp_resid < 1e-8 && wsum_resid < wsum_tol && grad_err < 1e-5) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated annealing with an Ito-SDE sampler and a polyharmonic surrogate"};
  app.require_subcommand(1);

  std::string config_path;
  long long seed_override = -1;
  std::string out_dir = "out";
  CLI::App* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--out", out_dir, "output directory");

  std::string suite;
  int seeds = 10;
  std::string bench_out = "out";
  CLI::App* bench = app.add_subcommand("benchmark", "run a preset suite over several seeds");
  bench->add_option("suite", suite, "ackley-2 | ackley-32 | ackley-200-compare | oscillator")
      ->required();
  bench->add_option("--seeds", seeds, "number of seeds");
  bench->add_option("--out", bench_out, "output directory");

  int dim = 4;
  int points = 50;
  int order = 2;
  std::uint64_t sc_seed = 1;
  CLI::App* check = app.add_subcommand("surrogate-check", "fit diagnostics on random samples");
  check->add_option("--dim", dim, "dimension");
  check->add_option("--points", points, "number of control points");
  check->add_option("--order", order, "spline order (>= 2)");
  check->add_option("--seed", sc_seed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seed_override, out_dir);
    if (bench->parsed()) return cmd_benchmark(suite, seeds, bench_out);
    if (check->parsed()) {
      if (order < 2 || dim < 1 || points < 1) {
        std::cerr << "surrogate-check: need --dim >= 1, --points >= 1, --order >= 2\n";
        return 2;
      }
      return cmd_surrogate_check(dim, points, order, sc_seed);
    }
  } catch (const ia::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
