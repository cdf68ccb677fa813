#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "isde_anneal/constraints.hpp"
#include "isde_anneal/errors.hpp"
#include "isde_anneal/isde.hpp"
#include "isde_anneal/linalg.hpp"
#include "isde_anneal/objectives.hpp"
#include "isde_anneal/rng.hpp"
#include "isde_anneal/surrogate.hpp"

namespace isde_anneal {

// Exponential-decay temperature law T_k = T1 exp(-beta k) + b, indexed from
// k = 1, so the first realized temperature already includes one decay step.
struct AnnealSchedule {
  double initial_temperature = 1.0;  // T1
  double decay_rate = 0.02;          // beta
  double floor = 0.0;                // b
  int stages = 100;                  // n_t

  void validate() const {
    if (!(initial_temperature > 0.0))
      throw std::invalid_argument("schedule: initial temperature must be > 0");
    if (!(decay_rate >= 0.0)) throw std::invalid_argument("schedule: decay rate must be >= 0");
    if (!(floor >= 0.0)) throw std::invalid_argument("schedule: floor must be >= 0");
    if (stages < 1) throw std::invalid_argument("schedule: needs at least one stage");
  }
};

inline double temperature(int k, const AnnealSchedule& s) {
  if (k < 1 || k > s.stages) throw std::invalid_argument("temperature: stage out of range");
  return s.initial_temperature * std::exp(-s.decay_rate * static_cast<double>(k)) + s.floor;
}

enum class Algorithm { classical, isde, approx_isde };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::classical: return "classical";
    case Algorithm::isde: return "isde";
    case Algorithm::approx_isde: return "approx-isde";
  }
  return "unknown";
}

// Cumulative event tallies; snapshotted into every trace row so the summary
// stays fully re-derivable from the trace.
struct RunCounters {
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  std::uint64_t uphill_accepted = 0;
  std::uint64_t divergence_retries = 0;
  std::uint64_t gradient_cap_events = 0;
  std::uint64_t enrichment_skips = 0;
  std::uint64_t rejected_duplicates = 0;
};

struct TraceRow {
  int stage = 0;
  double temperature = 0.0;
  Vec point;
  std::optional<double> exact_cost;
  std::optional<double> surrogate_cost;
  double best_cost = 0.0;
  Vec best_point;
  std::uint64_t evaluations = 0;
  RunCounters counters;
};

struct RunResult {
  Algorithm algorithm = Algorithm::classical;
  std::uint64_t seed = 0;
  Vec best_point;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<TraceRow> trace;
  std::uint64_t evaluations = 0;
  RunCounters counters;
  bool aborted = false;
  std::string abort_reason;
  // Enriched interpolant at the end of an approx-isde run (for checkpoints).
  std::shared_ptr<const PolyharmonicSurrogate> final_surrogate;
};

struct SeedBox {
  Vec lower;
  Vec upper;
};

// Box used to draw initial states (and initial control points). Defaults to
// the region itself; positivity regions have no bounded box, so a seed box is
// mandatory there.
inline SeedBox effective_seed_box(const AdmissibleRegion& region,
                                  const std::optional<SeedBox>& requested) {
  if (requested) {
    if (requested->lower.size() != region.dimension() ||
        requested->upper.size() != region.dimension())
      throw std::invalid_argument("seed box dimension mismatch");
    for (std::size_t i = 0; i < requested->lower.size(); ++i) {
      if (!(requested->lower[i] < requested->upper[i]))
        throw std::invalid_argument("seed box requires lower < upper");
    }
    return *requested;
  }
  if (region.kind == RegionKind::box) return {region.lower, region.upper};
  throw std::invalid_argument("positivity regions need an explicit bounded seed box");
}

inline bool metropolis_accept(double delta, double temperature, Rng& rng) {
  if (delta < 0.0) return true;
  return rng.uniform01() < std::exp(-delta / temperature);
}

namespace detail {

inline void track_best(RunResult& res, const Vec& point, double value) {
  if (value < res.best_value) {
    res.best_value = value;
    res.best_point = point;
  }
}

inline void push_row(RunResult& res, int stage, double temp, const Vec& point,
                     std::optional<double> exact, std::optional<double> surrogate_cost,
                     std::uint64_t evals) {
  res.trace.push_back({stage, temp, point, exact, surrogate_cost, res.best_value,
                       res.best_point, evals, res.counters});
}

// Runs f(0..count-1), possibly on worker threads; f must not throw for
// expected domain failures (those are recorded per index by the caller).
template <typename F>
void parallel_for(int count, int max_threads, F&& f) {
  int workers = max_threads > 0 ? max_threads
                                : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          f(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Classical simulated annealing: Metropolis random walk whose proposal scale
// follows the same spectral rule as the ISDE step, re-derived each stage.
// Proposals outside the hard region are rejected outright.
// ---------------------------------------------------------------------------

struct ClassicalSaOptions {
  AnnealSchedule schedule;
  int steps_per_stage = 2;  // M_k; a stage makes M_k - 1 proposals
  IsdeConfig spectral;      // only the tuning fields are consulted
  std::optional<SeedBox> seed_box;
};

inline RunResult classical_sa(const CostFunction& cost, const AdmissibleRegion& region,
                              const ClassicalSaOptions& opts, std::uint64_t seed) {
  opts.schedule.validate();
  if (opts.steps_per_stage < 1)
    throw std::invalid_argument("classical_sa: steps per stage must be >= 1");
  const SeedBox sb = effective_seed_box(region, opts.seed_box);

  RunResult res;
  res.algorithm = Algorithm::classical;
  res.seed = seed;
  Rng rng = Rng::derive(seed, 0);
  const std::uint64_t evals0 = cost.evaluations();
  const auto evals = [&] { return cost.evaluations() - evals0; };

  Vec a = rng.uniform_vec(sb.lower, sb.upper);
  try {
    double d = cost(a);
    detail::track_best(res, a, d);
    detail::push_row(res, 1, temperature(1, opts.schedule), a, d, std::nullopt, evals());

    Vec proposal(a.size());
    for (int k = 1; k < opts.schedule.stages; ++k) {
      const double tk = temperature(k, opts.schedule);
      const Potential pot(cost, region, tk, opts.spectral.gradient_cap);
      const double scale = tune_stage(pot, a, opts.spectral).step;
      for (int l = 1; l < opts.steps_per_stage; ++l) {
        for (std::size_t i = 0; i < a.size(); ++i) proposal[i] = a[i] + scale * rng.normal();
        ++res.counters.proposals;
        if (!region.contains(proposal)) continue;
        const double dn = cost(proposal);
        detail::track_best(res, proposal, dn);
        const double delta = dn - d;
        if (delta < 0.0) {
          a = proposal;
          d = dn;
          ++res.counters.accepted;
        } else if (metropolis_accept(delta, tk, rng)) {
          a = proposal;
          d = dn;
          ++res.counters.accepted;
          ++res.counters.uphill_accepted;
        }
      }
      res.counters.gradient_cap_events += pot.cap_events();
      detail::push_row(res, k + 1, temperature(k + 1, opts.schedule), a, d, std::nullopt,
                       evals());
    }
  } catch (const std::exception& e) {
    res.aborted = true;
    res.abort_reason = e.what();
  }
  res.evaluations = evals();
  return res;
}

// ---------------------------------------------------------------------------
// ISDE-based simulated annealing: per stage, re-tune step and damping from
// the Hessian spectrum at the stage's starting point, integrate the second-
// order Langevin scheme, and carry (U, V) into the next stage.
// ---------------------------------------------------------------------------

struct IsdeSaOptions {
  AnnealSchedule schedule;
  IsdeConfig isde;
  std::optional<SeedBox> seed_box;
  // Called after every stage with (stage index, stage start, stage end).
  std::function<void(int, const IsdeState&, const IsdeState&)> stage_observer;
};

inline RunResult isde_sa(const CostFunction& cost, const AdmissibleRegion& region,
                         const IsdeSaOptions& opts, std::uint64_t seed) {
  opts.schedule.validate();
  const SeedBox sb = effective_seed_box(region, opts.seed_box);

  RunResult res;
  res.algorithm = Algorithm::isde;
  res.seed = seed;
  Rng rng = Rng::derive(seed, 0);
  const std::uint64_t evals0 = cost.evaluations();
  const auto evals = [&] { return cost.evaluations() - evals0; };

  IsdeState state;
  state.position = rng.uniform_vec(sb.lower, sb.upper);
  state.velocity = rng.normal_vec(sb.lower.size());
  try {
    double d = cost(state.position);
    detail::track_best(res, state.position, d);
    detail::push_row(res, 1, temperature(1, opts.schedule), state.position, d, std::nullopt,
                     evals());

    for (int k = 1; k < opts.schedule.stages; ++k) {
      const double tk = temperature(k, opts.schedule);
      const Potential pot(cost, region, tk, opts.isde.gradient_cap);
      IsdeConfig tuned = tune_stage(pot, state.position, opts.isde);
      const IsdeState begin = state;
      try {
        state = integrate(begin, pot, tuned, rng);
      } catch (const DivergedStateError&) {
        ++res.counters.divergence_retries;
        tuned.step *= 0.5;
        state = integrate(begin, pot, tuned, rng);  // second failure aborts the run
      }
      if (opts.stage_observer) opts.stage_observer(k, begin, state);
      d = cost(state.position);
      detail::track_best(res, state.position, d);
      res.counters.gradient_cap_events += pot.cap_events();
      detail::push_row(res, k + 1, temperature(k + 1, opts.schedule), state.position, d,
                       std::nullopt, evals());
    }
  } catch (const std::exception& e) {
    res.aborted = true;
    res.abort_reason = e.what();
  }
  res.evaluations = evals();
  return res;
}

// ---------------------------------------------------------------------------
// Surrogate-accelerated annealing: the ISDE runs against a polyharmonic
// interpolant of the cost; each stage's endpoints are evaluated exactly and
// appended as new control points. Chains integrate concurrently against a
// frozen surrogate snapshot; enrichment happens serially, in chain order,
// between stages.
// ---------------------------------------------------------------------------

struct ApproxIsdeSaOptions {
  AnnealSchedule schedule;
  IsdeConfig isde;
  int surrogate_order = 2;
  int initial_control_points = 140;
  double weight_sum_target = 0.0;  // 0 = 1e-6 * max(1, mean |d_i|)
  double min_separation = 0.0;     // 0 = 1e-6 * seed-box diameter
  int chains = 1;
  int max_threads = 0;  // 0 = hardware concurrency
  std::optional<SeedBox> seed_box;
};

inline RunResult approx_isde_sa(const CostFunction& cost, const AdmissibleRegion& region,
                                const ApproxIsdeSaOptions& opts, std::uint64_t seed) {
  opts.schedule.validate();
  const std::size_t dim = cost.dimension();
  if (opts.initial_control_points < static_cast<int>(dim) + 2)
    throw std::invalid_argument("approx_isde_sa: needs at least N + 2 initial control points");
  if (opts.chains < 1) throw std::invalid_argument("approx_isde_sa: chains must be >= 1");
  if (opts.surrogate_order < 2)
    throw std::invalid_argument("approx_isde_sa: spline order must be >= 2");
  const SeedBox sb = effective_seed_box(region, opts.seed_box);
  const double delta_min =
      opts.min_separation > 0.0 ? opts.min_separation : 1e-6 * distance(sb.lower, sb.upper);

  RunResult res;
  res.algorithm = Algorithm::approx_isde;
  res.seed = seed;
  Rng rng = Rng::derive(seed, 0);
  const std::uint64_t evals0 = cost.evaluations();
  const auto evals = [&] { return cost.evaluations() - evals0; };

  try {
    // Initial design: uniform points over the seed box, exact cost at each.
    const int n0 = opts.initial_control_points;
    std::vector<Vec> points;
    points.reserve(static_cast<std::size_t>(n0));
    for (int i = 0; i < n0; ++i) {
      Vec p = rng.uniform_vec(sb.lower, sb.upper);
      for (int attempt = 0; attempt < 100; ++attempt) {
        bool clear = true;
        for (const Vec& q : points) {
          if (distance(p, q) < delta_min) {
            clear = false;
            break;
          }
        }
        if (clear) break;
        p = rng.uniform_vec(sb.lower, sb.upper);
      }
      points.push_back(std::move(p));
    }
    Vec values(static_cast<std::size_t>(n0));
    detail::parallel_for(n0, opts.max_threads,
                         [&](int i) { values[static_cast<std::size_t>(i)] = cost(points[static_cast<std::size_t>(i)]); });
    for (int i = 0; i < n0; ++i) detail::track_best(res, points[static_cast<std::size_t>(i)], values[static_cast<std::size_t>(i)]);

    PolyharmonicSurrogate surrogate = PolyharmonicSurrogate::fit(
        points, values, opts.surrogate_order, opts.weight_sum_target, delta_min);

    // Per-chain sampler states with independent substreams.
    const int chains = opts.chains;
    std::vector<Rng> chain_rng;
    std::vector<IsdeState> state(static_cast<std::size_t>(chains));
    chain_rng.reserve(static_cast<std::size_t>(chains));
    for (int c = 0; c < chains; ++c) {
      chain_rng.push_back(Rng::derive(seed, static_cast<std::uint64_t>(1 + c)));
      state[static_cast<std::size_t>(c)].position = chain_rng.back().uniform_vec(sb.lower, sb.upper);
      state[static_cast<std::size_t>(c)].velocity = chain_rng.back().normal_vec(dim);
    }

    detail::push_row(res, 1, temperature(1, opts.schedule), state[0].position, std::nullopt,
                     surrogate.predict(state[0].position), evals());

    std::vector<char> failed(static_cast<std::size_t>(chains));
    std::vector<char> retried(static_cast<std::size_t>(chains));
    std::vector<char> skip(static_cast<std::size_t>(chains));
    std::vector<char> evaluated(static_cast<std::size_t>(chains));
    std::vector<double> endpoint_value(static_cast<std::size_t>(chains));
    std::vector<std::string> failure(static_cast<std::size_t>(chains));

    for (int k = 1; k < opts.schedule.stages; ++k) {
      const double tk = temperature(k, opts.schedule);
      const Potential pot(surrogate, region, tk, opts.isde.gradient_cap);

      std::fill(failed.begin(), failed.end(), 0);
      std::fill(retried.begin(), retried.end(), 0);
      std::fill(skip.begin(), skip.end(), 0);
      std::fill(evaluated.begin(), evaluated.end(), 0);

      // Stage integration, concurrently against the frozen surrogate.
      detail::parallel_for(chains, opts.max_threads, [&](int c) {
        const auto ci = static_cast<std::size_t>(c);
        IsdeConfig tuned = tune_stage(pot, state[ci].position, opts.isde);
        const IsdeState begin = state[ci];
        try {
          state[ci] = integrate(begin, pot, tuned, chain_rng[ci]);
        } catch (const DivergedStateError&) {
          tuned.step *= 0.5;
          retried[ci] = 1;
          try {
            state[ci] = integrate(begin, pot, tuned, chain_rng[ci]);
          } catch (const DivergedStateError& e2) {
            failed[ci] = 1;
            failure[ci] = e2.what();
          }
        }
      });
      for (int c = 0; c < chains; ++c) {
        if (retried[static_cast<std::size_t>(c)]) ++res.counters.divergence_retries;
      }
      for (int c = 0; c < chains; ++c) {
        if (failed[static_cast<std::size_t>(c)]) {
          throw DivergedStateError("chain " + std::to_string(c) +
                                       " diverged after step halving: " + failure[static_cast<std::size_t>(c)],
                                   state[static_cast<std::size_t>(c)].position,
                                   state[static_cast<std::size_t>(c)].velocity, -1);
        }
      }
      res.counters.gradient_cap_events += pot.cap_events();

      // Deterministic dedup in chain order: endpoints too close to an
      // existing control point or to an earlier chain's endpoint are not
      // evaluated at all.
      for (int c = 0; c < chains; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        const Vec& cand = state[ci].position;
        bool close = surrogate.nearest_distance(cand) < delta_min;
        for (int b = 0; !close && b < c; ++b) {
          if (!skip[static_cast<std::size_t>(b)] &&
              distance(cand, state[static_cast<std::size_t>(b)].position) < delta_min)
            close = true;
        }
        if (close) {
          skip[ci] = 1;
          ++res.counters.rejected_duplicates;
        }
      }

      // Exact cost at the surviving endpoints, concurrently. A failed
      // evaluation skips that enrichment and is counted.
      detail::parallel_for(chains, opts.max_threads, [&](int c) {
        const auto ci = static_cast<std::size_t>(c);
        if (skip[ci]) return;
        try {
          endpoint_value[ci] = cost(state[ci].position);
          evaluated[ci] = 1;
        } catch (const std::exception& e) {
          failure[ci] = e.what();
        }
      });

      // Stage record: best evaluated endpoint (ties to the lowest chain);
      // falls back to chain 0's endpoint when nothing was evaluated. The
      // surrogate value is taken from the frozen stage snapshot.
      int rec = -1;
      for (int c = 0; c < chains; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        if (evaluated[ci] && (rec < 0 || endpoint_value[ci] < endpoint_value[static_cast<std::size_t>(rec)]))
          rec = c;
      }
      const Vec& rec_point = state[static_cast<std::size_t>(rec < 0 ? 0 : rec)].position;
      const std::optional<double> rec_exact =
          rec < 0 ? std::nullopt
                  : std::optional<double>(endpoint_value[static_cast<std::size_t>(rec)]);
      const double rec_surrogate = surrogate.predict(rec_point);

      // Serial enrichment in chain order.
      for (int c = 0; c < chains; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        if (skip[ci]) continue;
        if (!evaluated[ci]) {
          ++res.counters.enrichment_skips;
          continue;
        }
        try {
          const auto outcome = surrogate.add_control_point(state[ci].position, endpoint_value[ci]);
          if (outcome == PolyharmonicSurrogate::AddOutcome::added) {
            detail::track_best(res, state[ci].position, endpoint_value[ci]);
          } else {
            ++res.counters.rejected_duplicates;
          }
        } catch (const FitError&) {
          ++res.counters.enrichment_skips;
        }
      }

      detail::push_row(res, k + 1, temperature(k + 1, opts.schedule), rec_point, rec_exact,
                       rec_surrogate, evals());
    }

    res.final_surrogate = std::make_shared<PolyharmonicSurrogate>(std::move(surrogate));
  } catch (const std::exception& e) {
    res.aborted = true;
    res.abort_reason = e.what();
  }
  res.evaluations = evals();
  return res;
}

// ---------------------------------------------------------------------------
// Matched-budget comparison across algorithms: cheap Metropolis proposals get
// a higher per-stage count than gradient-driven ISDE steps so both sides
// spend comparable wall time.
// ---------------------------------------------------------------------------

struct ComparisonRow {
  Algorithm algorithm = Algorithm::classical;
  std::uint64_t seed = 0;
  double final_best = 0.0;
};

struct ComparisonReport {
  Algorithm first = Algorithm::classical;
  Algorithm second = Algorithm::isde;
  std::vector<ComparisonRow> rows;
  double median_first = 0.0;
  double median_second = 0.0;
};

namespace detail {
inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

inline ComparisonReport compare_equal_budget(const CostFunction& cost,
                                             const AdmissibleRegion& region,
                                             const AnnealSchedule& schedule,
                                             const IsdeConfig& base, Algorithm first,
                                             int first_steps, Algorithm second,
                                             int second_steps, std::uint64_t master_seed,
                                             int n_seeds) {
  if (n_seeds < 1) throw std::invalid_argument("compare_equal_budget: needs >= 1 seed");
  ComparisonReport report;
  report.first = first;
  report.second = second;
  std::vector<double> firsts, seconds;

  const auto run_one = [&](Algorithm alg, int steps, std::uint64_t seed) -> double {
    switch (alg) {
      case Algorithm::classical: {
        ClassicalSaOptions o;
        o.schedule = schedule;
        o.steps_per_stage = steps;
        o.spectral = base;
        return classical_sa(cost, region, o, seed).best_value;
      }
      case Algorithm::isde: {
        IsdeSaOptions o;
        o.schedule = schedule;
        o.isde = base;
        o.isde.steps_per_stage = steps;
        return isde_sa(cost, region, o, seed).best_value;
      }
      default:
        throw std::invalid_argument("compare_equal_budget: unsupported algorithm");
    }
  };

  for (int i = 0; i < n_seeds; ++i) {
    const std::uint64_t seed = Rng::mix(master_seed + Rng::mix(static_cast<std::uint64_t>(i)));
    const double a = run_one(first, first_steps, seed);
    const double b = run_one(second, second_steps, seed);
    report.rows.push_back({first, seed, a});
    report.rows.push_back({second, seed, b});
    firsts.push_back(a);
    seconds.push_back(b);
  }
  report.median_first = detail::median(std::move(firsts));
  report.median_second = detail::median(std::move(seconds));
  return report;
}

}  // namespace isde_anneal
