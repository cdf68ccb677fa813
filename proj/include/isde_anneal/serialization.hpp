#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "isde_anneal/annealing.hpp"
#include "isde_anneal/constraints.hpp"
#include "isde_anneal/surrogate.hpp"

namespace isde_anneal {

using json = nlohmann::ordered_json;

// %.17g round-trips doubles exactly and keeps trace files byte-stable.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Admissible region <-> JSON
// ---------------------------------------------------------------------------

inline json region_to_json(const AdmissibleRegion& r) {
  json j;
  j["kind"] = r.kind == RegionKind::box ? "box" : "positive";
  if (r.kind == RegionKind::box) {
    j["lower"] = r.lower;
    j["upper"] = r.upper;
  }
  j["alpha"] = r.alpha;
  return j;
}

inline AdmissibleRegion region_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "box") {
    Vec alpha = j.contains("alpha") ? j.at("alpha").get<Vec>() : Vec{};
    return AdmissibleRegion::box(j.at("lower").get<Vec>(), j.at("upper").get<Vec>(),
                                 std::move(alpha));
  }
  if (kind == "positive") return AdmissibleRegion::positive(j.at("alpha").get<Vec>());
  throw std::invalid_argument("region kind must be \"box\" or \"positive\"");
}

// ---------------------------------------------------------------------------
// Surrogate checkpoint <-> JSON (weights included, so loading needs no refit)
// ---------------------------------------------------------------------------

inline json surrogate_to_json(const PolyharmonicSurrogate& s) {
  json j;
  j["order"] = s.order();
  j["weight_sum_target"] = s.weight_sum_target();
  j["min_separation"] = s.min_separation();
  j["offset"] = s.offset();
  j["points"] = s.control_points();
  j["values"] = s.values();
  j["weights"] = s.weights();
  return j;
}

inline PolyharmonicSurrogate surrogate_from_json(const json& j) {
  return PolyharmonicSurrogate(
      j.at("order").get<int>(), j.at("points").get<std::vector<Vec>>(),
      j.at("values").get<Vec>(), j.at("weights").get<Vec>(), j.at("offset").get<double>(),
      j.at("weight_sum_target").get<double>(), j.at("min_separation").get<double>());
}

inline void save_surrogate(const PolyharmonicSurrogate& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << surrogate_to_json(s).dump(2) << '\n';
}

inline PolyharmonicSurrogate load_surrogate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j;
  in >> j;
  return surrogate_from_json(j);
}

// ---------------------------------------------------------------------------
// Run artifacts: trace CSV + summary JSON
// ---------------------------------------------------------------------------

// One header plus one row per stage. Optional cells (exact cost before any
// evaluation, surrogate cost outside approx runs) are left empty. Best point
// and cumulative counters ride along so summary.json stays re-derivable from
// the trace alone.
inline void write_trace_csv(std::ostream& os, const RunResult& res) {
  const std::size_t dim = res.trace.empty() ? 0 : res.trace.front().point.size();
  os << "stage,temperature";
  for (std::size_t i = 0; i < dim; ++i) os << ",a" << i;
  os << ",exact_cost,surrogate_cost,best_cost";
  for (std::size_t i = 0; i < dim; ++i) os << ",best" << i;
  os << ",evaluations,proposals,accepted,uphill_accepted,divergence_retries,"
        "gradient_cap_events,enrichment_skips,rejected_duplicates\n";
  for (const TraceRow& row : res.trace) {
    os << row.stage << ',' << format_double(row.temperature);
    for (double v : row.point) os << ',' << format_double(v);
    os << ',' << (row.exact_cost ? format_double(*row.exact_cost) : std::string());
    os << ',' << (row.surrogate_cost ? format_double(*row.surrogate_cost) : std::string());
    os << ',' << format_double(row.best_cost);
    for (double v : row.best_point) os << ',' << format_double(v);
    os << ',' << row.evaluations << ',' << row.counters.proposals << ','
       << row.counters.accepted << ',' << row.counters.uphill_accepted << ','
       << row.counters.divergence_retries << ',' << row.counters.gradient_cap_events << ','
       << row.counters.enrichment_skips << ',' << row.counters.rejected_duplicates << '\n';
  }
}

inline json summary_to_json(const RunResult& res) {
  json j;
  j["algorithm"] = algorithm_name(res.algorithm);
  j["seed"] = res.seed;
  j["stages"] = res.trace.size();
  j["best_value"] = res.best_value;
  j["best_point"] = res.best_point;
  j["evaluations"] = res.evaluations;
  json counters;
  counters["proposals"] = res.counters.proposals;
  counters["accepted"] = res.counters.accepted;
  counters["uphill_accepted"] = res.counters.uphill_accepted;
  counters["divergence_retries"] = res.counters.divergence_retries;
  counters["gradient_cap_events"] = res.counters.gradient_cap_events;
  counters["enrichment_skips"] = res.counters.enrichment_skips;
  counters["rejected_duplicates"] = res.counters.rejected_duplicates;
  j["counters"] = counters;
  j["aborted"] = res.aborted;
  if (res.aborted) j["abort_reason"] = res.abort_reason;
  return j;
}

}  // namespace isde_anneal
