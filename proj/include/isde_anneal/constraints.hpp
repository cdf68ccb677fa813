#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include "isde_anneal/linalg.hpp"

namespace isde_anneal {

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

enum class RegionKind { box, positive };

// Admissible set with per-dimension smoothing widths. The smooth indicator is
// a product of (1+tanh)/2 factors; everything here works in the log domain so
// points far outside the region keep finite values and bounded gradients.
struct AdmissibleRegion {
  RegionKind kind = RegionKind::box;
  Vec lower;  // box only
  Vec upper;  // box only
  Vec alpha;  // smoothing widths, > 0

  static AdmissibleRegion box(Vec lower, Vec upper, Vec alpha = {}) {
    AdmissibleRegion r;
    r.kind = RegionKind::box;
    if (alpha.empty()) {
      alpha.resize(lower.size());
      for (std::size_t i = 0; i < lower.size(); ++i)
        alpha[i] = 0.03 * (upper[i] - lower[i]);
    }
    r.lower = std::move(lower);
    r.upper = std::move(upper);
    r.alpha = std::move(alpha);
    r.validate();
    return r;
  }

  static AdmissibleRegion positive(Vec alpha) {
    AdmissibleRegion r;
    r.kind = RegionKind::positive;
    r.alpha = std::move(alpha);
    r.validate();
    return r;
  }

  std::size_t dimension() const noexcept { return alpha.size(); }

  void validate() const {
    if (alpha.empty()) throw std::invalid_argument("region: empty smoothing widths");
    for (double a : alpha) {
      if (!(a > 0.0)) throw std::invalid_argument("region: smoothing widths must be > 0");
    }
    if (kind == RegionKind::box) {
      if (lower.size() != alpha.size() || upper.size() != alpha.size())
        throw std::invalid_argument("region: bound/width length mismatch");
      for (std::size_t i = 0; i < lower.size(); ++i) {
        if (!(lower[i] < upper[i]))
          throw std::invalid_argument("region: requires lower < upper per dimension");
      }
    }
  }

  // Hard (un-smoothed) membership, used for proposal rejection.
  bool contains(const Vec& a) const {
    if (kind == RegionKind::positive) {
      for (double x : a)
        if (!(x > 0.0)) return false;
      return true;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!(lower[i] < a[i] && a[i] < upper[i])) return false;
    }
    return true;
  }

  double diameter() const {
    if (kind == RegionKind::box) return distance(lower, upper);
    return 0.0;
  }
};

// log of the smooth indicator. Each (1+tanh(x))/2 factor equals
// logistic(2x), so its log is -softplus(-2x); the box kind also carries a
// log(1/4) -> two-factor split that cancels the same way.
inline double log_indicator(const AdmissibleRegion& region, const Vec& a) {
  if (a.size() != region.dimension())
    throw std::invalid_argument("log_indicator: dimension mismatch");
  double s = 0.0;
  if (region.kind == RegionKind::positive) {
    for (std::size_t i = 0; i < a.size(); ++i)
      s -= softplus(-2.0 * a[i] / region.alpha[i]);
    return s;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = region.alpha[i];
    s -= softplus(-2.0 * (a[i] - region.lower[i]) / ai);
    s -= softplus(-2.0 * (region.upper[i] - a[i]) / ai);
  }
  return s;
}

// Gradient of log_indicator. Componentwise (1/alpha)(1 - tanh(.)) terms,
// computed as 2*logistic(-2x)/alpha which stays exact for large |x|; every
// component is bounded by 2/alpha_i.
inline Vec log_indicator_gradient(const AdmissibleRegion& region, const Vec& a) {
  if (a.size() != region.dimension())
    throw std::invalid_argument("log_indicator_gradient: dimension mismatch");
  Vec g(a.size());
  auto one_minus_tanh = [](double x) { return 2.0 / (1.0 + std::exp(2.0 * x)); };
  if (region.kind == RegionKind::positive) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double ai = region.alpha[i];
      g[i] = one_minus_tanh(a[i] / ai) / ai;
    }
    return g;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = region.alpha[i];
    g[i] = (one_minus_tanh((a[i] - region.lower[i]) / ai) -
            one_minus_tanh((region.upper[i] - a[i]) / ai)) /
           ai;
  }
  return g;
}

}  // namespace isde_anneal
