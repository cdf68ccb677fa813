#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "isde_anneal/errors.hpp"
#include "isde_anneal/linalg.hpp"

namespace isde_anneal {

namespace detail {
inline double int_pow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}
}  // namespace detail

// Radial kernel of order p evaluated at distance r: r^p for odd p,
// r^p log r for even p, and 0 at r = 0 for both parities.
inline double polyharmonic_kernel(double r, int order) {
  if (r == 0.0) return 0.0;
  const double rp = detail::int_pow(r, order);
  if (order % 2 == 0) return rp * std::log(r);
  return rp;
}

inline double polyharmonic_basis(const Vec& a, const Vec& c, int order) {
  if (a.size() != c.size())
    throw std::invalid_argument("polyharmonic_basis: dimension mismatch");
  return polyharmonic_kernel(distance(a, c), order);
}

// Polyharmonic-spline interpolant of scattered cost samples,
//   s(a) = sum_i w_i k(|a - c_i|) + mu,
// with the weight sum pinned to a small positive target so the interpolant
// grows at infinity. The constant offset mu is the Lagrange-multiplier
// augmentation that keeps the system square: n_c interpolation rows plus one
// weight-sum row over n_c + 1 unknowns (w, mu).
class PolyharmonicSurrogate {
 public:
  enum class AddOutcome { added, rejected_too_close };

  // Assembles and solves the augmented system
  //   [K 1; 1^T 0] [w; mu] = [values; weight_sum_target].
  // Pass 0 for weight_sum_target / min_separation to use the defaults
  // 1e-6 * max(1, mean|d|) and 1e-6 * (bounding box diameter of the points).
  static PolyharmonicSurrogate fit(const std::vector<Vec>& points, const Vec& values,
                                   int order, double weight_sum_target = 0.0,
                                   double min_separation = 0.0) {
    if (points.empty()) throw std::invalid_argument("fit: needs at least one point");
    if (points.size() != values.size())
      throw std::invalid_argument("fit: points/values size mismatch");
    if (order < 2) throw std::invalid_argument("fit: spline order must be >= 2");
    if (!all_finite(values)) throw std::invalid_argument("fit: non-finite values");
    const std::size_t dim = points.front().size();
    for (const Vec& p : points) {
      if (p.size() != dim) throw std::invalid_argument("fit: ragged point list");
      if (!all_finite(p)) throw std::invalid_argument("fit: non-finite point");
    }

    if (weight_sum_target <= 0.0) {
      double mean_abs = 0.0;
      for (double v : values) mean_abs += std::abs(v);
      mean_abs /= static_cast<double>(values.size());
      weight_sum_target = 1e-6 * std::max(1.0, mean_abs);
    }
    if (min_separation <= 0.0) min_separation = 1e-6 * bounding_diameter(points);

    PolyharmonicSurrogate s(order, dim, weight_sum_target, min_separation);
    for (std::size_t i = 0; i < points.size(); ++i) {
      s.check_separation(points[i]);
      s.append_point(points[i], values[i]);
    }
    s.refit();
    return s;
  }

  // Rebuilds a surrogate from previously fitted state (checkpoints, tests).
  PolyharmonicSurrogate(int order, const std::vector<Vec>& points, Vec values,
                        Vec weights, double offset, double weight_sum_target,
                        double min_separation)
      : PolyharmonicSurrogate(order, points.empty() ? 0 : points.front().size(),
                              weight_sum_target, min_separation) {
    if (points.size() != values.size() || points.size() != weights.size())
      throw std::invalid_argument("surrogate: inconsistent state sizes");
    for (std::size_t i = 0; i < points.size(); ++i) append_point(points[i], values[i]);
    weights_ = std::move(weights);
    offset_ = offset;
  }

  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t dimension() const noexcept { return dim_; }
  double weight_sum_target() const noexcept { return weight_sum_target_; }
  double min_separation() const noexcept { return min_separation_; }
  const Vec& weights() const noexcept { return weights_; }
  double offset() const noexcept { return offset_; }
  const Vec& values() const noexcept { return values_; }
  double condition_estimate() const noexcept { return condition_; }

  Vec point(std::size_t i) const {
    const double* r = points_.row(i);
    return Vec(r, r + dim_);
  }

  std::vector<Vec> control_points() const {
    std::vector<Vec> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = point(i);
    return out;
  }

  double predict(const Vec& a) const {
    if (a.size() != dim_) throw std::invalid_argument("predict: dimension mismatch");
    double s = offset_;
    for (std::size_t i = 0; i < size(); ++i)
      s += weights_[i] * polyharmonic_kernel(distance(a, points_.row_span(i)), order_);
    return s;
  }

  // Analytic gradient: column j contributes w_j * f(r_j) * (a - c_j) with
  // f(r) = p r^{p-2} for odd p and (1 + p log r) r^{p-2} for even p. A zero
  // radius contributes nothing; for p = 2 the 0 * log 0 form has limit 0.
  Vec gradient(const Vec& a) const {
    if (a.size() != dim_) throw std::invalid_argument("gradient: dimension mismatch");
    Vec g(dim_, 0.0);
    const bool even = (order_ % 2 == 0);
    for (std::size_t j = 0; j < size(); ++j) {
      const double* c = points_.row(j);
      double r2 = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) {
        const double d = a[i] - c[i];
        r2 += d * d;
      }
      if (r2 == 0.0) continue;
      const double r = std::sqrt(r2);
      const double rp2 = detail::int_pow(r, order_ - 2);
      const double f = even ? (1.0 + order_ * std::log(r)) * rp2
                            : static_cast<double>(order_) * rp2;
      const double wf = weights_[j] * f;
      for (std::size_t i = 0; i < dim_; ++i) g[i] += wf * (a[i] - c[i]);
    }
    return g;
  }

  // Enriches the control-point set and re-solves. Points closer than the
  // minimum separation to an existing one are rejected without touching the
  // surrogate. A failed re-solve restores the previous state and rethrows.
  AddOutcome add_control_point(const Vec& c, double value) {
    if (c.size() != dim_) throw std::invalid_argument("add_control_point: dimension mismatch");
    if (!all_finite(c) || !std::isfinite(value))
      throw std::invalid_argument("add_control_point: non-finite input");
    if (nearest_distance(c) < min_separation_) return AddOutcome::rejected_too_close;
    const Vec old_w = weights_;
    const double old_mu = offset_;
    append_point(c, value);
    try {
      refit();
    } catch (...) {
      pop_point();
      weights_ = old_w;
      offset_ = old_mu;
      throw;
    }
    return AddOutcome::added;
  }

  double nearest_distance(const Vec& c) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size(); ++i)
      best = std::min(best, distance(c, points_.row_span(i)));
    return best;
  }

 private:
  PolyharmonicSurrogate(int order, std::size_t dim, double weight_sum_target,
                        double min_separation)
      : order_(order),
        dim_(dim),
        weight_sum_target_(weight_sum_target),
        min_separation_(min_separation),
        points_(0, dim) {
    if (order_ < 2) throw std::invalid_argument("surrogate: spline order must be >= 2");
    if (!(weight_sum_target_ > 0.0))
      throw std::invalid_argument("surrogate: weight-sum target must be > 0");
  }

  static double bounding_diameter(const std::vector<Vec>& points) {
    const std::size_t dim = points.front().size();
    double d2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      double lo = points.front()[i], hi = lo;
      for (const Vec& p : points) {
        lo = std::min(lo, p[i]);
        hi = std::max(hi, p[i]);
      }
      d2 += (hi - lo) * (hi - lo);
    }
    return std::sqrt(d2);
  }

  void check_separation(const Vec& p) const {
    if (size() == 0) return;
    const double d = nearest_distance(p);
    if (d < min_separation_ || d == 0.0)
      throw DuplicatePointError("fit: control points closer than the minimum separation");
  }

  // Keeps the kernel matrix cached; enrichment appends one row/column and the
  // solver re-factorizes the assembled system from scratch.
  void append_point(const Vec& c, double value) {
    Vec row(size() + 1);
    for (std::size_t i = 0; i < size(); ++i)
      row[i] = polyharmonic_kernel(distance(c, points_.row_span(i)), order_);
    row[size()] = 0.0;
    for (std::size_t i = 0; i < kernel_rows_.size(); ++i) kernel_rows_[i].push_back(row[i]);
    kernel_rows_.push_back(std::move(row));
    points_.append_row(c);
    values_.push_back(value);
  }

  void pop_point() {
    kernel_rows_.pop_back();
    for (auto& r : kernel_rows_) r.pop_back();
    points_.pop_row();
    values_.pop_back();
  }

  void refit() {
    const std::size_t nc = size();
    const std::size_t n = nc + 1;
    Matrix a(n, n, 0.0);
    for (std::size_t i = 0; i < nc; ++i) {
      double* r = a.row(i);
      const Vec& k = kernel_rows_[i];
      for (std::size_t j = 0; j < nc; ++j) r[j] = k[j];
      r[nc] = 1.0;
      a(nc, i) = 1.0;
    }
    a(nc, nc) = 0.0;
    Vec rhs(n);
    for (std::size_t i = 0; i < nc; ++i) rhs[i] = values_[i];
    rhs[nc] = weight_sum_target_;

    const double anorm = norm_1(a);
    const Matrix a_copy = a;
    const LuFactorization lu = LuFactorization::compute(std::move(a));
    condition_ = ::isde_anneal::condition_estimate(lu, anorm);
    if (lu.singular())
      throw FitError("surrogate fit: singular kernel system", condition_);

    Vec x = rhs;
    lu.solve(x);
    refine(a_copy, lu, rhs, x);  // one step of iterative refinement

    // Interpolation and weight-sum tolerances; a solve that cannot meet them
    // counts as a rank-deficiency failure.
    for (std::size_t i = 0; i < nc; ++i) {
      double row = 0.0;
      const Vec& k = kernel_rows_[i];
      for (std::size_t j = 0; j < nc; ++j) row += k[j] * x[j];
      row += x[nc];
      if (!(std::abs(row - values_[i]) <= 1e-8 * (1.0 + std::abs(values_[i]))))
        throw FitError("surrogate fit: interpolation residual too large", condition_);
    }
    double wsum = 0.0;
    for (std::size_t j = 0; j < nc; ++j) wsum += x[j];
    if (!(std::abs(wsum - weight_sum_target_) <=
          1e-10 * weight_sum_target_ * static_cast<double>(nc)))
      throw FitError("surrogate fit: weight-sum residual too large", condition_);

    weights_.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(nc));
    offset_ = x[nc];
  }

  static void refine(const Matrix& a, const LuFactorization& lu, const Vec& rhs, Vec& x) {
    const std::size_t n = rhs.size();
    Vec resid(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = rhs[i];
      const double* r = a.row(i);
      for (std::size_t j = 0; j < n; ++j) s -= r[j] * x[j];
      resid[i] = s;
    }
    lu.solve(resid);
    for (std::size_t i = 0; i < n; ++i) x[i] += resid[i];
  }

  int order_;
  std::size_t dim_;
  double weight_sum_target_;
  double min_separation_;
  Matrix points_;                 // n_c x dim, rows are control points
  std::vector<Vec> kernel_rows_;  // cached symmetric kernel entries
  Vec values_;
  Vec weights_;
  double offset_ = 0.0;
  double condition_ = 0.0;
};

}  // namespace isde_anneal
