#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace isde_anneal {

using Vec = std::vector<double>;

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline void scale_in_place(Vec& a, double s) {
  for (double& v : a) v *= s;
}

// a += s * b
inline void axpy(Vec& a, double s, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

// Dense row-major matrix. Rows are contiguous so the factorization inner
// loops vectorize.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::span<const double> row_span(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  // Appends one row; only meaningful while cols() stays fixed.
  void append_row(std::span<const double> r) {
    if (cols_ == 0) cols_ = r.size();
    if (r.size() != cols_) throw std::invalid_argument("append_row: length mismatch");
    data_.insert(data_.end(), r.begin(), r.end());
    ++rows_;
  }

  void pop_row() {
    if (rows_ == 0) throw std::logic_error("pop_row on empty matrix");
    data_.resize(data_.size() - cols_);
    --rows_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double norm_1(const Matrix& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) col += std::abs(a(i, j));
    best = std::max(best, col);
  }
  return best;
}

// LU factorization with partial pivoting, LAPACK-style swap list.
// Never throws on a singular input; callers inspect singular().
class LuFactorization {
 public:
  static LuFactorization compute(Matrix a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("LU requires a square matrix");
    LuFactorization f;
    f.pivots_.resize(n);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, norm_inf(a.row_span(i)));
    const double tiny = std::max(scale, 1.0) * static_cast<double>(n) *
                        std::numeric_limits<double>::epsilon() * 16.0;
    f.min_pivot_ = std::numeric_limits<double>::infinity();

    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(a(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        const double v = std::abs(a(i, k));
        if (v > best) {
          best = v;
          p = i;
        }
      }
      f.pivots_[k] = p;
      if (p != k) std::swap_ranges(a.row(k), a.row(k) + n, a.row(p));
      const double piv = a(k, k);
      f.min_pivot_ = std::min(f.min_pivot_, std::abs(piv));
      if (std::abs(piv) <= tiny) {
        f.singular_ = true;
        continue;  // leave the column as-is; factorization is unusable
      }
      const double inv = 1.0 / piv;
      double* rk = a.row(k);
      for (std::size_t i = k + 1; i < n; ++i) {
        double* ri = a.row(i);
        const double l = ri[k] * inv;
        ri[k] = l;
        for (std::size_t j = k + 1; j < n; ++j) ri[j] -= l * rk[j];
      }
    }
    f.lu_ = std::move(a);
    return f;
  }

  bool singular() const noexcept { return singular_; }
  double min_pivot() const noexcept { return min_pivot_; }
  std::size_t size() const noexcept { return lu_.rows(); }

  // Solves A x = b in place.
  void solve(Vec& b) const {
    const std::size_t n = size();
    for (std::size_t k = 0; k < n; ++k) {
      if (pivots_[k] != k) std::swap(b[k], b[pivots_[k]]);
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double* ri = lu_.row(i);
      double s = b[i];
      for (std::size_t j = 0; j < i; ++j) s -= ri[j] * b[j];
      b[i] = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      const double* ri = lu_.row(ii);
      double s = b[ii];
      for (std::size_t j = ii + 1; j < n; ++j) s -= ri[j] * b[j];
      b[ii] = s / ri[ii];
    }
  }

  // Solves A^T x = b in place.
  void solve_transpose(Vec& b) const {
    const std::size_t n = size();
    // U^T w = b (forward)
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[i];
      for (std::size_t j = 0; j < i; ++j) s -= lu_(j, i) * b[j];
      b[i] = s / lu_(i, i);
    }
    // L^T t = w (backward, unit diagonal)
    for (std::size_t ii = n; ii-- > 0;) {
      double s = b[ii];
      for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(j, ii) * b[j];
      b[ii] = s;
    }
    for (std::size_t kk = n; kk-- > 0;) {
      if (pivots_[kk] != kk) std::swap(b[kk], b[pivots_[kk]]);
    }
  }

 private:
  Matrix lu_;
  std::vector<std::size_t> pivots_;
  bool singular_ = false;
  double min_pivot_ = 0.0;
};

// Hager's 1-norm estimator for ||A^-1||_1; multiply by ||A||_1 for a
// condition estimate. Costs a handful of O(n^2) solves.
inline double inverse_norm_1_estimate(const LuFactorization& lu) {
  if (lu.singular()) return std::numeric_limits<double>::infinity();
  const std::size_t n = lu.size();
  if (n == 0) return 0.0;
  Vec x(n, 1.0 / static_cast<double>(n));
  double est = 0.0;
  for (int iter = 0; iter < 5; ++iter) {
    Vec y = x;
    lu.solve(y);
    est = 0.0;
    for (double v : y) est += std::abs(v);
    Vec xi(n);
    for (std::size_t i = 0; i < n; ++i) xi[i] = (y[i] >= 0.0) ? 1.0 : -1.0;
    lu.solve_transpose(xi);
    std::size_t j = 0;
    double zmax = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(xi[i]) > zmax) {
        zmax = std::abs(xi[i]);
        j = i;
      }
    }
    if (zmax <= dot(xi, x)) break;
    std::fill(x.begin(), x.end(), 0.0);
    x[j] = 1.0;
  }
  return est;
}

inline double condition_estimate(const LuFactorization& lu, double a_norm_1) {
  if (lu.singular()) return std::numeric_limits<double>::infinity();
  return a_norm_1 * inverse_norm_1_estimate(lu);
}

}  // namespace isde_anneal
