#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "isde_anneal/errors.hpp"
#include "isde_anneal/linalg.hpp"

namespace isde_anneal {

struct EvaluationRecord {
  Vec point;
  double value = 0.0;
  std::uint64_t index = 0;  // running evaluation count at the time of the call
  double seconds = 0.0;     // wall clock relative to counter creation
};

// Cost function over an N-dimensional design vector. Evaluation is counted
// atomically so concurrent chains can share one objective; copies share the
// same tally.
class CostFunction {
 public:
  using Evaluator = std::function<double(const Vec&)>;
  using Gradient = std::function<Vec(const Vec&)>;
  using Recorder = std::function<void(const EvaluationRecord&)>;

  CostFunction(std::size_t dimension, Evaluator evaluator, Gradient gradient = nullptr)
      : dim_(dimension),
        eval_(std::move(evaluator)),
        grad_(std::move(gradient)),
        count_(std::make_shared<std::atomic<std::uint64_t>>(0)),
        start_(Clock::now()) {
    if (dim_ == 0) throw std::invalid_argument("cost function dimension must be >= 1");
    if (!eval_) throw std::invalid_argument("cost function needs an evaluator");
  }

  std::size_t dimension() const noexcept { return dim_; }

  double operator()(const Vec& a) const {
    check_input(a);
    const std::uint64_t idx = count_->fetch_add(1) + 1;
    const double v = eval_(a);
    if (recorder_) {
      const double secs = std::chrono::duration<double>(Clock::now() - start_).count();
      recorder_({a, v, idx, secs});
    }
    return v;
  }

  bool has_gradient() const noexcept { return static_cast<bool>(grad_); }

  // Analytic gradient when provided, central differences otherwise. The
  // fallback spends 2N counted evaluations per call.
  Vec gradient(const Vec& a) const {
    check_input(a);
    if (grad_) return grad_(a);
    Vec g(dim_);
    Vec probe = a;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(a[i]));
      probe[i] = a[i] + h;
      const double fp = (*this)(probe);
      probe[i] = a[i] - h;
      const double fm = (*this)(probe);
      probe[i] = a[i];
      g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
  }

  std::uint64_t evaluations() const noexcept { return count_->load(); }
  void reset_evaluations() const noexcept { count_->store(0); }
  void set_recorder(Recorder r) { recorder_ = std::move(r); }

 private:
  using Clock = std::chrono::steady_clock;

  void check_input(const Vec& a) const {
    if (a.size() != dim_) throw std::invalid_argument("design vector has wrong dimension");
    if (!all_finite(a)) throw std::invalid_argument("design vector has non-finite components");
  }

  std::size_t dim_;
  Evaluator eval_;
  Gradient grad_;
  std::shared_ptr<std::atomic<std::uint64_t>> count_;
  Recorder recorder_;
  Clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Ackley benchmark
// ---------------------------------------------------------------------------

inline double ackley(const Vec& a) {
  const std::size_t n = a.size();
  if (n == 0) throw std::invalid_argument("ackley: empty design vector");
  if (!all_finite(a)) throw std::invalid_argument("ackley: non-finite input");
  const double rn = std::sqrt(static_cast<double>(n));
  double cos_sum = 0.0;
  for (double x : a) cos_sum += std::cos(2.0 * std::numbers::pi * x);
  return -20.0 * std::exp(-0.2 * norm(a) / rn) -
         std::exp(cos_sum / static_cast<double>(n)) + std::numbers::e + 20.0;
}

// Gradient of the Ackley function; the norm term is non-smooth at the origin
// where the symmetric limit (zero vector) is returned.
inline Vec ackley_gradient(const Vec& a) {
  const std::size_t n = a.size();
  if (n == 0) throw std::invalid_argument("ackley_gradient: empty design vector");
  if (!all_finite(a)) throw std::invalid_argument("ackley_gradient: non-finite input");
  const double nd = static_cast<double>(n);
  const double rn = std::sqrt(nd);
  const double r = norm(a);
  double cos_sum = 0.0;
  for (double x : a) cos_sum += std::cos(2.0 * std::numbers::pi * x);
  const double wave = std::exp(cos_sum / nd);
  Vec g(n, 0.0);
  const double radial = (r > 0.0) ? (4.0 / (rn * r)) * std::exp(-0.2 * r / rn) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = radial * a[i] +
           (2.0 * std::numbers::pi / nd) * wave * std::sin(2.0 * std::numbers::pi * a[i]);
  }
  return g;
}

inline CostFunction make_ackley(std::size_t dimension) {
  return CostFunction(
      dimension, [](const Vec& a) { return ackley(a); },
      [](const Vec& a) { return ackley_gradient(a); });
}

// ---------------------------------------------------------------------------
// Least squares wrapper
// ---------------------------------------------------------------------------

inline double least_squares_cost(const std::function<Vec(const Vec&)>& performance,
                                 const Vec& target, const Vec& a) {
  const Vec out = performance(a);
  if (out.size() != target.size())
    throw std::invalid_argument("least_squares_cost: performance/target length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = out[i] - target[i];
    s += r * r;
  }
  return s;
}

inline CostFunction make_least_squares(std::size_t dimension,
                                       std::function<Vec(const Vec&)> performance,
                                       Vec target) {
  return CostFunction(dimension, [performance = std::move(performance),
                                  target = std::move(target)](const Vec& a) {
    return least_squares_cost(performance, target, a);
  });
}

// ---------------------------------------------------------------------------
// Transient-response design benchmark: a 2-storey shear model moving in two
// horizontal directions under a prescribed base acceleration. The four design
// parameters are the per-storey, per-direction stiffnesses
// (kx1, kx2, ky1, ky2); the cost is the peak displacement norm of the top
// storey relative to the ground.
// ---------------------------------------------------------------------------

struct OscillatorConfig {
  double mass1 = 1.0;
  double mass2 = 1.0;
  double damping_ratio = 0.02;  // per spring, c = 2 zeta sqrt(k m)
  double time_step = 0.005;
  double duration = 30.0;
  double blow_up_threshold = 1e3;
  double forcing_angle_deg = 30.0;
  std::array<double, 3> forcing_amplitude{1.0, 0.5, 0.7};
  std::array<double, 3> forcing_frequency{2.9, 7.6, 5.0};  // rad/s
  std::array<double, 3> forcing_phase{0.0, 1.0, 2.0};

  double base_acceleration(double t) const {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j)
      s += forcing_amplitude[j] * std::sin(forcing_frequency[j] * t + forcing_phase[j]);
    return s;
  }
};

inline double oscillator_design_cost(const Vec& a, const OscillatorConfig& cfg) {
  if (a.size() != 4) throw std::invalid_argument("oscillator cost expects 4 stiffnesses");
  if (!all_finite(a)) throw std::invalid_argument("oscillator cost: non-finite input");
  for (double k : a) {
    if (k <= 0.0) throw DivergedSimulationError("oscillator: non-positive stiffness");
  }
  const double kx1 = a[0], kx2 = a[1], ky1 = a[2], ky2 = a[3];
  const double m1 = cfg.mass1, m2 = cfg.mass2;
  const double zeta = cfg.damping_ratio;
  const double cx1 = 2.0 * zeta * std::sqrt(kx1 * m1);
  const double cx2 = 2.0 * zeta * std::sqrt(kx2 * m2);
  const double cy1 = 2.0 * zeta * std::sqrt(ky1 * m1);
  const double cy2 = 2.0 * zeta * std::sqrt(ky2 * m2);
  const double ang = cfg.forcing_angle_deg * std::numbers::pi / 180.0;
  const double cx = std::cos(ang), cy = std::sin(ang);

  const double dt = cfg.time_step;
  const long steps = static_cast<long>(std::ceil(cfg.duration / dt));

  // Displacements relative to the ground; symplectic Euler in time.
  double u1x = 0, u2x = 0, v1x = 0, v2x = 0;
  double u1y = 0, u2y = 0, v1y = 0, v2y = 0;
  double peak = 0.0;
  for (long s = 0; s < steps; ++s) {
    const double ab = cfg.base_acceleration(static_cast<double>(s) * dt);
    const double abx = ab * cx, aby = ab * cy;

    const double fx1 = -kx1 * u1x - cx1 * v1x + kx2 * (u2x - u1x) + cx2 * (v2x - v1x);
    const double fx2 = -kx2 * (u2x - u1x) - cx2 * (v2x - v1x);
    const double fy1 = -ky1 * u1y - cy1 * v1y + ky2 * (u2y - u1y) + cy2 * (v2y - v1y);
    const double fy2 = -ky2 * (u2y - u1y) - cy2 * (v2y - v1y);

    v1x += dt * (fx1 / m1 - abx);
    v2x += dt * (fx2 / m2 - abx);
    v1y += dt * (fy1 / m1 - aby);
    v2y += dt * (fy2 / m2 - aby);
    u1x += dt * v1x;
    u2x += dt * v2x;
    u1y += dt * v1y;
    u2y += dt * v2y;

    const double top = std::sqrt(u2x * u2x + u2y * u2y);
    if (!(top < cfg.blow_up_threshold) || !std::isfinite(top))
      throw DivergedSimulationError("oscillator: displacement exceeded blow-up threshold");
    peak = std::max(peak, top);
  }
  return peak;
}

inline CostFunction make_oscillator(const OscillatorConfig& cfg = {}) {
  return CostFunction(4, [cfg](const Vec& a) { return oscillator_design_cost(a, cfg); });
}

}  // namespace isde_anneal
