#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "isde_anneal/constraints.hpp"
#include "isde_anneal/errors.hpp"
#include "isde_anneal/linalg.hpp"
#include "isde_anneal/objectives.hpp"
#include "isde_anneal/rng.hpp"
#include "isde_anneal/surrogate.hpp"

namespace isde_anneal {

// Annealing potential psi_T(a) = cost(a)/T - log_indicator(a) with the cost
// part backed either by an exact objective or by a fitted surrogate. Shared
// read-only between chains; the gradient-cap tally is atomic.
class Potential {
 public:
  Potential(const CostFunction& cost, const AdmissibleRegion& region, double temperature,
            double gradient_cap = 1e6)
      : cost_(&cost), region_(&region), temperature_(temperature), cap_(gradient_cap) {
    check();
  }

  Potential(const PolyharmonicSurrogate& surrogate, const AdmissibleRegion& region,
            double temperature, double gradient_cap = 1e6)
      : surrogate_(&surrogate), region_(&region), temperature_(temperature),
        cap_(gradient_cap) {
    check();
  }

  double temperature() const noexcept { return temperature_; }
  const AdmissibleRegion& region() const noexcept { return *region_; }
  std::size_t dimension() const noexcept { return region_->dimension(); }
  double gradient_cap() const noexcept { return cap_; }
  std::uint64_t cap_events() const noexcept { return cap_events_.load(); }

  double value(const Vec& a) const {
    return cost_value(a) / temperature_ - log_indicator(*region_, a);
  }

  // Norm-capped gradient; capping preserves direction and is counted.
  Vec gradient(const Vec& a) const {
    Vec g = cost_gradient(a);
    const Vec ind = log_indicator_gradient(*region_, a);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] / temperature_ - ind[i];
    if (!all_finite(g))
      throw DivergedStateError("non-finite potential gradient", a, {}, -1);
    const double n = norm(g);
    if (n > cap_) {
      scale_in_place(g, cap_ / n);
      cap_events_.fetch_add(1);
    }
    return g;
  }

 private:
  void check() const {
    if (!(temperature_ > 0.0)) throw std::invalid_argument("potential: temperature must be > 0");
    if (!(cap_ > 0.0)) throw std::invalid_argument("potential: gradient cap must be > 0");
  }

  double cost_value(const Vec& a) const {
    return cost_ ? (*cost_)(a) : surrogate_->predict(a);
  }

  Vec cost_gradient(const Vec& a) const {
    return cost_ ? cost_->gradient(a) : surrogate_->gradient(a);
  }

  const CostFunction* cost_ = nullptr;
  const PolyharmonicSurrogate* surrogate_ = nullptr;
  const AdmissibleRegion* region_;
  double temperature_;
  double cap_;
  mutable std::atomic<std::uint64_t> cap_events_{0};
};

inline double psi(const Potential& pot, const Vec& a) { return pot.value(a); }
inline Vec grad_psi(const Potential& pot, const Vec& a) { return pot.gradient(a); }

struct IsdeState {
  Vec position;
  Vec velocity;
};

struct IsdeConfig {
  double step = 0.1;            // Delta r
  double damping = 1.4;         // scalar coefficient of the diagonal damping matrix
  int steps_per_stage = 40;     // M_k; a stage applies M_k - 1 updates
  int spectral_divisor = 20;    // m in the stable-step rule, must stay > 10
  double damping_ratio = 0.7;   // target damping rate xi
  double max_step = 1.0;        // clip for the flat-potential path
  double lambda_floor = 1e-6;
  double gradient_cap = 1e6;

  void validate() const {
    if (!(step > 0.0)) throw std::invalid_argument("isde: step must be > 0");
    if (!(damping > 0.0)) throw std::invalid_argument("isde: damping must be > 0");
    if (!(step * damping < 2.0))
      throw std::invalid_argument("isde: step * damping must stay below 2");
    if (steps_per_stage < 1) throw std::invalid_argument("isde: steps per stage must be >= 1");
    if (spectral_divisor <= 10) throw std::invalid_argument("isde: spectral divisor must be > 10");
    if (!(damping_ratio > 0.0 && damping_ratio < 1.0))
      throw std::invalid_argument("isde: damping ratio must lie in (0, 1)");
    if (!(gradient_cap > 0.0)) throw std::invalid_argument("isde: gradient cap must be > 0");
  }
};

// N independent Gaussian increments with variance step each.
inline Vec wiener_increment(Rng& rng, std::size_t n, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("wiener_increment: step must be > 0");
  Vec dw(n);
  const double s = std::sqrt(step);
  for (double& x : dw) x = s * rng.normal();
  return dw;
}

// One update of the explicit scheme: the velocity moves first and the
// position advances with the new velocity.
inline IsdeState step(const IsdeState& state, const Potential& pot, const IsdeConfig& cfg,
                      Rng& rng) {
  const std::size_t n = state.position.size();
  const Vec g = pot.gradient(state.position);
  const Vec dw = wiener_increment(rng, n, cfg.step);
  const double keep = 1.0 - 0.5 * cfg.step * cfg.damping;
  const double noise = std::sqrt(cfg.damping);
  IsdeState out;
  out.velocity.resize(n);
  out.position.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.velocity[i] = keep * state.velocity[i] - cfg.step * g[i] + noise * dw[i];
    out.position[i] = state.position[i] + cfg.step * out.velocity[i];
  }
  if (!all_finite(out.position) || !all_finite(out.velocity))
    throw DivergedStateError("isde step produced a non-finite state", state.position,
                             state.velocity, -1);
  return out;
}

struct Trajectory {
  std::vector<Vec> positions;
  Vec psi_values;
};

// Applies steps_per_stage - 1 updates. On divergence the stage aborts and the
// error reports the failing step index together with the last valid state.
inline IsdeState integrate(IsdeState state, const Potential& pot, const IsdeConfig& cfg,
                           Rng& rng, Trajectory* record = nullptr) {
  for (int l = 1; l < cfg.steps_per_stage; ++l) {
    try {
      state = step(state, pot, cfg, rng);
    } catch (const DivergedStateError& e) {
      throw DivergedStateError(std::string(e.what()) + " at step " + std::to_string(l),
                               e.last_position().empty() ? state.position : e.last_position(),
                               e.last_velocity().empty() ? state.velocity : e.last_velocity(),
                               l);
    }
    if (record) {
      record->positions.push_back(state.position);
      record->psi_values.push_back(pot.value(state.position));
    }
  }
  return state;
}

// CSV rows "stage,step,u0,...,psi" for a recorded stage.
inline void write_trajectory_csv(std::ostream& os, int stage, const Trajectory& traj,
                                 bool header = false) {
  if (header) {
    os << "stage,step";
    if (!traj.positions.empty())
      for (std::size_t i = 0; i < traj.positions.front().size(); ++i) os << ",u" << i;
    os << ",psi\n";
  }
  char buf[40];
  for (std::size_t l = 0; l < traj.positions.size(); ++l) {
    os << stage << ',' << (l + 1);
    for (double v : traj.positions[l]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", traj.psi_values[l]);
    os << ',' << buf << '\n';
  }
}

// Largest Hessian eigenvalue of the potential at u, by power iteration on
// central-difference Hessian-vector products. Floored away from zero so the
// step rule stays defined on flat stretches.
inline double estimate_lambda_max(const Potential& pot, const Vec& u,
                                  double lambda_floor = 1e-6) {
  const std::size_t n = u.size();
  const double h = 1e-4 * (1.0 + norm(u));
  Vec v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = 1.0 + 0.5 * static_cast<double>(i) / static_cast<double>(n);
  scale_in_place(v, 1.0 / norm(v));

  Vec probe(n);
  double lambda = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    for (std::size_t i = 0; i < n; ++i) probe[i] = u[i] + h * v[i];
    Vec gp = pot.gradient(probe);
    for (std::size_t i = 0; i < n; ++i) probe[i] = u[i] - h * v[i];
    const Vec gm = pot.gradient(probe);
    for (std::size_t i = 0; i < n; ++i) gp[i] = (gp[i] - gm[i]) / (2.0 * h);
    const double next = norm(gp);
    if (next < lambda_floor) return lambda_floor;
    scale_in_place(gp, 1.0 / next);
    v = std::move(gp);
    const bool converged = std::abs(next - lambda) <= 1e-3 * next;
    lambda = next;
    if (converged) break;
  }
  return std::max(lambda, lambda_floor);
}

// Stable explicit step 2*pi / (m sqrt(lambda_max)).
inline double step_size(double lambda_max, int spectral_divisor) {
  if (!(lambda_max > 0.0)) throw std::invalid_argument("step_size: lambda_max must be > 0");
  if (spectral_divisor <= 10) throw std::invalid_argument("step_size: divisor must be > 10");
  return 2.0 * std::numbers::pi / (spectral_divisor * std::sqrt(lambda_max));
}

// Damping 2*xi*sqrt(lambda_max) targeting damping rate xi on the stiffest mode.
inline double damping_coefficient(double lambda_max, double damping_ratio) {
  if (!(lambda_max > 0.0))
    throw std::invalid_argument("damping_coefficient: lambda_max must be > 0");
  return 2.0 * damping_ratio * std::sqrt(lambda_max);
}

// Per-stage tuning: estimate the spectrum at the stage's starting point and
// derive step and damping from it. The step clip guards the floored path.
inline IsdeConfig tune_stage(const Potential& pot, const Vec& u, IsdeConfig cfg) {
  const double lambda = estimate_lambda_max(pot, u, cfg.lambda_floor);
  cfg.step = std::min(step_size(lambda, cfg.spectral_divisor), cfg.max_step);
  cfg.damping = damping_coefficient(lambda, cfg.damping_ratio);
  return cfg;
}

}  // namespace isde_anneal
