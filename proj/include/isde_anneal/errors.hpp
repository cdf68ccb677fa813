#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isde_anneal {

// Linear system behind a surrogate fit was singular or too ill-conditioned
// to honor the interpolation and weight-sum tolerances.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, double condition_estimate)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

// Two control points closer than the configured minimum separation.
class DuplicatePointError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Fixed-step time integration of a benchmark model blew past its
// displacement threshold.
class DivergedSimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sampler state (or a gradient feeding it) went non-finite. Carries the last
// valid state and the step index at which integration stopped.
class DivergedStateError : public std::runtime_error {
 public:
  DivergedStateError(const std::string& what, std::vector<double> position,
                     std::vector<double> velocity, int step_index)
      : std::runtime_error(what),
        position_(std::move(position)),
        velocity_(std::move(velocity)),
        step_index_(step_index) {}

  const std::vector<double>& last_position() const noexcept { return position_; }
  const std::vector<double>& last_velocity() const noexcept { return velocity_; }
  int step_index() const noexcept { return step_index_; }

 private:
  std::vector<double> position_;
  std::vector<double> velocity_;
  int step_index_;
};

// Aggregated configuration problems; carries every issue found so a bad
// config is reported in one shot.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string all = "invalid configuration:";
    for (const auto& s : issues) {
      all += "\n  - ";
      all += s;
    }
    return all;
  }

  std::vector<std::string> issues_;
};

}  // namespace isde_anneal
