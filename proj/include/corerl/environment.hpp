#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "corerl/rng.hpp"

namespace corerl {

struct StepResult {
  Eigen::VectorXd next_state;
  double reward = 0.0;
  bool done = false;      // episode over: failure or horizon
  bool terminal = false;  // failure (divergence guard or collision); no bootstrapping past it
  bool collision = false;
};

/// Episodic task driven by the training loop. One instance per run; not
/// thread-safe, but instances share no state with each other.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index observation_dim() const = 0;
  virtual Eigen::Index action_dim() const = 0;
  virtual Eigen::VectorXd action_low() const = 0;
  virtual Eigen::VectorXd action_high() const = 0;
  virtual int horizon() const = 0;

  /// Starts a new episode and returns the first observation.
  virtual Eigen::VectorXd reset(Rng& rng) = 0;

  /// Advances one step; `StepResult::next_state` is the next observation.
  virtual StepResult step(const Eigen::VectorXd& action) = 0;

  /// Physical state in the layout the control prior expects.
  virtual Eigen::VectorXd prior_state() const = 0;

  /// State used for Lyapunov monitoring (deviation from the setpoint).
  virtual Eigen::VectorXd monitor_state() const = 0;

  /// Angle and position deviations for tasks that have them, else 0.
  virtual double abs_theta() const { return 0.0; }
  virtual double abs_x() const { return 0.0; }
};

}  // namespace corerl
