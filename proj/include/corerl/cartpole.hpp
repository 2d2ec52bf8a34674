#pragma once

#include <array>

#include "corerl/environment.hpp"
#include "corerl/robust_control.hpp"

namespace corerl {

/// Continuous-force cartpole with the classic constants.
struct CartPoleParams {
  double cart_mass = 1.0;    // kg
  double pole_mass = 0.1;    // kg
  double half_length = 0.5;  // m
  double gravity = 9.8;      // m/s^2
  double tau = 0.02;         // s
  double force_limit = 10.0; // N

  /// Pole mass and half-length scaled by `factor` (model error for synthesis).
  CartPoleParams perturbed(double factor) const;
  void validate() const;
};

struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;

  Eigen::Vector4d vec() const { return {x, x_dot, theta, theta_dot}; }
  static CartPoleState from_vec(const Eigen::Ref<const Eigen::VectorXd>& v);
};

inline constexpr double kCartPoleXLimit = 10.0;

/// Right-hand side (x_dot, x_acc, theta_dot, theta_acc) of the cartpole ODE.
Eigen::Vector4d cartpole_derivatives(const CartPoleState& s, double force,
                                     const CartPoleParams& params);

/// One semi-implicit Euler step. `done` reflects the divergence guard only;
/// the episode horizon is enforced by CartPoleEnv.
StepResult cartpole_step(const CartPoleState& s, double force, const CartPoleParams& params);

/// -100 |theta| - 2 x^2.
double cartpole_reward(const CartPoleState& s);

/// Mechanical energy of the cart plus uniform rod (pivot inertia 4/3 m l^2).
double cartpole_energy(const CartPoleState& s, const CartPoleParams& params);

/// Jacobian linearization at the upright equilibrium. B1 injects force-like
/// disturbances into the two acceleration channels.
LinearPlant linearize_known_model(const CartPoleParams& params);

struct CartPoleResetRange {
  double x = 0.05;
  double x_dot = 0.05;
  double theta = 0.05;
  double theta_dot = 0.05;
};

class CartPoleEnv final : public Environment {
 public:
  CartPoleEnv(CartPoleParams params, int horizon, CartPoleResetRange reset_range = {});

  std::string name() const override { return "cartpole"; }
  Eigen::Index observation_dim() const override { return 4; }
  Eigen::Index action_dim() const override { return 1; }
  Eigen::VectorXd action_low() const override;
  Eigen::VectorXd action_high() const override;
  int horizon() const override { return horizon_; }

  Eigen::VectorXd reset(Rng& rng) override;
  StepResult step(const Eigen::VectorXd& action) override;
  Eigen::VectorXd prior_state() const override { return state_.vec(); }
  Eigen::VectorXd monitor_state() const override { return state_.vec(); }
  double abs_theta() const override;
  double abs_x() const override;

  /// Sets the state directly (for evaluation rollouts and tests).
  void set_state(const CartPoleState& s);
  const CartPoleState& state() const { return state_; }
  const CartPoleParams& params() const { return params_; }

 private:
  CartPoleParams params_;
  int horizon_;
  CartPoleResetRange reset_range_;
  CartPoleState state_;
  int t_ = 0;
};

}  // namespace corerl
