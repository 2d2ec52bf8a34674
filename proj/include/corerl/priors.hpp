#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <utility>
#include <variant>

#include "corerl/cartpole.hpp"
#include "corerl/robust_control.hpp"

namespace corerl {

/// u = clip(-K (s - setpoint)).
struct LinearStateFeedback {
  Matrix K;
  Vector setpoint;
};

/// Three-branch rule on (s_back, s_curr, s_front, v_back, v_curr, v_front):
/// accel_hi if kp*ds + kd*dv > 0, accel_lo if < 0, else 0, where
/// ds = s_front - 2 s_curr + s_back and dv likewise.
struct BangBang {
  double kp = 0.4;
  double kd = 0.5;
  double accel_hi = 2.5;
  double accel_lo = -5.0;
};

struct ControlPrior {
  std::variant<LinearStateFeedback, BangBang> law;
  Vector action_low;
  Vector action_high;

  Eigen::Index state_dim() const;
  Eigen::Index action_dim() const { return action_low.size(); }
};

Vector evaluate_prior(const ControlPrior& prior, const Vector& state);

/// Everything produced while synthesizing the cartpole prior.
struct CartPolePriorDesign {
  CartPoleParams model;  // perturbed parameters used for synthesis
  LinearPlant plant;
  HInfController controller;
  ControlPrior prior;
};

struct CartPolePriorOptions {
  double model_perturbation = 1.6;
  std::pair<double, double> gamma_bracket{1.0, 50.0};
  double gamma_tol = 1e-4;
  /// Attenuation used for the deployed gain, as a multiple of the smallest
  /// feasible level found by bisection.
  double gamma_margin = 1.2;
  bool verify = true;
};

/// Linearizes the perturbed model, synthesizes the H-infinity gain and, when
/// `verify` is set, checks it holds the true cartpole upright from a 5x5 grid
/// of initial (theta, x) with |theta| <= 0.2. Throws SynthesisFailed otherwise.
CartPolePriorDesign design_cartpole_prior(const CartPoleParams& true_params,
                                          const CartPolePriorOptions& options = {});

ControlPrior build_cartpole_prior(const CartPoleParams& true_params,
                                  const CartPolePriorOptions& options = {});

ControlPrior build_carfollow_prior(double accel_lo = -5.0, double accel_hi = 2.5);

/// Runs the prior alone on the true cartpole; returns max |theta| over the run.
double cartpole_prior_rollout_max_theta(const ControlPrior& prior, const CartPoleParams& params,
                                        const CartPoleState& start, int steps);

nlohmann::json prior_to_json(const ControlPrior& prior);
ControlPrior prior_from_json(const nlohmann::json& j);

}  // namespace corerl
