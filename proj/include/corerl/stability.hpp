#pragma once

#include <Eigen/Dense>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "corerl/cartpole.hpp"
#include "corerl/robust_control.hpp"

namespace corerl {

/// Ball ||s||_2 <= radius that the mixed policy keeps forward invariant, with
/// radius = (2 ||P||_2 C_D + 2/(1+lambda) ||P B2||_2 C_pi) / sigma_m and
/// sigma_m = sigma_min(C1^T C1 + zeta^-2 P B1 B1^T P).
struct StabilityCertificate {
  Matrix P;
  double sigma_m = 0.0;
  double C_D = 0.0;
  double C_pi = 0.0;
  double lambda = 0.0;
  double radius = 0.0;
};

StabilityCertificate stability_radius(const LinearPlant& plant, const HInfController& ctrl,
                                      double C_D, double C_pi, double lambda);

/// sigma_min(C1^T C1 + zeta^-2 P B1 B1^T P).
double robustness_sigma_m(const LinearPlant& plant, const HInfController& ctrl);

/// Right side minus left side of the Lyapunov-decrease condition
/// 2 s^T P (d + B2 u_e / (1+lambda)) < s^T (C1^T C1 + zeta^-2 P B1 B1^T P) s.
double lemma2_margin(const Vector& s, const Vector& d, const Vector& u_e,
                     const LinearPlant& plant, const HInfController& ctrl, double lambda);

bool lemma2_condition(const Vector& s, const Vector& d, const Vector& u_e,
                      const LinearPlant& plant, const HInfController& ctrl, double lambda);

struct DisturbanceBound {
  double C_D = 0.0;
  std::size_t samples = 0;
};

/// One simulator step s -> s'. Used to finite-difference the true dynamics.
using StepFunction = std::function<Vector(const Vector& state, const Vector& action)>;

/// max over samples of || (step(s,a) - s)/dt - A s - B2 a ||_2.
DisturbanceBound estimate_disturbance_bound(const StepFunction& step, double dt,
                                            const LinearPlant& plant,
                                            const std::vector<Vector>& states,
                                            const std::vector<Vector>& actions);

/// Cartpole convenience: finite-differences cartpole_step with `true_params`.
DisturbanceBound estimate_cartpole_disturbance_bound(const CartPoleParams& true_params,
                                                     const LinearPlant& plant,
                                                     const std::vector<Vector>& states,
                                                     const std::vector<Vector>& actions);

/// Evenly spaced samples of the box |x| <= x_max, |x_dot| <= v_max,
/// |theta| <= theta_max, |theta_dot| <= w_max, times `actions_per_axis`
/// forces in [-force_limit, force_limit].
struct CartPoleSampleGrid {
  std::vector<Vector> states;
  std::vector<Vector> actions;
};
CartPoleSampleGrid cartpole_sample_grid(double x_max, double v_max, double theta_max,
                                        double w_max, double force_limit, int points_per_axis,
                                        int actions_per_axis);

struct LyapunovTrace {
  std::vector<double> V;
  std::vector<double> V_dot;
  double max_state_norm = 0.0;
  double max_abs_theta = 0.0;
  double max_abs_x = 0.0;
  double max_V = 0.0;
};

struct MonitorLayout {
  std::optional<Eigen::Index> theta_index;
  std::optional<Eigen::Index> x_index;
};

/// V = s^T P s along the trajectory, V_dot by central differences (one-sided
/// at the ends) with step dt.
LyapunovTrace monitor_trajectory(const std::vector<Vector>& states, const Matrix& P, double dt,
                                 MonitorLayout layout = {});

/// Default C_pi: ||action range||_2 + ||K||_2 * state_radius.
double a_priori_action_gap_bound(const Vector& action_low, const Vector& action_high,
                                 const Matrix& K, double state_radius);

nlohmann::json certificate_to_json(const StabilityCertificate& cert);

}  // namespace corerl
