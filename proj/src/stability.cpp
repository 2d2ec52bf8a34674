#include "corerl/stability.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "corerl/error.hpp"

namespace corerl {

namespace {

Matrix robustness_matrix(const LinearPlant& plant, const HInfController& ctrl) {
  const Matrix PB1 = ctrl.P * plant.B1;
  return plant.C1.transpose() * plant.C1 + PB1 * PB1.transpose() / (ctrl.zeta * ctrl.zeta);
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n <= 1) return {0.5 * (lo + hi)};
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

}  // namespace

double robustness_sigma_m(const LinearPlant& plant, const HInfController& ctrl) {
  return matrix_norms(robustness_matrix(plant, ctrl)).min_singular_value;
}

StabilityCertificate stability_radius(const LinearPlant& plant, const HInfController& ctrl,
                                      double C_D, double C_pi, double lambda) {
  if (!(C_D >= 0.0) || !(C_pi >= 0.0) || !(lambda >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "C_D, C_pi and lambda must be nonnegative");
  }
  StabilityCertificate cert;
  cert.P = ctrl.P;
  cert.C_D = C_D;
  cert.C_pi = C_pi;
  cert.lambda = lambda;
  cert.sigma_m = robustness_sigma_m(plant, ctrl);
  if (!(cert.sigma_m > 1e-12)) {
    throw Error(ErrorCode::DegenerateSigmaM,
                "sigma_m = " + std::to_string(cert.sigma_m) + " is not positive");
  }
  const double p_norm = matrix_norms(ctrl.P).spectral_norm;
  const double pb2_norm = matrix_norms(ctrl.P * plant.B2).spectral_norm;
  const double mix = std::isinf(lambda) ? 0.0 : 2.0 / (1.0 + lambda);
  cert.radius = (2.0 * p_norm * C_D + mix * pb2_norm * C_pi) / cert.sigma_m;
  return cert;
}

double lemma2_margin(const Vector& s, const Vector& d, const Vector& u_e,
                     const LinearPlant& plant, const HInfController& ctrl, double lambda) {
  const Eigen::Index n = plant.state_dim();
  if (s.size() != n || d.size() != n || u_e.size() != plant.B2.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "lemma2 inputs do not match the plant");
  }
  const double lhs = 2.0 * s.dot(ctrl.P * (d + plant.B2 * u_e / (1.0 + lambda)));
  const double rhs = s.dot(robustness_matrix(plant, ctrl) * s);
  return rhs - lhs;
}

bool lemma2_condition(const Vector& s, const Vector& d, const Vector& u_e,
                      const LinearPlant& plant, const HInfController& ctrl, double lambda) {
  return lemma2_margin(s, d, u_e, plant, ctrl, lambda) > 0.0;
}

DisturbanceBound estimate_disturbance_bound(const StepFunction& step, double dt,
                                            const LinearPlant& plant,
                                            const std::vector<Vector>& states,
                                            const std::vector<Vector>& actions) {
  DisturbanceBound out;
  for (const Vector& s : states) {
    for (const Vector& a : actions) {
      const Vector f = (step(s, a) - s) / dt;
      const Vector d = f - plant.A * s - plant.B2 * a;
      out.C_D = std::max(out.C_D, d.norm());
      ++out.samples;
    }
  }
  return out;
}

DisturbanceBound estimate_cartpole_disturbance_bound(const CartPoleParams& true_params,
                                                     const LinearPlant& plant,
                                                     const std::vector<Vector>& states,
                                                     const std::vector<Vector>& actions) {
  const StepFunction step = [&](const Vector& s, const Vector& a) -> Vector {
    return cartpole_step(CartPoleState::from_vec(s), a(0), true_params).next_state;
  };
  return estimate_disturbance_bound(step, true_params.tau, plant, states, actions);
}

CartPoleSampleGrid cartpole_sample_grid(double x_max, double v_max, double theta_max,
                                        double w_max, double force_limit, int points_per_axis,
                                        int actions_per_axis) {
  CartPoleSampleGrid g;
  for (double x : linspace(-x_max, x_max, points_per_axis))
    for (double v : linspace(-v_max, v_max, points_per_axis))
      for (double th : linspace(-theta_max, theta_max, points_per_axis))
        for (double w : linspace(-w_max, w_max, points_per_axis))
          g.states.push_back(Eigen::Vector4d(x, v, th, w));
  for (double f : linspace(-force_limit, force_limit, actions_per_axis)) {
    g.actions.push_back(Vector::Constant(1, f));
  }
  return g;
}

LyapunovTrace monitor_trajectory(const std::vector<Vector>& states, const Matrix& P, double dt,
                                 MonitorLayout layout) {
  LyapunovTrace tr;
  tr.V.reserve(states.size());
  for (const Vector& s : states) {
    const double v = s.dot(P * s);
    tr.V.push_back(v);
    tr.max_V = std::max(tr.max_V, v);
    tr.max_state_norm = std::max(tr.max_state_norm, s.norm());
    if (layout.theta_index) tr.max_abs_theta = std::max(tr.max_abs_theta, std::abs(s(*layout.theta_index)));
    if (layout.x_index) tr.max_abs_x = std::max(tr.max_abs_x, std::abs(s(*layout.x_index)));
  }
  const std::size_t n = tr.V.size();
  tr.V_dot.assign(n, 0.0);
  if (n >= 2) {
    tr.V_dot[0] = (tr.V[1] - tr.V[0]) / dt;
    tr.V_dot[n - 1] = (tr.V[n - 1] - tr.V[n - 2]) / dt;
    for (std::size_t i = 1; i + 1 < n; ++i) tr.V_dot[i] = (tr.V[i + 1] - tr.V[i - 1]) / (2.0 * dt);
  }
  return tr;
}

double a_priori_action_gap_bound(const Vector& action_low, const Vector& action_high,
                                 const Matrix& K, double state_radius) {
  return (action_high - action_low).norm() + matrix_norms(K).spectral_norm * state_radius;
}

nlohmann::json certificate_to_json(const StabilityCertificate& cert) {
  return {{"P", matrix_to_json(cert.P)}, {"sigma_m", cert.sigma_m}, {"C_D", cert.C_D},
          {"C_pi", cert.C_pi},           {"lambda", cert.lambda},   {"radius", cert.radius}};
}

}  // namespace corerl
