#include "corerl/cartpole.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "corerl/error.hpp"

namespace corerl {

namespace {

double wrap_angle(double a) {
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a == -std::numbers::pi ? std::numbers::pi : a;
}

}  // namespace

CartPoleParams CartPoleParams::perturbed(double factor) const {
  CartPoleParams p = *this;
  p.pole_mass *= factor;
  p.half_length *= factor;
  return p;
}

void CartPoleParams::validate() const {
  for (double v : {cart_mass, pole_mass, half_length, gravity, tau, force_limit}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::ConfigError, "cartpole parameters must be positive and finite");
    }
  }
}

CartPoleState CartPoleState::from_vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != 4) throw Error(ErrorCode::DimensionMismatch, "cartpole state has 4 entries");
  return {v(0), v(1), v(2), v(3)};
}

Eigen::Vector4d cartpole_derivatives(const CartPoleState& s, double force,
                                     const CartPoleParams& p) {
  const double total_mass = p.cart_mass + p.pole_mass;
  const double polemass_length = p.pole_mass * p.half_length;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);
  const double temp = (force + polemass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (p.gravity * sin_t - cos_t * temp) /
      (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;
  return {s.x_dot, x_acc, s.theta_dot, theta_acc};
}

StepResult cartpole_step(const CartPoleState& s, double force, const CartPoleParams& p) {
  const double f = std::clamp(force, -p.force_limit, p.force_limit);
  const Eigen::Vector4d d = cartpole_derivatives(s, f, p);

  CartPoleState next;
  next.x_dot = s.x_dot + p.tau * d(1);
  next.x = s.x + p.tau * next.x_dot;
  next.theta_dot = s.theta_dot + p.tau * d(3);
  next.theta = wrap_angle(s.theta + p.tau * next.theta_dot);

  const Eigen::Vector4d v = next.vec();
  if (!v.allFinite()) {
    throw Error(ErrorCode::NonFiniteState, "cartpole integration produced a non-finite state");
  }

  StepResult out;
  out.next_state = v;
  out.reward = cartpole_reward(next);
  out.done = std::abs(next.x) > kCartPoleXLimit || std::abs(next.theta) > std::numbers::pi / 2.0;
  out.terminal = out.done;
  return out;
}

double cartpole_reward(const CartPoleState& s) {
  return -100.0 * std::abs(s.theta) - 2.0 * s.x * s.x;
}

double cartpole_energy(const CartPoleState& s, const CartPoleParams& p) {
  const double m = p.pole_mass;
  const double l = p.half_length;
  const double kinetic = 0.5 * (p.cart_mass + m) * s.x_dot * s.x_dot +
                         m * l * s.x_dot * s.theta_dot * std::cos(s.theta) +
                         (2.0 / 3.0) * m * l * l * s.theta_dot * s.theta_dot;
  return kinetic + m * p.gravity * l * std::cos(s.theta);
}

LinearPlant linearize_known_model(const CartPoleParams& p) {
  p.validate();
  const double total_mass = p.cart_mass + p.pole_mass;
  const double polemass_length = p.pole_mass * p.half_length;
  const double den = p.half_length * (4.0 / 3.0 - p.pole_mass / total_mass);

  const double theta_acc_theta = p.gravity / den;
  const double theta_acc_force = -1.0 / (total_mass * den);
  const double x_acc_theta = -polemass_length * theta_acc_theta / total_mass;
  const double x_acc_force = 1.0 / total_mass - polemass_length * theta_acc_force / total_mass;

  LinearPlant plant;
  plant.A = Matrix::Zero(4, 4);
  plant.A(0, 1) = 1.0;
  plant.A(1, 2) = x_acc_theta;
  plant.A(2, 3) = 1.0;
  plant.A(3, 2) = theta_acc_theta;

  plant.B2 = Matrix::Zero(4, 1);
  plant.B2(1, 0) = x_acc_force;
  plant.B2(3, 0) = theta_acc_force;

  plant.B1 = Matrix::Zero(4, 2);
  plant.B1(1, 0) = 1.0;
  plant.B1(3, 1) = 1.0;

  plant.C1 = Eigen::Vector4d(1.0, 0.1, 3.0, 0.3).asDiagonal();
  return plant;
}

CartPoleEnv::CartPoleEnv(CartPoleParams params, int horizon, CartPoleResetRange reset_range)
    : params_(params), horizon_(horizon), reset_range_(reset_range) {
  params_.validate();
  if (horizon_ < 1) throw Error(ErrorCode::ConfigError, "cartpole horizon must be >= 1");
}

Eigen::VectorXd CartPoleEnv::action_low() const {
  return Eigen::VectorXd::Constant(1, -params_.force_limit);
}

Eigen::VectorXd CartPoleEnv::action_high() const {
  return Eigen::VectorXd::Constant(1, params_.force_limit);
}

Eigen::VectorXd CartPoleEnv::reset(Rng& rng) {
  const auto draw = [&](double half) {
    return std::uniform_real_distribution<double>(-half, half)(rng);
  };
  state_.x = draw(reset_range_.x);
  state_.x_dot = draw(reset_range_.x_dot);
  state_.theta = draw(reset_range_.theta);
  state_.theta_dot = draw(reset_range_.theta_dot);
  t_ = 0;
  return state_.vec();
}

StepResult CartPoleEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != 1) throw Error(ErrorCode::DimensionMismatch, "cartpole action is scalar");
  StepResult out = cartpole_step(state_, action(0), params_);
  state_ = CartPoleState::from_vec(out.next_state);
  ++t_;
  out.done = out.done || t_ >= horizon_;
  return out;
}

double CartPoleEnv::abs_theta() const { return std::abs(state_.theta); }
double CartPoleEnv::abs_x() const { return std::abs(state_.x); }

void CartPoleEnv::set_state(const CartPoleState& s) {
  state_ = s;
  t_ = 0;
}

}  // namespace corerl
