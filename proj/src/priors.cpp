#include "corerl/priors.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "corerl/error.hpp"

namespace corerl {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vector clip(const Vector& a, const ControlPrior& prior) {
  return a.cwiseMax(prior.action_low).cwiseMin(prior.action_high);
}

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_json_vec(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

Eigen::Index ControlPrior::state_dim() const {
  return std::visit(Overloaded{[](const LinearStateFeedback& l) { return l.K.cols(); },
                               [](const BangBang&) { return Eigen::Index{6}; }},
                    law);
}

Vector evaluate_prior(const ControlPrior& prior, const Vector& state) {
  if (state.size() != prior.state_dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "prior expects state dimension " + std::to_string(prior.state_dim()) + ", got " +
                    std::to_string(state.size()));
  }
  return std::visit(
      Overloaded{
          [&](const LinearStateFeedback& l) -> Vector {
            return clip(-l.K * (state - l.setpoint), prior);
          },
          [&](const BangBang& b) -> Vector {
            const double ds = state(2) - 2.0 * state(1) + state(0);
            const double dv = state(5) - 2.0 * state(4) + state(3);
            const double drive = b.kp * ds + b.kd * dv;
            double a = 0.0;
            if (drive > 0.0) {
              a = b.accel_hi;
            } else if (drive < 0.0) {
              a = b.accel_lo;
            }
            return clip(Vector::Constant(1, a), prior);
          }},
      prior.law);
}

double cartpole_prior_rollout_max_theta(const ControlPrior& prior, const CartPoleParams& params,
                                        const CartPoleState& start, int steps) {
  CartPoleState s = start;
  double max_theta = std::abs(s.theta);
  for (int t = 0; t < steps; ++t) {
    const Vector u = evaluate_prior(prior, s.vec());
    const StepResult r = cartpole_step(s, u(0), params);
    s = CartPoleState::from_vec(r.next_state);
    max_theta = std::max(max_theta, std::abs(s.theta));
    if (r.done) break;
  }
  return max_theta;
}

CartPolePriorDesign design_cartpole_prior(const CartPoleParams& true_params,
                                          const CartPolePriorOptions& options) {
  CartPolePriorDesign d;
  d.model = true_params.perturbed(options.model_perturbation);
  d.plant = linearize_known_model(d.model);
  try {
    const HInfController tightest =
        synthesize_hinf(d.plant, options.gamma_bracket, options.gamma_tol);
    if (options.gamma_margin > 1.0) {
      const RiccatiSolution sol = solve_care(d.plant, tightest.zeta * options.gamma_margin);
      d.controller.P = sol.P;
      d.controller.K = d.plant.B2.transpose() * sol.P;
      d.controller.zeta = sol.gamma;
    } else {
      d.controller = tightest;
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::SynthesisFailed, std::string("cartpole prior: ") + e.what());
  }

  d.prior.law = LinearStateFeedback{d.controller.K, Vector::Zero(4)};
  d.prior.action_low = Vector::Constant(1, -true_params.force_limit);
  d.prior.action_high = Vector::Constant(1, true_params.force_limit);

  if (options.verify) {
    const int steps = static_cast<int>(std::lround(10.0 / true_params.tau));
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        CartPoleState start;
        start.theta = -0.2 + 0.1 * i;
        start.x = -1.0 + 0.5 * j;
        const double max_theta =
            cartpole_prior_rollout_max_theta(d.prior, true_params, start, steps);
        if (!(max_theta < std::numbers::pi / 2.0)) {
          throw Error(ErrorCode::SynthesisFailed,
                      "prior fails to hold the pole from theta=" + std::to_string(start.theta) +
                          ", x=" + std::to_string(start.x));
        }
      }
    }
  }
  return d;
}

ControlPrior build_cartpole_prior(const CartPoleParams& true_params,
                                  const CartPolePriorOptions& options) {
  return design_cartpole_prior(true_params, options).prior;
}

ControlPrior build_carfollow_prior(double accel_lo, double accel_hi) {
  ControlPrior p;
  p.law = BangBang{0.4, 0.5, accel_hi, accel_lo};
  p.action_low = Vector::Constant(1, accel_lo);
  p.action_high = Vector::Constant(1, accel_hi);
  return p;
}

nlohmann::json prior_to_json(const ControlPrior& prior) {
  nlohmann::json j;
  std::visit(Overloaded{[&](const LinearStateFeedback& l) {
                          j["variant"] = "LinearStateFeedback";
                          j["K"] = matrix_to_json(l.K);
                          j["setpoint"] = to_vec(l.setpoint);
                        },
                        [&](const BangBang& b) {
                          j["variant"] = "BangBang";
                          j["kp"] = b.kp;
                          j["kd"] = b.kd;
                          j["accel_hi"] = b.accel_hi;
                          j["accel_lo"] = b.accel_lo;
                        }},
             prior.law);
  j["action_low"] = to_vec(prior.action_low);
  j["action_high"] = to_vec(prior.action_high);
  return j;
}

ControlPrior prior_from_json(const nlohmann::json& j) {
  ControlPrior p;
  const auto variant = j.at("variant").get<std::string>();
  if (variant == "LinearStateFeedback") {
    p.law = LinearStateFeedback{matrix_from_json(j.at("K")), from_json_vec(j.at("setpoint"))};
  } else if (variant == "BangBang") {
    p.law = BangBang{j.at("kp").get<double>(), j.at("kd").get<double>(),
                     j.at("accel_hi").get<double>(), j.at("accel_lo").get<double>()};
  } else {
    throw Error(ErrorCode::ConfigError, "unknown prior variant " + variant);
  }
  p.action_low = from_json_vec(j.at("action_low"));
  p.action_high = from_json_vec(j.at("action_high"));
  return p;
}

}  // namespace corerl
