#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "corerl/error.hpp"
#include "corerl/priors.hpp"

using namespace corerl;

namespace {

Vector carfollow_state(double s_back, double s_curr, double s_front, double v_back = 10.0,
                       double v_curr = 10.0, double v_front = 10.0) {
  Vector s(6);
  s << s_back, s_curr, s_front, v_back, v_curr, v_front;
  return s;
}

}  // namespace

TEST_CASE("linear prior is zero at its setpoint and clipped elsewhere") {
  const ControlPrior prior = build_cartpole_prior(CartPoleParams{});
  CHECK(evaluate_prior(prior, Vector::Zero(4)).isZero(0.0));
  const Vector big = evaluate_prior(prior, Eigen::Vector4d(0, 0, 1.0, 0));
  CHECK(std::abs(big(0)) == doctest::Approx(10.0));
  CHECK_THROWS_AS(evaluate_prior(prior, Vector::Zero(3)), Error);

  ControlPrior shifted;
  shifted.law = LinearStateFeedback{Matrix::Constant(1, 2, 1.0), Eigen::Vector2d(1.0, -1.0)};
  shifted.action_low = Vector::Constant(1, -5.0);
  shifted.action_high = Vector::Constant(1, 5.0);
  CHECK(evaluate_prior(shifted, Eigen::Vector2d(1.0, -1.0))(0) == 0.0);
  CHECK(evaluate_prior(shifted, Eigen::Vector2d(2.0, 0.0))(0) == doctest::Approx(-2.0));
}

TEST_CASE("cartpole prior holds the true pole from theta 0.1") {
  const CartPoleParams p;
  const ControlPrior prior = build_cartpole_prior(p);
  const double max_theta = cartpole_prior_rollout_max_theta(prior, p, {0.0, 0.0, 0.1, 0.0}, 500);
  CHECK(max_theta < std::numbers::pi / 2.0);
  CHECK(max_theta <= 0.1 + 1e-12);  // holds rather than drifts
}

TEST_CASE("cartpole prior stabilizes the 5x5 grid (build-time check)") {
  const CartPoleParams p;
  CartPolePriorOptions opt;
  opt.verify = true;
  const CartPolePriorDesign d = design_cartpole_prior(p, opt);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const CartPoleState s{-1.0 + 0.5 * j, 0.0, -0.2 + 0.1 * i, 0.0};
      CHECK(cartpole_prior_rollout_max_theta(d.prior, p, s, 500) < std::numbers::pi / 2.0);
    }
  }
  CHECK(d.model.pole_mass == doctest::Approx(0.16));
  CHECK(d.model.half_length == doctest::Approx(0.8));
}

TEST_CASE("cartpole prior without model error gives a Hurwitz linear loop") {
  CartPolePriorOptions opt;
  opt.model_perturbation = 1.0;
  const CartPolePriorDesign d = design_cartpole_prior(CartPoleParams{}, opt);
  CHECK(is_hurwitz(d.plant.A - d.plant.B2 * d.controller.K));
}

TEST_CASE("bang-bang prior branches") {
  const ControlPrior prior = build_carfollow_prior();
  // ds = s_front - 2 s_curr + s_back = 5, dv = 0: 0.4 * 5 > 0.
  CHECK(evaluate_prior(prior, carfollow_state(0.0, 10.0, 25.0))(0) == 2.5);
  CHECK(evaluate_prior(prior, carfollow_state(0.0, 15.0, 25.0))(0) == -5.0);
  // Symmetric gaps and velocities.
  CHECK(evaluate_prior(prior, carfollow_state(0.0, 12.0, 24.0))(0) == 0.0);
  // Exact cancellation: 0.4 * 5 + 0.5 * (-4) = 0.
  CHECK(evaluate_prior(prior, carfollow_state(0.0, 10.0, 25.0, 10.0, 12.0, 10.0))(0) == 0.0);
  // Velocity term alone.
  CHECK(evaluate_prior(prior, carfollow_state(0.0, 12.0, 24.0, 10.0, 10.0, 12.0))(0) == 2.5);
  CHECK_THROWS_AS(evaluate_prior(prior, Vector::Zero(4)), Error);
}

TEST_CASE("priors are pure and respect bounds") {
  const ControlPrior cp = build_cartpole_prior(CartPoleParams{});
  const ControlPrior bb = build_carfollow_prior();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0), pos(0.0, 50.0), vel(0.0, 30.0);
  for (int i = 0; i < 500; ++i) {
    const Vector s = Eigen::Vector4d(u(rng), u(rng), u(rng), u(rng));
    const Vector a = evaluate_prior(cp, s);
    CHECK(a == evaluate_prior(cp, s));
    CHECK(std::abs(a(0)) <= 10.0);
    const Vector c = carfollow_state(pos(rng), pos(rng), pos(rng), vel(rng), vel(rng), vel(rng));
    const double b = evaluate_prior(bb, c)(0);
    CHECK((b == 2.5 || b == -5.0 || b == 0.0));
  }
}

TEST_CASE("prior JSON round trip") {
  const ControlPrior cp = build_cartpole_prior(CartPoleParams{});
  const ControlPrior back = prior_from_json(prior_to_json(cp));
  const Vector s = Eigen::Vector4d(0.1, -0.2, 0.05, 0.3);
  CHECK(evaluate_prior(back, s) == evaluate_prior(cp, s));
  const ControlPrior bb = prior_from_json(prior_to_json(build_carfollow_prior()));
  CHECK(evaluate_prior(bb, carfollow_state(0.0, 10.0, 25.0))(0) == 2.5);
  nlohmann::json bad = prior_to_json(cp);
  bad["variant"] = "Nope";
  CHECK_THROWS_AS(prior_from_json(bad), Error);
}
