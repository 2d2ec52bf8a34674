#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "corerl/agent.hpp"
#include "corerl/error.hpp"
#include "support.hpp"

using namespace corerl;

namespace {

DdpgAgent small_agent(std::uint64_t seed, AgentConfig cfg = {}) {
  cfg.hidden = {8, 8};
  Rng rng(seed);
  return DdpgAgent::create(3, Eigen::VectorXd::Constant(1, -2.0), Eigen::VectorXd::Constant(1, 2.0),
                           cfg, rng);
}

Transition make_transition(const Eigen::VectorXd& s, double a, double r, const Eigen::VectorXd& s2,
                           bool done) {
  Transition t;
  t.s = s;
  t.a = Eigen::VectorXd::Constant(1, a);
  t.r = r;
  t.s_next = s2;
  t.done = done;
  t.a_rl = t.a;
  return t;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto r = testing::gradient_check_trial(trial);
    CHECK_MESSAGE(r.actor <= 1e-4, "trial " << trial << " actor " << r.actor);
    CHECK_MESSAGE(r.critic <= 1e-4, "trial " << trial << " critic " << r.critic);
  }
}

TEST_CASE("policy sampling") {
  DdpgAgent agent = small_agent(1);
  const Eigen::VectorXd s = Eigen::Vector3d(0.3, -0.1, 0.2);
  const double mu = agent.policy.mean(s)(0);
  CHECK(std::abs(mu) <= 2.0);

  SUBCASE("degenerate covariance returns the mean") {
    agent.policy.std.setConstant(0.0);
    Rng rng(4);
    CHECK(sample_action(agent.policy, s, rng)(0) == mu);
  }
  SUBCASE("Monte-Carlo mean and variance") {
    agent.policy.std.setConstant(0.1);
    Rng rng(5);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = sample_action(agent.policy, s, rng)(0);
      sum += a;
      sum2 += a * a;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - mu) <= 4.0 * 0.1 / std::sqrt(double(n)));
    CHECK(var == doctest::Approx(0.01).epsilon(0.02));
  }
  SUBCASE("same rng state, same actions") {
    Rng a(9), b(9);
    for (int i = 0; i < 20; ++i) {
      CHECK(sample_action(agent.policy, s, a) == sample_action(agent.policy, s, b));
    }
  }
  SUBCASE("samples stay inside the bounds") {
    agent.policy.std.setConstant(5.0);
    Rng rng(6);
    for (int i = 0; i < 1000; ++i) CHECK(std::abs(sample_action(agent.policy, s, rng)(0)) <= 2.0);
  }
}

TEST_CASE("td error identities") {
  DdpgAgent agent = small_agent(2);
  agent.config.absorbing_terminal = false;
  const Eigen::VectorXd s = Eigen::Vector3d(0.1, 0.2, 0.3);
  const Eigen::VectorXd s2 = Eigen::Vector3d(-0.2, 0.0, 0.4);
  const double gamma = 0.95;

  agent.critic.online.params().setZero();
  CHECK(td_error(agent, make_transition(s, 0.5, 0.0, s2, false), gamma) == 0.0);

  // Constant critic c: only the final bias is nonzero.
  const double c = 1.7;
  agent.critic.online.params()(agent.critic.online.params().size() - 1) = c;
  CHECK(td_error(agent, make_transition(s, 0.5, 0.0, s2, false), gamma) ==
        doctest::Approx((gamma - 1.0) * c).epsilon(1e-14));

  // Random critic against a direct recomputation.
  DdpgAgent fresh = small_agent(3);
  Rng rng(8);
  std::normal_distribution<double> N;
  for (Eigen::Index i = 0; i < fresh.critic.online.params().size(); ++i) {
    fresh.critic.online.params()(i) = 0.5 * N(rng);
  }
  for (Eigen::Index i = 0; i < fresh.critic.target_actor.params().size(); ++i) {
    fresh.critic.target_actor.params()(i) = 0.5 * N(rng);
  }
  const Transition t = make_transition(s, 0.7, -0.3, s2, false);
  const auto q = [&](const Eigen::VectorXd& state, double a) {
    Eigen::VectorXd x(4);
    x << state, a - fresh.policy.center()(0);
    return fresh.critic.online.forward(x)(0, 0);
  };
  const double a_next = 2.0 * std::tanh(fresh.critic.target_actor.forward(s2)(0, 0));
  const double expected = -0.3 + gamma * q(s2, a_next) - q(s, 0.7);
  CHECK(std::abs(td_error(fresh, t, gamma) - expected) <= 1e-12);

  // Failure transitions: zero tail, or the absorbing r / (1 - gamma).
  const Transition dead = make_transition(s, 0.7, -0.3, s2, true);
  fresh.config.absorbing_terminal = false;
  CHECK(std::abs(td_error(fresh, dead, gamma) - (-0.3 - q(s, 0.7))) <= 1e-12);
  fresh.config.absorbing_terminal = true;
  CHECK(std::abs(td_error(fresh, dead, gamma) - (-0.3 / (1.0 - gamma) - q(s, 0.7))) <= 1e-12);
}

TEST_CASE("zero learning rates leave online parameters unchanged") {
  DdpgAgent agent = small_agent(4);
  std::vector<Transition> data;
  Rng rng(1);
  std::normal_distribution<double> N;
  for (int i = 0; i < 16; ++i) {
    data.push_back(make_transition(Eigen::Vector3d(N(rng), N(rng), N(rng)), 0.3 * N(rng), N(rng),
                                   Eigen::Vector3d(N(rng), N(rng), N(rng)), false));
  }
  std::vector<const Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  const Eigen::VectorXd actor = agent.policy.actor.params();
  const Eigen::VectorXd critic = agent.critic.online.params();
  for (int k = 0; k < 5; ++k) update(agent, batch, 0.99, 0.0, 0.0);
  CHECK(agent.policy.actor.params() == actor);
  CHECK(agent.critic.online.params() == critic);
}

TEST_CASE("bandit regression drives Q to the reward") {
  AgentConfig cfg;
  cfg.absorbing_terminal = false;
  DdpgAgent agent = small_agent(5, cfg);
  std::vector<Transition> data;
  const std::vector<std::pair<Eigen::Vector3d, double>> arms{
      {{0.5, 0.0, -0.5}, 1.0}, {{-0.5, 0.2, 0.1}, -0.5}, {{0.0, -0.4, 0.3}, 0.25}, {{0.3, 0.3, 0.3}, 0.0}};
  for (std::size_t i = 0; i < arms.size(); ++i) {
    data.push_back(make_transition(arms[i].first, -1.0 + 0.6 * double(i), arms[i].second,
                                   arms[i].first, true));
  }
  std::vector<const Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  for (int k = 0; k < 3000; ++k) update(agent, batch, 0.99, 0.0, 1e-3);
  for (const auto& t : data) {
    CHECK(std::abs(agent.critic.value(t.s, t.a - agent.policy.center()) - t.r) <= 1e-2);
    CHECK(std::abs(td_error(agent, t, 0.99)) <= 1e-2);
  }
}

TEST_CASE("replay buffer") {
  SUBCASE("eviction") {
    ReplayBuffer buf(2);
    for (int i = 0; i < 3; ++i) {
      buf.push(make_transition(Eigen::Vector3d::Zero(), 0.0, double(i), Eigen::Vector3d::Zero(), false));
    }
    CHECK(buf.size() == 2);
    std::set<double> rewards{buf.at(0).r, buf.at(1).r};
    CHECK(rewards == std::set<double>{1.0, 2.0});
  }
  SUBCASE("oversized or empty samples") {
    ReplayBuffer buf(10);
    Rng rng(1);
    try {
      buf.sample(1, rng);
      FAIL("expected EmptyBuffer");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyBuffer);
    }
    buf.push(make_transition(Eigen::Vector3d::Zero(), 0.0, 0.0, Eigen::Vector3d::Zero(), false));
    CHECK_THROWS_AS(buf.sample(2, rng), Error);
    CHECK_THROWS_AS(ReplayBuffer(0), Error);
  }
  SUBCASE("uniform without replacement (chi-square at 1%)") {
    const int n = 20;
    ReplayBuffer buf(n);
    for (int i = 0; i < n; ++i) {
      buf.push(make_transition(Eigen::Vector3d::Zero(), 0.0, double(i), Eigen::Vector3d::Zero(), false));
    }
    Rng rng(2024);
    std::vector<double> counts(n, 0.0);
    const int draws = 25000, batch = 4;
    for (int d = 0; d < draws; ++d) {
      const auto picked = buf.sample(batch, rng);
      std::set<const Transition*> distinct(picked.begin(), picked.end());
      CHECK(distinct.size() == picked.size());
      for (const auto* t : picked) counts[static_cast<std::size_t>(t->r)] += 1.0;
    }
    const double expected = double(draws) * batch / n;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 36.19);  // chi-square 99th percentile, 19 degrees of freedom
  }
}

TEST_CASE("fixed input scale") {
  Rng rng(4);
  Mlp plain({3, 5, 2}, rng, 0.5);
  Mlp scaled = plain;
  const Eigen::Vector3d scale(2.0, 0.5, 10.0);
  scaled.set_input_scale(scale);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4);
  CHECK(scaled.forward(x).isApprox(plain.forward(scale.asDiagonal() * x), 1e-14));

  Mlp::Tape tape_s, tape_p;
  scaled.forward(x, &tape_s);
  plain.forward(scale.asDiagonal() * x, &tape_p);
  const Eigen::MatrixXd d = Eigen::MatrixXd::Ones(2, 4);
  Eigen::VectorXd gs, gp;
  const Eigen::MatrixXd dx_s = scaled.backward(tape_s, d, &gs);
  const Eigen::MatrixXd dx_p = plain.backward(tape_p, d, &gp);
  CHECK(gs.isApprox(gp, 1e-14));
  CHECK(dx_s.isApprox(scale.asDiagonal() * dx_p, 1e-14));

  CHECK_THROWS_AS(scaled.set_input_scale(Eigen::Vector2d(1.0, 1.0)), Error);
  AgentConfig cfg;
  cfg.observation_scale = {1.0, 0.0, 1.0};
  CHECK_THROWS_AS(small_agent(1, cfg), Error);
  cfg.observation_scale = {1.0, 1.0};
  CHECK_THROWS_AS(small_agent(1, cfg), Error);
}

TEST_CASE("checkpoint round trip") {
  AgentConfig cfg;
  cfg.twin_critics = true;
  cfg.reward_scale = 0.01;
  cfg.reward_offset = 0.5;
  cfg.observation_scale = {1.0, 2.0, 0.5};
  DdpgAgent agent = small_agent(6, cfg);
  const auto path = std::filesystem::temp_directory_path() / "corerl_test_ckpt.json";
  save_checkpoint(agent, 7, 3, path);
  const DdpgAgent back = load_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(back.policy.actor.params() == agent.policy.actor.params());
  CHECK(back.critic.online.params() == agent.critic.online.params());
  CHECK(back.critic.online2.params() == agent.critic.online2.params());
  CHECK(back.critic.target_actor.params() == agent.critic.target_actor.params());
  CHECK(back.config.reward_scale == 0.01);
  CHECK(back.config.reward_offset == 0.5);
  CHECK(back.config.observation_scale == cfg.observation_scale);
  CHECK(back.critic.target2.input_scale() == agent.critic.target2.input_scale());
  const Eigen::VectorXd s = Eigen::Vector3d(0.1, 0.2, -0.3);
  CHECK(back.policy.mean(s) == agent.policy.mean(s));
  CHECK_THROWS_AS(checkpoint_from_json(nlohmann::json{{"format", "other"}}), Error);
}
