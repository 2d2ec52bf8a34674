// Helpers shared by the unit tests and the acceptance binary.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "corerl/agent.hpp"

namespace corerl::testing {

struct GradCheck {
  double actor = 0.0;   // worst relative error over actor parameters
  double critic = 0.0;  // worst over every critic parameter (both critics when twin)
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
}

template <class Loss>
double worst_fd_error(Eigen::VectorXd& params, const Eigen::VectorXd& grad, Loss loss,
                      double h = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double orig = params(i);
    params(i) = orig + h;
    const double up = loss();
    params(i) = orig - h;
    const double down = loss();
    params(i) = orig;
    worst = std::max(worst, relative_error(grad(i), (up - down) / (2.0 * h)));
  }
  return worst;
}

/// Random tiny agent and batch; odd trials add a twin critic, the
/// pre-activation penalty and mixing context, and every other pair of trials
/// a fixed observation scale, so every loss term is covered.
inline GradCheck gradient_check_trial(std::uint64_t trial) {
  Rng rng(1000 + trial);
  std::normal_distribution<double> N;
  std::uniform_int_distribution<int> width(3, 6);
  const Eigen::Index n = 2 + static_cast<Eigen::Index>(trial % 3);
  const Eigen::Index m = 1 + static_cast<Eigen::Index>(trial % 2);

  AgentConfig cfg;
  cfg.hidden = {width(rng), width(rng)};
  cfg.twin_critics = trial % 2 == 1;
  cfg.actor_preactivation_penalty = trial % 2 == 1 ? 0.1 : 0.0;
  cfg.reward_scale = 0.5;
  cfg.reward_offset = 0.1;
  if (trial % 4 >= 2) {
    std::uniform_real_distribution<double> scale(0.1, 3.0);
    for (Eigen::Index i = 0; i < n; ++i) cfg.observation_scale.push_back(scale(rng));
  }
  const Eigen::VectorXd low = Eigen::VectorXd::Constant(m, -2.0);
  const Eigen::VectorXd high = Eigen::VectorXd::Constant(m, 3.0);
  DdpgAgent agent = DdpgAgent::create(n, low, high, cfg, rng);
  // Larger weights so the output layers and the tanh curvature matter.
  for (Mlp* net : {&agent.policy.actor, &agent.critic.online, &agent.critic.target,
                   &agent.critic.target_actor}) {
    for (Eigen::Index i = 0; i < net->params().size(); ++i) net->params()(i) = 0.8 * N(rng);
  }
  if (cfg.twin_critics) {
    for (Mlp* net : {&agent.critic.online2, &agent.critic.target2}) {
      for (Eigen::Index i = 0; i < net->params().size(); ++i) net->params()(i) = 0.8 * N(rng);
    }
  }

  std::vector<Transition> data;
  for (int i = 0; i < 7; ++i) {
    Transition t;
    t.s = Eigen::VectorXd::NullaryExpr(n, [&] { return N(rng); });
    t.a = Eigen::VectorXd::NullaryExpr(m, [&] { return std::clamp(N(rng), -2.0, 3.0); });
    t.r = N(rng);
    t.s_next = Eigen::VectorXd::NullaryExpr(n, [&] { return N(rng); });
    t.done = i % 3 == 0;
    t.a_rl = t.a;
    if (trial % 2 == 1) {
      t.u_prior = Eigen::VectorXd::NullaryExpr(m, [&] { return std::clamp(N(rng), -2.0, 3.0); });
      t.u_prior_next = Eigen::VectorXd::NullaryExpr(m, [&] { return std::clamp(N(rng), -2.0, 3.0); });
      t.lambda = std::abs(N(rng)) * 2.0;
    }
    data.push_back(t);
  }
  std::vector<const Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  const double discount = 0.9;

  GradCheck out;
  Eigen::VectorXd g;
  actor_loss(agent, batch, &g);
  out.actor = worst_fd_error(agent.policy.actor.params(), g,
                             [&] { return actor_loss(agent, batch, nullptr); });
  critic_loss(agent, batch, discount, &g);
  out.critic = worst_fd_error(agent.critic.online.params(), g,
                              [&] { return critic_loss(agent, batch, discount, nullptr); });
  if (cfg.twin_critics) {
    critic_loss(agent, batch, discount, &g, 1);
    out.critic = std::max(out.critic, worst_fd_error(agent.critic.online2.params(), g, [&] {
                            return critic_loss(agent, batch, discount, nullptr, 1);
                          }));
  }
  return out;
}

}  // namespace corerl::testing
