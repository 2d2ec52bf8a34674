#include "corerl/trainer.hpp"

#include <cmath>
#include <string>

#include "corerl/error.hpp"
#include "corerl/stability.hpp"

namespace corerl {

TrainResult train(const TrainLoopConfig& config, Environment& env, const ControlPrior& prior,
                  DdpgAgent agent, const TrainOptions& options) {
  config.mixing.validate();
  if (config.episodes < 1) throw Error(ErrorCode::ConfigError, "episodes must be >= 1");
  if (!(config.discount > 0.0 && config.discount < 1.0)) {
    throw Error(ErrorCode::ConfigError, "discount must lie in (0, 1)");
  }
  if (prior.action_dim() != env.action_dim() || agent.policy.low.size() != env.action_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "prior, agent and environment action sizes differ");
  }

  Rng env_rng = child_rng(config.seed, "env");
  Rng noise_rng = child_rng(config.seed, "noise");
  Rng buffer_rng = child_rng(config.seed, "buffer");

  const Vector low = env.action_low();
  const Vector high = env.action_high();
  ReplayBuffer buffer(static_cast<std::size_t>(agent.config.buffer_capacity));
  const auto batch_size = static_cast<std::size_t>(agent.config.batch_size);
  const auto warmup = std::max<std::size_t>(static_cast<std::size_t>(agent.config.warmup_transitions),
                                            batch_size);

  TrainResult result;
  result.episodes.reserve(static_cast<std::size_t>(config.episodes));

  for (int ep = 0; ep < config.episodes; ++ep) {
    Vector obs = env.reset(env_rng);
    std::vector<Vector> monitored{env.monitor_state()};
    EpisodeStats stats;
    stats.episode = ep;
    stats.max_abs_theta = env.abs_theta();
    stats.max_abs_x = env.abs_x();
    double sum_abs_td = 0.0;
    double sum_lambda = 0.0;
    std::optional<double> delta_prev;

    for (int t = 0; t < env.horizon(); ++t) {
      const Vector u_rl = sample_action(agent.policy, obs, noise_rng);
      const Vector u_prior = evaluate_prior(prior, env.prior_state());
      const double lambda = mixing_weight(config.mixing, delta_prev);
      const Vector a = mix_action(u_rl, u_prior, lambda, low, high);

      StepResult step;
      try {
        step = env.step(a);
      } catch (const Error& e) {
        throw Error(e.code(), std::string(e.what()) + " (seed " + std::to_string(config.seed) +
                                  ", episode " + std::to_string(ep) + ", step " +
                                  std::to_string(t) + ")");
      }

      Transition tr;
      tr.s = obs;
      tr.a = a;
      tr.r = step.reward;
      tr.s_next = step.next_state;
      tr.done = step.terminal;
      tr.a_rl = u_rl;
      tr.u_prior = u_prior;
      tr.lambda = lambda;
      if (lambda > 0.0) tr.u_prior_next = evaluate_prior(prior, env.prior_state());
      const double delta = td_error(agent, tr, config.discount);
      delta_prev = delta;

      stats.total_reward += step.reward;
      sum_abs_td += std::abs(delta);
      sum_lambda += lambda;
      ++stats.steps;
      stats.max_abs_theta = std::max(stats.max_abs_theta, env.abs_theta());
      stats.max_abs_x = std::max(stats.max_abs_x, env.abs_x());
      stats.collision = stats.collision || step.collision;
      monitored.push_back(env.monitor_state());

      if (options.keep_transitions) result.transitions.push_back(tr);
      buffer.push(std::move(tr));

      if (buffer.size() >= warmup) {
        const auto batch = buffer.sample(batch_size, buffer_rng);
        try {
          update(agent, batch, config.discount, agent.config.lr_actor, agent.config.lr_critic);
        } catch (const Error& e) {
          throw Error(e.code(), std::string(e.what()) + " (seed " + std::to_string(config.seed) +
                                    ", episode " + std::to_string(ep) + ")");
        }
      }

      obs = step.next_state;
      if (step.done) break;
    }

    stats.mean_abs_td = sum_abs_td / stats.steps;
    stats.mean_lambda = sum_lambda / stats.steps;
    const Eigen::Index dim = monitored.front().size();
    const Matrix P = options.lyapunov_P && options.lyapunov_P->rows() == dim
                         ? *options.lyapunov_P
                         : Matrix::Zero(dim, dim);
    const LyapunovTrace trace = monitor_trajectory(monitored, P, options.monitor_dt);
    stats.max_state_norm = trace.max_state_norm;
    stats.max_lyapunov = trace.max_V;

    agent.policy.std *= agent.config.exploration_decay;
    result.episodes.push_back(stats);
    if (options.on_episode) options.on_episode(stats);
  }

  result.agent = std::move(agent);
  return result;
}

}  // namespace corerl
