#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "corerl/agent.hpp"
#include "corerl/environment.hpp"
#include "corerl/mixing.hpp"
#include "corerl/priors.hpp"

namespace corerl {

struct EpisodeStats {
  int episode = 0;
  double total_reward = 0.0;
  double mean_abs_td = 0.0;
  double mean_lambda = 0.0;
  double max_state_norm = 0.0;
  double max_abs_theta = 0.0;
  double max_abs_x = 0.0;
  double max_lyapunov = 0.0;
  int steps = 0;
  bool collision = false;
};

struct TrainLoopConfig {
  int episodes = 100;
  double discount = 0.99;
  std::uint64_t seed = 0;
  MixingConfig mixing;
};

struct TrainOptions {
  /// Lyapunov matrix for monitoring; must match Environment::monitor_state().
  std::optional<Matrix> lyapunov_P;
  double monitor_dt = 1.0;
  bool keep_transitions = false;
  /// Called after each episode; handy for streaming CSV rows.
  std::function<void(const EpisodeStats&)> on_episode;
};

struct TrainResult {
  DdpgAgent agent;
  std::vector<EpisodeStats> episodes;
  std::vector<Transition> transitions;
};

/// The mixed-policy training loop. Per step: sample the learner's action,
/// evaluate the prior, choose lambda (fixed, or from the previous step's TD
/// error), deploy the mixed action, store the transition with the deployed
/// action, and take one gradient step once the buffer is warm. The learner's
/// exploration noise decays after every episode.
TrainResult train(const TrainLoopConfig& config, Environment& env, const ControlPrior& prior,
                  DdpgAgent agent, const TrainOptions& options = {});

}  // namespace corerl
