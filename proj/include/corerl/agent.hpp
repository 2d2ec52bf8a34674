#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "corerl/mlp.hpp"
#include "corerl/rng.hpp"

namespace corerl {

struct AgentConfig {
  std::vector<int> hidden{64, 64};
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double soft_update = 0.005;
  int batch_size = 64;
  int buffer_capacity = 100000;
  int warmup_transitions = 1000;
  double exploration_std_fraction = 0.1;  // of the action range
  double exploration_decay = 0.995;       // per episode
  double reward_scale = 1.0;              // applied to rewards inside the learner only
  double reward_offset = 0.0;             // added after scaling, inside the learner only
  /// A failure transition bootstraps as if its reward repeated forever,
  /// r / (1 - gamma), instead of with 0. With all-negative rewards the zero
  /// convention makes failing early look attractive.
  bool absorbing_terminal = true;
  /// Critic-only updates before the actor starts moving. Adam takes
  /// lr-sized steps even on the near-random gradients of an untrained
  /// critic, which can saturate the squashed actor before learning begins.
  int critic_warmup_updates = 0;
  /// Weight of mean(pre-tanh actor output^2) added to the actor loss.
  double actor_preactivation_penalty = 0.0;
  /// Second critic; bootstrap targets take the smaller of the two target
  /// values, which curbs optimistic extrapolation toward unvisited actions.
  bool twin_critics = false;
  /// Actor (and target) step once per this many critic steps.
  int policy_delay = 1;
  /// Typical magnitude of each observation entry; network inputs are divided
  /// by it. A fixed feature scaling, not a running normalizer. Empty: none.
  std::vector<double> observation_scale;
};

/// pi(a|s) = N(mean(s), diag(std^2)) with the mean tanh-squashed into bounds.
struct GaussianPolicy {
  Mlp actor;
  Eigen::VectorXd std;
  Eigen::VectorXd low;
  Eigen::VectorXd high;

  Eigen::VectorXd center() const { return 0.5 * (high + low); }
  Eigen::VectorXd half_range() const { return 0.5 * (high - low); }

  /// Squashed mean in [-1, 1]^m for a batch of states.
  Eigen::MatrixXd normalized_mean(const Eigen::MatrixXd& states) const;
  Eigen::VectorXd mean(const Eigen::VectorXd& state) const;
  Eigen::VectorXd normalize(const Eigen::VectorXd& action) const;
};

Eigen::VectorXd sample_action(const GaussianPolicy& policy, const Eigen::VectorXd& state, Rng& rng);

/// Q(s, a) network on (state, a - action center), with target copies of
/// the critic and of the actor. Centered rather than normalized actions keep
/// the exploration spread large enough for the critic to resolve curvature.
struct QCritic {
  Mlp online;
  Mlp target;
  Mlp online2;  // empty unless twin critics are enabled
  Mlp target2;
  Mlp target_actor;
  double soft_update = 0.005;

  double value(const Eigen::VectorXd& state, const Eigen::VectorXd& centered_action) const;
};

struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;  // deployed (mixed) action
  double r = 0.0;
  Eigen::VectorXd s_next;
  bool done = false;  // s_next is a failure state
  Eigen::VectorXd a_rl;  // raw learner action, diagnostics only
  // Mixing context. When present, the learner's action reaches the plant as
  // (a_rl + lambda u_prior) / (1 + lambda), and both the bootstrap action and
  // the actor gradient go through that map. Empty means unmixed.
  Eigen::VectorXd u_prior;
  Eigen::VectorXd u_prior_next;
  double lambda = 0.0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  /// Uniform sample of distinct entries. Throws EmptyBuffer if the buffer is
  /// empty or smaller than `batch_size`.
  std::vector<const Transition*> sample(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

struct DdpgAgent {
  AgentConfig config;
  GaussianPolicy policy;
  QCritic critic;
  Adam actor_opt;
  Adam critic_opt;
  Adam critic2_opt;
  long updates = 0;  // update() calls so far

  static DdpgAgent create(Eigen::Index obs_dim, const Eigen::VectorXd& low,
                          const Eigen::VectorXd& high, const AgentConfig& config, Rng& init_rng);
};

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

/// delta = r + gamma Q(s', a') - Q(s, a): online critic, with a' the target
/// actor's mean mixed with the transition's next prior action. Failure transitions bootstrap with
/// r / (1 - gamma) when absorbing_terminal is set, else with 0. The reward is
/// scaled by the agent's reward_scale.
double td_error(const DdpgAgent& agent, const Transition& t, double discount);

/// Mean squared Bellman residual (halved) against the target networks;
/// `grad` receives d/d(online critic params). `which` = 1 selects the twin.
double critic_loss(const DdpgAgent& agent, std::span<const Transition* const> batch,
                   double discount, Eigen::VectorXd* grad, int which = 0);

/// -mean Q(s, mix(mu(s), u_prior, lambda)); `grad` receives d/d(actor params).
double actor_loss(const DdpgAgent& agent, std::span<const Transition* const> batch,
                  Eigen::VectorXd* grad);

/// One DDPG step: critic, then actor, then soft target updates.
UpdateStats update(DdpgAgent& agent, std::span<const Transition* const> batch, double discount,
                   double lr_actor, double lr_critic);

nlohmann::json checkpoint_to_json(const DdpgAgent& agent, std::uint64_t seed, int episode);
DdpgAgent checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const DdpgAgent& agent, std::uint64_t seed, int episode,
                     const std::filesystem::path& path);
DdpgAgent load_checkpoint(const std::filesystem::path& path);

}  // namespace corerl
