#include "corerl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "corerl/error.hpp"

namespace corerl {

namespace {

struct Batch {
  Eigen::MatrixXd s, a_in, s_next;  // a_in: centered deployed action
  Eigen::RowVectorXd r, not_done, terminal_tail;
  Eigen::RowVectorXd w;                   // learner share 1 / (1 + lambda)
  Eigen::MatrixXd prior_in, prior_next;   // lambda/(1+lambda) * centered prior action
};

// Centered mixed action from a centered learner action.
Eigen::MatrixXd mixed(const Eigen::MatrixXd& learner, const Eigen::RowVectorXd& w,
                      const Eigen::MatrixXd& prior_part) {
  return learner * w.asDiagonal() + prior_part;
}

Batch gather(const DdpgAgent& agent, std::span<const Transition* const> batch, double discount) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBuffer, "update needs a nonempty batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index n = batch.front()->s.size();
  const Eigen::Index m = batch.front()->a.size();
  Batch out;
  out.s.resize(n, B);
  out.s_next.resize(n, B);
  out.a_in.resize(m, B);
  out.r.resize(B);
  out.not_done.resize(B);
  out.terminal_tail.resize(B);
  out.w.resize(B);
  out.prior_in.setZero(m, B);
  out.prior_next.setZero(m, B);
  const Eigen::VectorXd center = agent.policy.center();
  const Eigen::VectorXd half = agent.policy.half_range();
  for (Eigen::Index i = 0; i < B; ++i) {
    const Transition& t = *batch[i];
    out.s.col(i) = t.s;
    out.s_next.col(i) = t.s_next;
    out.a_in.col(i) = t.a - center;
    out.r(i) = t.r * agent.config.reward_scale + agent.config.reward_offset;
    out.not_done(i) = t.done ? 0.0 : 1.0;
    out.terminal_tail(i) = t.done && agent.config.absorbing_terminal ? out.r(i) / (1.0 - discount) : 0.0;
    const double lambda = t.u_prior.size() == m ? t.lambda : 0.0;
    out.w(i) = 1.0 / (1.0 + lambda);
    if (lambda > 0.0) {
      const double v = lambda / (1.0 + lambda);
      out.prior_in.col(i) = v * (t.u_prior - center);
      out.prior_next.col(i) = v * ((t.u_prior_next.size() == m ? t.u_prior_next : t.u_prior) - center);
    }
  }
  return out;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd x(top.rows() + bottom.rows(), top.cols());
  x << top, bottom;
  return x;
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  target.params() = tau * online.params() + (1.0 - tau) * target.params();
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Eigen::MatrixXd GaussianPolicy::normalized_mean(const Eigen::MatrixXd& states) const {
  return actor.forward(states).array().tanh().matrix();
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::VectorXd& state) const {
  const Eigen::VectorXd n = normalized_mean(state).col(0);
  return center() + half_range().cwiseProduct(n);
}

Eigen::VectorXd GaussianPolicy::normalize(const Eigen::VectorXd& action) const {
  return (action - center()).cwiseQuotient(half_range());
}

Eigen::VectorXd sample_action(const GaussianPolicy& policy, const Eigen::VectorXd& state, Rng& rng) {
  Eigen::VectorXd a = policy.mean(state);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += policy.std(i) * normal(rng);
  return a.cwiseMax(policy.low).cwiseMin(policy.high);
}

double QCritic::value(const Eigen::VectorXd& state, const Eigen::VectorXd& centered_action) const {
  Eigen::VectorXd x(state.size() + centered_action.size());
  x << state, centered_action;
  return online.forward(x)(0, 0);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorCode::ConfigError, "replay capacity must be positive");
  data_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (data_.empty() || batch_size > data_.size()) {
    throw Error(ErrorCode::EmptyBuffer, "cannot sample " + std::to_string(batch_size) +
                                            " transitions from a buffer of " +
                                            std::to_string(data_.size()));
  }
  // Floyd's algorithm: batch_size distinct indices, uniformly.
  const std::size_t n = data_.size();
  std::vector<std::size_t> picked;
  picked.reserve(batch_size);
  for (std::size_t j = n - batch_size; j < n; ++j) {
    const std::size_t r = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (std::find(picked.begin(), picked.end(), r) == picked.end()) {
      picked.push_back(r);
    } else {
      picked.push_back(j);
    }
  }
  std::vector<const Transition*> out;
  out.reserve(batch_size);
  for (std::size_t i : picked) out.push_back(&data_[i]);
  return out;
}

DdpgAgent DdpgAgent::create(Eigen::Index obs_dim, const Eigen::VectorXd& low,
                            const Eigen::VectorXd& high, const AgentConfig& config, Rng& init_rng) {
  if (low.size() != high.size() || low.size() == 0 || ((high - low).array() <= 0.0).any()) {
    throw Error(ErrorCode::ConfigError, "action bounds must satisfy low < high");
  }
  const int m = static_cast<int>(low.size());
  std::vector<int> actor_sizes{static_cast<int>(obs_dim)};
  actor_sizes.insert(actor_sizes.end(), config.hidden.begin(), config.hidden.end());
  actor_sizes.push_back(m);
  std::vector<int> critic_sizes{static_cast<int>(obs_dim) + m};
  critic_sizes.insert(critic_sizes.end(), config.hidden.begin(), config.hidden.end());
  critic_sizes.push_back(1);

  Eigen::VectorXd obs_in, critic_in;
  if (!config.observation_scale.empty()) {
    if (static_cast<Eigen::Index>(config.observation_scale.size()) != obs_dim) {
      throw Error(ErrorCode::ConfigError, "observation_scale needs one entry per observation");
    }
    obs_in = from_std(config.observation_scale);
    if ((obs_in.array() <= 0.0).any()) {
      throw Error(ErrorCode::ConfigError, "observation_scale entries must be positive");
    }
    obs_in = obs_in.cwiseInverse();
    critic_in = Eigen::VectorXd::Ones(obs_dim + m);
    critic_in.head(obs_dim) = obs_in;
  }

  DdpgAgent agent;
  agent.config = config;
  agent.policy.actor = Mlp(actor_sizes, init_rng);
  agent.policy.actor.set_input_scale(obs_in);
  agent.policy.low = low;
  agent.policy.high = high;
  agent.policy.std = config.exploration_std_fraction * (high - low);
  agent.critic.online = Mlp(critic_sizes, init_rng);
  agent.critic.online.set_input_scale(critic_in);
  agent.critic.target = agent.critic.online;
  agent.critic.target_actor = agent.policy.actor;
  agent.critic.soft_update = config.soft_update;
  agent.actor_opt = Adam(agent.policy.actor.params().size());
  agent.critic_opt = Adam(agent.critic.online.params().size());
  if (config.twin_critics) {
    agent.critic.online2 = Mlp(critic_sizes, init_rng);
    agent.critic.online2.set_input_scale(critic_in);
    agent.critic.target2 = agent.critic.online2;
    agent.critic2_opt = Adam(agent.critic.online2.params().size());
  }
  if (config.policy_delay < 1) throw Error(ErrorCode::ConfigError, "policy_delay must be >= 1");
  return agent;
}

double td_error(const DdpgAgent& agent, const Transition& t, double discount) {
  const double q = agent.critic.value(t.s, t.a - agent.policy.center());
  double target = t.r * agent.config.reward_scale + agent.config.reward_offset;
  if (!t.done) {
    Eigen::VectorXd a_next =
        agent.policy.half_range().cwiseProduct(agent.critic.target_actor.forward(t.s_next).col(0).array().tanh().matrix());
    const Eigen::Index m = a_next.size();
    if (t.u_prior.size() == m && t.lambda > 0.0) {
      const Eigen::VectorXd& up = t.u_prior_next.size() == m ? t.u_prior_next : t.u_prior;
      a_next = (a_next + t.lambda * (up - agent.policy.center())) / (1.0 + t.lambda);
    }
    target += discount * agent.critic.value(t.s_next, a_next);
  } else if (agent.config.absorbing_terminal) {
    target += discount * target / (1.0 - discount);
  }
  return target - q;
}

double critic_loss(const DdpgAgent& agent, std::span<const Transition* const> batch,
                   double discount, Eigen::VectorXd* grad, int which) {
  const bool twin = agent.critic.online2.params().size() > 0;
  if (which == 1 && !twin) throw Error(ErrorCode::ConfigError, "agent has no twin critic");
  const Mlp& online = which == 1 ? agent.critic.online2 : agent.critic.online;
  const Batch b = gather(agent, batch, discount);
  const double B = static_cast<double>(batch.size());

  const Eigen::MatrixXd a_next =
      mixed(agent.policy.half_range().asDiagonal() *
                agent.critic.target_actor.forward(b.s_next).array().tanh().matrix(),
            b.w, b.prior_next);
  const Eigen::MatrixXd x_next = stack(b.s_next, a_next);
  Eigen::RowVectorXd q_next = agent.critic.target.forward(x_next);
  if (twin) q_next = q_next.cwiseMin(agent.critic.target2.forward(x_next));
  const Eigen::RowVectorXd y =
      b.r + discount * (b.not_done.cwiseProduct(q_next) + b.terminal_tail);

  Mlp::Tape tape;
  const Eigen::RowVectorXd q = online.forward(stack(b.s, b.a_in), &tape);
  const Eigen::RowVectorXd diff = q - y;
  if (grad) {
    grad->setZero(online.params().size());
    online.backward(tape, diff / B, grad);
  }
  return 0.5 * diff.squaredNorm() / B;
}

double actor_loss(const DdpgAgent& agent, std::span<const Transition* const> batch,
                  Eigen::VectorXd* grad) {
  const Batch b = gather(agent, batch, 0.0);
  const double B = static_cast<double>(batch.size());
  const Eigen::Index n = b.s.rows();

  Mlp::Tape actor_tape;
  const Eigen::MatrixXd a_norm = agent.policy.actor.forward(b.s, &actor_tape).array().tanh();
  const Eigen::MatrixXd a_in =
      mixed(agent.policy.half_range().asDiagonal() * a_norm, b.w, b.prior_in);
  Mlp::Tape critic_tape;
  const Eigen::RowVectorXd q = agent.critic.online.forward(stack(b.s, a_in), &critic_tape);
  if (grad) {
    const Eigen::MatrixXd d_q = Eigen::RowVectorXd::Constant(q.size(), -1.0 / B);
    const Eigen::MatrixXd d_in = agent.critic.online.backward(critic_tape, d_q, nullptr);
    const Eigen::MatrixXd d_pre =
        (agent.policy.half_range().asDiagonal() * d_in.bottomRows(d_in.rows() - n) *
         b.w.asDiagonal()).array() *
        (1.0 - a_norm.array().square());
    grad->setZero(agent.policy.actor.params().size());
    agent.policy.actor.backward(actor_tape, d_pre, grad);
  }
  double loss = -q.mean();
  const double beta = agent.config.actor_preactivation_penalty;
  if (beta > 0.0) {
    const Eigen::MatrixXd& pre = actor_tape.activations.back();
    loss += beta * pre.squaredNorm() / B;
    if (grad) agent.policy.actor.backward(actor_tape, 2.0 * beta / B * pre, grad);
  }
  return loss;
}

UpdateStats update(DdpgAgent& agent, std::span<const Transition* const> batch, double discount,
                   double lr_actor, double lr_critic) {
  UpdateStats stats;
  Eigen::VectorXd grad;
  stats.critic_loss = critic_loss(agent, batch, discount, &grad);
  if (!std::isfinite(stats.critic_loss) || !grad.allFinite()) {
    throw Error(ErrorCode::NonFiniteLoss, "critic loss is not finite");
  }
  agent.critic_opt.step(agent.critic.online.params(), grad, lr_critic);
  if (agent.critic.online2.params().size() > 0) {
    const double loss2 = critic_loss(agent, batch, discount, &grad, 1);
    if (!std::isfinite(loss2) || !grad.allFinite()) {
      throw Error(ErrorCode::NonFiniteLoss, "twin critic loss is not finite");
    }
    agent.critic2_opt.step(agent.critic.online2.params(), grad, lr_critic);
  }

  const long k = agent.updates++;
  if (k >= agent.config.critic_warmup_updates && k % std::max(1, agent.config.policy_delay) == 0) {
    stats.actor_loss = actor_loss(agent, batch, &grad);
    if (!std::isfinite(stats.actor_loss) || !grad.allFinite()) {
      throw Error(ErrorCode::NonFiniteLoss, "actor loss is not finite");
    }
    agent.actor_opt.step(agent.policy.actor.params(), grad, lr_actor);
  }

  soft_update(agent.critic.target, agent.critic.online, agent.critic.soft_update);
  if (agent.critic.online2.params().size() > 0) {
    soft_update(agent.critic.target2, agent.critic.online2, agent.critic.soft_update);
  }
  soft_update(agent.critic.target_actor, agent.policy.actor, agent.critic.soft_update);
  return stats;
}

nlohmann::json checkpoint_to_json(const DdpgAgent& agent, std::uint64_t seed, int episode) {
  nlohmann::json j;
  j["format"] = "corerl-checkpoint-v1";
  j["architecture"] = {{"actor", agent.policy.actor.layer_sizes()},
                       {"critic", agent.critic.online.layer_sizes()},
                       {"hidden_activation", "tanh"}};
  j["seed"] = seed;
  j["episode"] = episode;
  j["action_low"] = to_std(agent.policy.low);
  j["action_high"] = to_std(agent.policy.high);
  j["exploration_std"] = to_std(agent.policy.std);
  j["soft_update"] = agent.critic.soft_update;
  j["reward_scale"] = agent.config.reward_scale;
  j["reward_offset"] = agent.config.reward_offset;
  j["absorbing_terminal"] = agent.config.absorbing_terminal;
  j["observation_scale"] = agent.config.observation_scale;
  j["actor"] = to_std(agent.policy.actor.params());
  j["critic"] = to_std(agent.critic.online.params());
  j["target_actor"] = to_std(agent.critic.target_actor.params());
  j["target_critic"] = to_std(agent.critic.target.params());
  if (agent.critic.online2.params().size() > 0) {
    j["critic2"] = to_std(agent.critic.online2.params());
    j["target_critic2"] = to_std(agent.critic.target2.params());
  }
  return j;
}

DdpgAgent checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "corerl-checkpoint-v1") {
    throw Error(ErrorCode::ConfigError, "not a corerl checkpoint");
  }
  const auto actor_sizes = j.at("architecture").at("actor").get<std::vector<int>>();
  const auto critic_sizes = j.at("architecture").at("critic").get<std::vector<int>>();
  Rng dummy(0);
  DdpgAgent agent;
  agent.config.observation_scale = j.value("observation_scale", std::vector<double>{});
  agent.policy.actor = Mlp(actor_sizes, dummy);
  agent.critic.online = Mlp(critic_sizes, dummy);
  if (!agent.config.observation_scale.empty()) {
    const Eigen::VectorXd inv = from_std(agent.config.observation_scale).cwiseInverse();
    Eigen::VectorXd critic_in = Eigen::VectorXd::Ones(critic_sizes.front());
    critic_in.head(inv.size()) = inv;
    agent.policy.actor.set_input_scale(inv);
    agent.critic.online.set_input_scale(critic_in);
  }
  agent.critic.target = agent.critic.online;
  agent.critic.target_actor = agent.policy.actor;

  const auto load = [&](Mlp& net, const char* key) {
    const Eigen::VectorXd p = from_std(j.at(key).get<std::vector<double>>());
    if (p.size() != net.params().size()) {
      throw Error(ErrorCode::ConfigError, std::string("checkpoint tensor size mismatch: ") + key);
    }
    net.params() = p;
  };
  load(agent.policy.actor, "actor");
  load(agent.critic.online, "critic");
  load(agent.critic.target_actor, "target_actor");
  load(agent.critic.target, "target_critic");
  if (j.contains("critic2")) {
    agent.critic.online2 = agent.critic.online;
    agent.critic.target2 = agent.critic.online;
    load(agent.critic.online2, "critic2");
    load(agent.critic.target2, "target_critic2");
    agent.config.twin_critics = true;
    agent.critic2_opt = Adam(agent.critic.online2.params().size());
  }
  agent.policy.low = from_std(j.at("action_low").get<std::vector<double>>());
  agent.policy.high = from_std(j.at("action_high").get<std::vector<double>>());
  agent.policy.std = from_std(j.at("exploration_std").get<std::vector<double>>());
  agent.critic.soft_update = j.at("soft_update").get<double>();
  agent.config.reward_scale = j.at("reward_scale").get<double>();
  agent.config.reward_offset = j.value("reward_offset", 0.0);
  agent.config.absorbing_terminal = j.value("absorbing_terminal", true);
  agent.config.hidden.assign(actor_sizes.begin() + 1, actor_sizes.end() - 1);
  agent.actor_opt = Adam(agent.policy.actor.params().size());
  agent.critic_opt = Adam(agent.critic.online.params().size());
  return agent;
}

void save_checkpoint(const DdpgAgent& agent, std::uint64_t seed, int episode,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << checkpoint_to_json(agent, seed, episode).dump();
}

DdpgAgent load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return checkpoint_from_json(nlohmann::json::parse(in));
}

}  // namespace corerl
