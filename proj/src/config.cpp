#include "corerl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "corerl/error.hpp"

namespace corerl {

namespace {

// Reads one JSON object, remembering which keys were consumed so unknown
// keys (usually typos) are rejected instead of silently ignored.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorCode::ConfigError, where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T required(const std::string& key) {
    if (!j_.contains(key)) {
      throw Error(ErrorCode::ConfigError, "missing required key '" + qualified(key) + "'");
    }
    return convert<T>(key);
  }

  template <typename T>
  T optional(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    return Reader(j_.at(key), qualified(key));
  }

  const nlohmann::json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw Error(ErrorCode::ConfigError, "unknown key '" + qualified(item.key()) + "'");
      }
    }
  }

  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <typename T>
  T convert(const std::string& key) {
    seen_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::ConfigError, "key '" + qualified(key) + "' has the wrong type");
    }
  }

  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

EnvKind env_from_name(const std::string& name) {
  if (name == "cartpole") return EnvKind::CartPole;
  if (name == "car_following" || name == "carfollow") return EnvKind::CarFollowing;
  throw Error(ErrorCode::ConfigError, "unknown env '" + name + "'");
}

MixingConfig read_mixing(const nlohmann::json& j, const std::string& path) {
  MixingConfig m;
  if (j.is_number()) {
    m.mode = FixedMixing{j.get<double>()};
  } else {
    Reader r(j, path);
    const auto mode = r.required<std::string>("mode");
    if (mode == "fixed") {
      m.mode = FixedMixing{r.required<double>("lambda")};
    } else if (mode == "adaptive") {
      m.mode = AdaptiveMixing{r.required<double>("C"), r.required<double>("lambda_max")};
    } else {
      throw Error(ErrorCode::ConfigError, "'" + r.qualified("mode") + "' must be fixed or adaptive");
    }
    r.finish();
  }
  m.validate();
  return m;
}

AgentConfig read_agent(Reader r) {
  AgentConfig a;
  a.hidden = r.optional("hidden", a.hidden);
  a.lr_actor = r.optional("lr_actor", a.lr_actor);
  a.lr_critic = r.optional("lr_critic", a.lr_critic);
  a.soft_update = r.optional("soft_update", a.soft_update);
  a.batch_size = r.optional("batch_size", a.batch_size);
  a.buffer_capacity = r.optional("buffer_capacity", a.buffer_capacity);
  a.warmup_transitions = r.optional("warmup_transitions", a.warmup_transitions);
  a.exploration_std_fraction = r.optional("exploration_std_fraction", a.exploration_std_fraction);
  a.exploration_decay = r.optional("exploration_decay", a.exploration_decay);
  a.reward_scale = r.optional("reward_scale", a.reward_scale);
  a.reward_offset = r.optional("reward_offset", a.reward_offset);
  a.absorbing_terminal = r.optional("absorbing_terminal", a.absorbing_terminal);
  a.critic_warmup_updates = r.optional("critic_warmup_updates", a.critic_warmup_updates);
  a.actor_preactivation_penalty =
      r.optional("actor_preactivation_penalty", a.actor_preactivation_penalty);
  a.twin_critics = r.optional("twin_critics", a.twin_critics);
  a.policy_delay = r.optional("policy_delay", a.policy_delay);
  a.observation_scale = r.optional("observation_scale", a.observation_scale);
  r.finish();
  return a;
}

nlohmann::json agent_to_json(const AgentConfig& a) {
  return {{"hidden", a.hidden},
          {"lr_actor", a.lr_actor},
          {"lr_critic", a.lr_critic},
          {"soft_update", a.soft_update},
          {"batch_size", a.batch_size},
          {"buffer_capacity", a.buffer_capacity},
          {"warmup_transitions", a.warmup_transitions},
          {"exploration_std_fraction", a.exploration_std_fraction},
          {"exploration_decay", a.exploration_decay},
          {"reward_scale", a.reward_scale},
          {"reward_offset", a.reward_offset},
          {"absorbing_terminal", a.absorbing_terminal},
          {"critic_warmup_updates", a.critic_warmup_updates},
          {"actor_preactivation_penalty", a.actor_preactivation_penalty},
          {"twin_critics", a.twin_critics},
          {"policy_delay", a.policy_delay},
          {"observation_scale", a.observation_scale}};
}

CartPoleTaskConfig read_cartpole(Reader r) {
  CartPoleTaskConfig c;
  auto& p = c.params;
  p.cart_mass = r.optional("cart_mass", p.cart_mass);
  p.pole_mass = r.optional("pole_mass", p.pole_mass);
  p.half_length = r.optional("half_length", p.half_length);
  p.gravity = r.optional("gravity", p.gravity);
  p.tau = r.optional("tau", p.tau);
  p.force_limit = r.optional("force_limit", p.force_limit);
  auto& s = c.reset;
  s.x = r.optional("reset_x", s.x);
  s.x_dot = r.optional("reset_x_dot", s.x_dot);
  s.theta = r.optional("reset_theta", s.theta);
  s.theta_dot = r.optional("reset_theta_dot", s.theta_dot);
  auto& o = c.prior;
  o.model_perturbation = r.optional("model_perturbation", o.model_perturbation);
  if (r.has("gamma_bracket")) {
    const auto b = r.optional<std::vector<double>>("gamma_bracket", {});
    if (b.size() != 2) throw Error(ErrorCode::ConfigError, "'cartpole.gamma_bracket' needs 2 values");
    o.gamma_bracket = {b[0], b[1]};
  }
  o.gamma_tol = r.optional("gamma_tol", o.gamma_tol);
  o.gamma_margin = r.optional("gamma_margin", o.gamma_margin);
  o.verify = r.optional("verify_prior", o.verify);
  r.finish();
  return c;
}

nlohmann::json cartpole_to_json(const CartPoleTaskConfig& c) {
  return {{"cart_mass", c.params.cart_mass},
          {"pole_mass", c.params.pole_mass},
          {"half_length", c.params.half_length},
          {"gravity", c.params.gravity},
          {"tau", c.params.tau},
          {"force_limit", c.params.force_limit},
          {"reset_x", c.reset.x},
          {"reset_x_dot", c.reset.x_dot},
          {"reset_theta", c.reset.theta},
          {"reset_theta_dot", c.reset.theta_dot},
          {"model_perturbation", c.prior.model_perturbation},
          {"gamma_bracket", {c.prior.gamma_bracket.first, c.prior.gamma_bracket.second}},
          {"gamma_tol", c.prior.gamma_tol},
          {"gamma_margin", c.prior.gamma_margin},
          {"verify_prior", c.prior.verify}};
}

CarFollowTaskConfig read_car_following(Reader r) {
  CarFollowTaskConfig c;
  auto& p = c.params;
  p.dt = r.optional("dt", p.dt);
  p.accel_lo = r.optional("accel_lo", p.accel_lo);
  p.accel_hi = r.optional("accel_hi", p.accel_hi);
  p.leader_profile_seed = r.optional("leader_profile_seed", p.leader_profile_seed);
  c.trace_pool = r.optional("trace_pool", c.trace_pool);
  c.trace_csv = r.optional("trace_csv", c.trace_csv);
  r.finish();
  return c;
}

nlohmann::json car_following_to_json(const CarFollowTaskConfig& c) {
  return {{"dt", c.params.dt},
          {"accel_lo", c.params.accel_lo},
          {"accel_hi", c.params.accel_hi},
          {"leader_profile_seed", c.params.leader_profile_seed},
          {"trace_pool", c.trace_pool},
          {"trace_csv", c.trace_csv}};
}

TrainConfig read_train(Reader& r, bool mixing_required) {
  TrainConfig c;
  c.env = env_from_name(r.required<std::string>("env"));
  c.episodes = r.required<int>("episodes");
  if (mixing_required || r.has("mixing")) {
    if (!r.has("mixing")) throw Error(ErrorCode::ConfigError, "missing required key 'mixing'");
    c.mixing = read_mixing(r.raw("mixing"), "mixing");
  }
  c.steps_per_episode = r.optional("steps_per_episode", c.steps_per_episode);
  c.discount = r.optional("discount", c.discount);
  c.seeds = r.optional("seeds", c.seeds);
  if (r.has("agent")) c.agent = read_agent(r.child("agent"));
  if (r.has("cartpole")) c.cartpole = read_cartpole(r.child("cartpole"));
  if (r.has("car_following")) c.car_following = read_car_following(r.child("car_following"));
  c.car_following.params.horizon = c.steps_per_episode;
  return c;
}

void write_train(nlohmann::json& j, const TrainConfig& c) {
  j["env"] = env_name(c.env);
  j["episodes"] = c.episodes;
  j["steps_per_episode"] = c.steps_per_episode;
  j["discount"] = c.discount;
  j["seeds"] = c.seeds;
  j["agent"] = agent_to_json(c.agent);
  j["cartpole"] = cartpole_to_json(c.cartpole);
  j["car_following"] = car_following_to_json(c.car_following);
}

}  // namespace

std::string env_name(EnvKind kind) {
  return kind == EnvKind::CartPole ? "cartpole" : "car_following";
}

void TrainConfig::validate() const {
  if (episodes < 1) throw Error(ErrorCode::ConfigError, "'episodes' must be >= 1");
  if (steps_per_episode < 1) throw Error(ErrorCode::ConfigError, "'steps_per_episode' must be >= 1");
  if (!(discount > 0.0 && discount < 1.0)) {
    throw Error(ErrorCode::ConfigError, "'discount' must lie in (0, 1)");
  }
  if (seeds.empty()) throw Error(ErrorCode::ConfigError, "'seeds' must be nonempty");
  mixing.validate();
  const auto& a = agent;
  if (a.hidden.empty()) throw Error(ErrorCode::ConfigError, "'agent.hidden' must be nonempty");
  for (int h : a.hidden) {
    if (h < 1) throw Error(ErrorCode::ConfigError, "'agent.hidden' sizes must be >= 1");
  }
  if (!(a.soft_update > 0.0 && a.soft_update <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "'agent.soft_update' must lie in (0, 1]");
  }
  if (a.batch_size < 1 || a.buffer_capacity < a.batch_size) {
    throw Error(ErrorCode::ConfigError, "'agent.batch_size' must be >= 1 and <= buffer_capacity");
  }
  if (!(a.lr_actor >= 0.0) || !(a.lr_critic >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "learning rates must be >= 0");
  }
  if (!(a.exploration_std_fraction > 0.0)) {
    throw Error(ErrorCode::ConfigError, "'agent.exploration_std_fraction' must be > 0");
  }
  if (!(a.exploration_decay > 0.0 && a.exploration_decay <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "'agent.exploration_decay' must lie in (0, 1]");
  }
  if (!(a.reward_scale > 0.0)) throw Error(ErrorCode::ConfigError, "'agent.reward_scale' must be > 0");
  if (!std::isfinite(a.reward_offset)) {
    throw Error(ErrorCode::ConfigError, "'agent.reward_offset' must be finite");
  }
  if (a.critic_warmup_updates < 0) {
    throw Error(ErrorCode::ConfigError, "'agent.critic_warmup_updates' must be >= 0");
  }
  if (!(a.actor_preactivation_penalty >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "'agent.actor_preactivation_penalty' must be >= 0");
  }
  if (a.policy_delay < 1) throw Error(ErrorCode::ConfigError, "'agent.policy_delay' must be >= 1");
  if (env == EnvKind::CartPole) {
    cartpole.params.validate();
  } else if (car_following.trace_csv.empty() && car_following.trace_pool < 1) {
    throw Error(ErrorCode::ConfigError, "'car_following.trace_pool' must be >= 1");
  }
}

void SweepSpec::validate() const {
  base.validate();
  if (grid.empty()) throw Error(ErrorCode::ConfigError, "'grid' must be nonempty");
  std::set<std::string> labels;
  for (const auto& m : grid) {
    m.validate();
    if (!labels.insert(mixing_label(m)).second) {
      throw Error(ErrorCode::ConfigError, "duplicate grid entry " + mixing_label(m));
    }
  }
}

MixingConfig mixing_from_json(const nlohmann::json& j) { return read_mixing(j, "mixing"); }

nlohmann::json mixing_to_json(const MixingConfig& m) {
  if (const auto* f = std::get_if<FixedMixing>(&m.mode)) {
    return {{"mode", "fixed"}, {"lambda", f->lambda}};
  }
  const auto& a = std::get<AdaptiveMixing>(m.mode);
  return {{"mode", "adaptive"}, {"C", a.C}, {"lambda_max", a.lambda_max}};
}

std::string mixing_label(const MixingConfig& m) {
  std::ostringstream os;
  os.precision(17);
  if (const auto* f = std::get_if<FixedMixing>(&m.mode)) {
    os << "lambda_" << f->lambda;
  } else {
    const auto& a = std::get<AdaptiveMixing>(m.mode);
    os << "adaptive_C_" << a.C << "_max_" << a.lambda_max;
  }
  return os.str();
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  Reader r(j, "");
  TrainConfig c = read_train(r, true);
  r.finish();
  c.validate();
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  write_train(j, c);
  j["mixing"] = mixing_to_json(c.mixing);
  return j;
}

SweepSpec sweep_spec_from_json(const nlohmann::json& j) {
  Reader r(j, "");
  SweepSpec s;
  s.base = read_train(r, false);
  const auto& grid = r.required<nlohmann::json>("grid");
  if (!grid.is_array()) throw Error(ErrorCode::ConfigError, "'grid' must be an array");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    s.grid.push_back(read_mixing(grid[i], "grid[" + std::to_string(i) + "]"));
  }
  s.output_dir = r.optional<std::string>("output_dir", "");
  r.finish();
  s.validate();
  return s;
}

nlohmann::json sweep_spec_to_json(const SweepSpec& s) {
  nlohmann::json j;
  write_train(j, s.base);
  j["grid"] = nlohmann::json::array();
  for (const auto& m : s.grid) j["grid"].push_back(mixing_to_json(m));
  if (!s.output_dir.empty()) j["output_dir"] = s.output_dir;
  return j;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace corerl
