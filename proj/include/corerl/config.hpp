#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "corerl/agent.hpp"
#include "corerl/car_following.hpp"
#include "corerl/cartpole.hpp"
#include "corerl/mixing.hpp"
#include "corerl/priors.hpp"

namespace corerl {

enum class EnvKind { CartPole, CarFollowing };

struct CartPoleTaskConfig {
  CartPoleParams params;
  CartPoleResetRange reset;
  CartPolePriorOptions prior;
};

struct CarFollowTaskConfig {
  CarFollowParams params;
  int trace_pool = 16;
  std::string trace_csv;  // optional: a recorded trace replaces the synthetic pool
};

/// Everything a training run needs. Required keys: env, episodes, mixing.
struct TrainConfig {
  EnvKind env = EnvKind::CartPole;
  int episodes = 0;
  int steps_per_episode = 100;
  double discount = 0.99;
  std::vector<std::uint64_t> seeds{0};
  MixingConfig mixing;
  AgentConfig agent;
  CartPoleTaskConfig cartpole;
  CarFollowTaskConfig car_following;

  void validate() const;
};

/// A TrainConfig plus a grid of mixing settings; each (grid entry, seed) is
/// one cell. `mixing` is not required in a sweep file.
struct SweepSpec {
  TrainConfig base;
  std::vector<MixingConfig> grid;
  std::string output_dir;

  void validate() const;
};

std::string env_name(EnvKind kind);

MixingConfig mixing_from_json(const nlohmann::json& j);
nlohmann::json mixing_to_json(const MixingConfig& m);
/// Directory-safe label, e.g. "lambda_4" or "adaptive_C_0.5_max_15".
std::string mixing_label(const MixingConfig& m);

TrainConfig train_config_from_json(const nlohmann::json& j);
/// Every key, defaults included, so the file alone reproduces the run.
nlohmann::json train_config_to_json(const TrainConfig& c);

SweepSpec sweep_spec_from_json(const nlohmann::json& j);
nlohmann::json sweep_spec_to_json(const SweepSpec& s);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace corerl
