#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "corerl/config.hpp"
#include "corerl/environment.hpp"
#include "corerl/priors.hpp"
#include "corerl/stability.hpp"
#include "corerl/trainer.hpp"

namespace corerl {

/// Environment, prior and monitoring data built from a config.
struct Task {
  std::unique_ptr<Environment> env;
  ControlPrior prior;
  std::optional<CartPolePriorDesign> design;  // cartpole only
  Matrix lyapunov_P;                          // matches env->monitor_state()
  double monitor_dt = 1.0;
};

Task make_task(const TrainConfig& config);

/// Per-run CSV: seed,episode,reward,mean_lambda,mean_abs_td,max_dev_theta,
/// max_dev_x,max_state_norm,max_lyapunov,steps,collision. 17 significant digits.
std::string episodes_csv_header();
std::string episodes_csv_row(std::uint64_t seed, const EpisodeStats& e);
std::vector<EpisodeStats> read_episodes_csv(const std::filesystem::path& path);

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<EpisodeStats> episodes;
  std::filesystem::path csv_path;
  std::filesystem::path checkpoint_path;
  std::filesystem::path summary_path;
};

/// Trains one (config, seed) cell into `out_dir`: episodes.csv is streamed
/// while training, then checkpoint.json and summary.json are written. On
/// failure the partial CSV stays on disk and the error propagates.
RunRecord run_single(const TrainConfig& config, std::uint64_t seed,
                     const std::filesystem::path& out_dir);

struct CellFailure {
  std::string label;
  std::uint64_t seed = 0;
  std::string error;
};

struct SweepResult {
  std::filesystem::path aggregate_csv;
  std::filesystem::path summary_json;
  std::vector<CellFailure> failures;
  nlohmann::json summary;
};

/// Runs every (grid entry, seed) cell with up to `parallel` cells at once,
/// under out_dir/cells/<label>/seed_<s>/, then writes aggregate.csv
/// (lambda,episode,mean_reward,var_reward,n_seeds) and sweep_summary.json.
/// Failed cells are recorded and excluded from aggregation.
SweepResult run_sweep(const SweepSpec& spec, const std::filesystem::path& out_dir, int parallel);

struct StabilityReportOptions {
  std::optional<double> C_D;
  std::optional<double> C_pi;
};

/// Reads a run or sweep directory and returns per-lambda radii alongside the
/// observed deviations; rows whose observed max state norm exceeds the
/// radius are flagged "certificate exceeded".
nlohmann::json stability_report(const std::filesystem::path& run_dir,
                                const StabilityReportOptions& options = {});

/// printf("%.17g").
std::string format_number(double v);

}  // namespace corerl
