#include "corerl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "corerl/car_following.hpp"
#include "corerl/cartpole.hpp"
#include "corerl/diagnostics.hpp"
#include "corerl/error.hpp"

namespace corerl {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCsvColumns[] = {"seed",          "episode",        "reward",
                                       "mean_lambda",   "mean_abs_td",    "max_dev_theta",
                                       "max_dev_x",     "max_state_norm", "max_lyapunov",
                                       "steps",         "collision"};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

double mixing_lambda_for_radius(const MixingConfig& m) {
  // Radius shrinks with lambda; the adaptive weight can be arbitrarily close
  // to 0, so its worst case is lambda = 0.
  if (const auto* f = std::get_if<FixedMixing>(&m.mode)) return f->lambda;
  return 0.0;
}

std::string lambda_column(const MixingConfig& m) {
  if (const auto* f = std::get_if<FixedMixing>(&m.mode)) return format_number(f->lambda);
  return mixing_label(m);
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Task make_task(const TrainConfig& config) {
  Task task;
  if (config.env == EnvKind::CartPole) {
    const auto& c = config.cartpole;
    task.design = design_cartpole_prior(c.params, c.prior);
    task.prior = task.design->prior;
    task.env = std::make_unique<CartPoleEnv>(c.params, config.steps_per_episode, c.reset);
    task.lyapunov_P = task.design->controller.P;
    task.monitor_dt = c.params.tau;
  } else {
    CarFollowParams p = config.car_following.params;
    p.horizon = config.steps_per_episode;
    if (!config.car_following.trace_csv.empty()) {
      task.env = std::make_unique<CarFollowEnv>(
          p, std::vector<LeaderTrace>{read_trace_csv(config.car_following.trace_csv)});
    } else {
      task.env = std::make_unique<CarFollowEnv>(p, config.car_following.trace_pool);
    }
    task.prior = build_carfollow_prior(p.accel_lo, p.accel_hi);
    // No certified prior here; V = |monitor state|^2 tracks spacing error.
    task.lyapunov_P = Matrix::Identity(2, 2);
    task.monitor_dt = p.dt;
  }
  return task;
}

std::string episodes_csv_header() {
  std::string h;
  for (const char* c : kCsvColumns) {
    if (!h.empty()) h += ',';
    h += c;
  }
  return h;
}

std::string episodes_csv_row(std::uint64_t seed, const EpisodeStats& e) {
  std::string row = std::to_string(seed) + ',' + std::to_string(e.episode);
  for (double v : {e.total_reward, e.mean_lambda, e.mean_abs_td, e.max_abs_theta, e.max_abs_x,
                   e.max_state_norm, e.max_lyapunov}) {
    row += ',' + format_number(v);
  }
  row += ',' + std::to_string(e.steps) + ',' + (e.collision ? "1" : "0");
  return row;
}

std::vector<EpisodeStats> read_episodes_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingMonitorData, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != episodes_csv_header()) {
    throw Error(ErrorCode::MissingMonitorData, path.string() + " has an unexpected header");
  }
  std::vector<EpisodeStats> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != std::size(kCsvColumns)) {
      throw Error(ErrorCode::MissingMonitorData, path.string() + ": malformed row '" + line + "'");
    }
    EpisodeStats e;
    e.episode = std::stoi(f[1]);
    e.total_reward = std::stod(f[2]);
    e.mean_lambda = std::stod(f[3]);
    e.mean_abs_td = std::stod(f[4]);
    e.max_abs_theta = std::stod(f[5]);
    e.max_abs_x = std::stod(f[6]);
    e.max_state_norm = std::stod(f[7]);
    e.max_lyapunov = std::stod(f[8]);
    e.steps = std::stoi(f[9]);
    e.collision = f[10] == "1";
    out.push_back(e);
  }
  return out;
}

RunRecord run_single(const TrainConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  RunRecord rec;
  rec.seed = seed;
  rec.csv_path = out_dir / "episodes.csv";
  rec.checkpoint_path = out_dir / "checkpoint.json";
  rec.summary_path = out_dir / "summary.json";

  Task task = make_task(config);
  Rng init_rng = child_rng(seed, "init");
  DdpgAgent agent = DdpgAgent::create(task.env->observation_dim(), task.env->action_low(),
                                      task.env->action_high(), config.agent, init_rng);

  std::ofstream csv(rec.csv_path);
  if (!csv) throw Error(ErrorCode::IoError, "cannot write " + rec.csv_path.string());
  csv << episodes_csv_header() << '\n';

  TrainLoopConfig loop{config.episodes, config.discount, seed, config.mixing};
  TrainOptions options;
  options.lyapunov_P = task.lyapunov_P;
  options.monitor_dt = task.monitor_dt;
  options.on_episode = [&](const EpisodeStats& e) {
    csv << episodes_csv_row(seed, e) << '\n';
    csv.flush();
  };

  TrainResult result = train(loop, *task.env, task.prior, std::move(agent), options);
  csv.close();
  rec.episodes = std::move(result.episodes);

  save_checkpoint(result.agent, seed, config.episodes, rec.checkpoint_path);

  double max_theta = 0.0, max_x = 0.0, max_norm = 0.0;
  int collisions = 0;
  for (const auto& e : rec.episodes) {
    max_theta = std::max(max_theta, e.max_abs_theta);
    max_x = std::max(max_x, e.max_abs_x);
    max_norm = std::max(max_norm, e.max_state_norm);
    collisions += e.collision ? 1 : 0;
  }
  nlohmann::json summary{{"config", train_config_to_json(config)},
                         {"seed", seed},
                         {"label", mixing_label(config.mixing)},
                         {"episodes_completed", rec.episodes.size()},
                         {"episodes_csv", rec.csv_path.filename().string()},
                         {"checkpoint", rec.checkpoint_path.filename().string()},
                         {"final_reward", rec.episodes.back().total_reward},
                         {"max_abs_theta", max_theta},
                         {"max_abs_x", max_x},
                         {"max_state_norm", max_norm},
                         {"collisions", collisions},
                         {"prior", prior_to_json(task.prior)}};
  if (task.design) summary["controller"] = controller_to_json(task.design->controller);
  write_json_file(rec.summary_path, summary);
  return rec;
}

SweepResult run_sweep(const SweepSpec& spec, const fs::path& out_dir, int parallel) {
  spec.validate();
  if (parallel < 1) throw Error(ErrorCode::ConfigError, "--parallel must be >= 1");
  fs::create_directories(out_dir);
  write_json_file(out_dir / "sweep_spec.json", sweep_spec_to_json(spec));

  struct Cell {
    std::size_t grid_index;
    std::uint64_t seed;
    fs::path dir;
    std::vector<EpisodeStats> episodes;
    std::string error;
    bool ok = false;
  };
  std::vector<Cell> cells;
  for (std::size_t g = 0; g < spec.grid.size(); ++g) {
    for (std::uint64_t s : spec.base.seeds) {
      cells.push_back({g, s,
                       out_dir / "cells" / mixing_label(spec.grid[g]) /
                           ("seed_" + std::to_string(s)),
                       {}, {}, false});
    }
  }

  // Cells own their outputs; the only shared state is the work index.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& cell = cells[i];
      TrainConfig cfg = spec.base;
      cfg.mixing = spec.grid[cell.grid_index];
      cfg.seeds = {cell.seed};
      try {
        cell.episodes = run_single(cfg, cell.seed, cell.dir).episodes;
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
        std::error_code ec;
        fs::create_directories(cell.dir, ec);
        std::ofstream(cell.dir / "error.txt") << cell.error << '\n';
      }
    }
  };
  const int n_threads = std::min<int>(parallel, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  SweepResult result;
  result.aggregate_csv = out_dir / "aggregate.csv";
  result.summary_json = out_dir / "sweep_summary.json";
  std::ofstream agg(result.aggregate_csv);
  if (!agg) throw Error(ErrorCode::IoError, "cannot write " + result.aggregate_csv.string());
  agg << "lambda,episode,mean_reward,var_reward,n_seeds\n";

  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t g = 0; g < spec.grid.size(); ++g) {
    std::vector<std::vector<double>> rewards;
    std::vector<std::uint64_t> seeds;
    double max_theta = 0.0, max_norm = 0.0;
    int collisions = 0;
    for (const Cell& c : cells) {
      if (c.grid_index != g) continue;
      if (!c.ok) {
        result.failures.push_back({mixing_label(spec.grid[g]), c.seed, c.error});
        continue;
      }
      std::vector<double> r;
      for (const auto& e : c.episodes) {
        r.push_back(e.total_reward);
        max_theta = std::max(max_theta, e.max_abs_theta);
        max_norm = std::max(max_norm, e.max_state_norm);
        collisions += e.collision ? 1 : 0;
      }
      rewards.push_back(std::move(r));
      seeds.push_back(c.seed);
    }
    nlohmann::json row{{"label", mixing_label(spec.grid[g])},
                       {"mixing", mixing_to_json(spec.grid[g])},
                       {"n_seeds", rewards.size()},
                       {"seeds", seeds},
                       {"max_abs_theta", max_theta},
                       {"max_state_norm", max_norm},
                       {"collisions", collisions}};
    if (rewards.empty()) {
      rows.push_back(row);
      continue;
    }
    const std::string lambda = lambda_column(spec.grid[g]);
    if (rewards.size() == 1) {
      // A single seed has no spread; its variance is reported as 0.
      for (std::size_t e = 0; e < rewards[0].size(); ++e) {
        agg << lambda << ',' << e << ',' << format_number(rewards[0][e]) << ",0,1\n";
      }
      double mean = 0.0;
      for (double r : rewards[0]) mean += r / rewards[0].size();
      row["overall_mean"] = mean;
    } else {
      const SeedEnsembleStats st = ensemble_stats(rewards);
      for (std::size_t e = 0; e < st.mean_reward.size(); ++e) {
        agg << lambda << ',' << e << ',' << format_number(st.mean_reward[e]) << ','
            << format_number(st.var_reward[e]) << ',' << st.seeds << '\n';
      }
      row["overall_mean"] = st.overall_mean;
      row["mean_variance"] = st.mean_variance;
      row["final_window_mean"] = st.final_window_mean;
      row["final_window_variance"] = st.final_window_variance;
      row["final_window_means"] = st.final_window_means;
    }
    rows.push_back(row);
  }
  agg.close();

  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"label", f.label}, {"seed", f.seed}, {"error", f.error}});
  }
  result.summary = {{"env", env_name(spec.base.env)},
                    {"episodes", spec.base.episodes},
                    {"rows", rows},
                    {"failures", failures}};
  write_json_file(result.summary_json, result.summary);
  return result;
}

nlohmann::json stability_report(const fs::path& run_dir, const StabilityReportOptions& options) {
  std::vector<fs::path> summaries;
  if (fs::exists(run_dir / "summary.json")) {
    summaries.push_back(run_dir / "summary.json");
  } else if (fs::exists(run_dir / "cells")) {
    for (const auto& entry : fs::recursive_directory_iterator(run_dir / "cells")) {
      if (entry.path().filename() == "summary.json") summaries.push_back(entry.path());
    }
    std::sort(summaries.begin(), summaries.end());
  }
  if (summaries.empty()) {
    throw Error(ErrorCode::MissingMonitorData, "no completed runs under " + run_dir.string());
  }

  struct Group {
    MixingConfig mixing;
    double max_norm = 0.0, max_theta = 0.0, max_x = 0.0;
    int runs = 0;
  };
  std::map<std::string, Group> groups;
  std::optional<TrainConfig> config;
  double state_radius = 0.0;
  for (const auto& path : summaries) {
    const nlohmann::json s = read_json_file(path);
    if (!s.contains("config")) {
      throw Error(ErrorCode::MissingMonitorData, path.string() + " has no config snapshot");
    }
    const TrainConfig cfg = train_config_from_json(s.at("config"));
    if (!config) config = cfg;
    const auto episodes = read_episodes_csv(path.parent_path() / "episodes.csv");
    if (episodes.empty()) {
      throw Error(ErrorCode::MissingMonitorData, path.parent_path().string() + " has no episodes");
    }
    Group& g = groups.try_emplace(mixing_label(cfg.mixing), Group{cfg.mixing}).first->second;
    for (const auto& e : episodes) {
      g.max_norm = std::max(g.max_norm, e.max_state_norm);
      g.max_theta = std::max(g.max_theta, e.max_abs_theta);
      g.max_x = std::max(g.max_x, e.max_abs_x);
    }
    ++g.runs;
    state_radius = std::max(state_radius, g.max_norm);
  }
  if (config->env != EnvKind::CartPole) {
    throw Error(ErrorCode::ConfigError,
                "stability-report needs a certified linear prior; env is " + env_name(config->env));
  }

  const CartPolePriorDesign design = design_cartpole_prior(config->cartpole.params,
                                                           config->cartpole.prior);
  double C_D = 0.0;
  std::size_t cd_samples = 0;
  if (options.C_D) {
    C_D = *options.C_D;
  } else {
    const auto grid = cartpole_sample_grid(3.0, 2.0, 0.5, 2.0, config->cartpole.params.force_limit,
                                           7, 5);
    const auto bound = estimate_cartpole_disturbance_bound(config->cartpole.params, design.plant,
                                                           grid.states, grid.actions);
    C_D = bound.C_D;
    cd_samples = bound.samples;
  }
  const double C_pi = options.C_pi ? *options.C_pi
                                   : a_priori_action_gap_bound(design.prior.action_low,
                                                               design.prior.action_high,
                                                               design.controller.K, state_radius);

  std::vector<std::pair<std::string, Group>> ordered(groups.begin(), groups.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    const bool fa = !a.second.mixing.adaptive(), fb = !b.second.mixing.adaptive();
    if (fa != fb) return fa;
    return mixing_lambda_for_radius(a.second.mixing) < mixing_lambda_for_radius(b.second.mixing);
  });

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [label, g] : ordered) {
    const double lambda = mixing_lambda_for_radius(g.mixing);
    const auto cert = stability_radius(design.plant, design.controller, C_D, C_pi, lambda);
    rows.push_back({{"label", label},
                    {"mixing", mixing_to_json(g.mixing)},
                    {"lambda_for_radius", lambda},
                    {"radius", cert.radius},
                    {"observed_max_state_norm", g.max_norm},
                    {"observed_max_abs_theta", g.max_theta},
                    {"observed_max_abs_x", g.max_x},
                    {"runs", g.runs},
                    {"certificate_exceeded", g.max_norm > cert.radius}});
  }
  const auto cert0 = stability_radius(design.plant, design.controller, C_D, C_pi, 0.0);
  return {{"controller", controller_to_json(design.controller)},
          {"sigma_m", cert0.sigma_m},
          {"C_D", C_D},
          {"C_D_source", options.C_D ? "override" : "finite-difference estimate"},
          {"C_D_samples", cd_samples},
          {"C_pi", C_pi},
          {"C_pi_source", options.C_pi ? "override" : "a-priori action bound"},
          {"state_radius", state_radius},
          {"rows", rows},
          {"note", "discrete-time simulation; exceeding the continuous-time radius is informational"}};
}

}  // namespace corerl
