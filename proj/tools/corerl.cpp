// corerl: synthesize priors, train, sweep, run diagnostics and stability reports.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "corerl/cartpole.hpp"
#include "corerl/config.hpp"
#include "corerl/diagnostics.hpp"
#include "corerl/error.hpp"
#include "corerl/harness.hpp"
#include "corerl/robust_control.hpp"

namespace fs = std::filesystem;
using namespace corerl;

namespace {

int cmd_synth(const std::string& config, bool cartpole, std::optional<double> lo,
              std::optional<double> hi, double tol) {
  LinearPlant plant;
  std::pair<double, double> bracket{1.0, 50.0};
  if (cartpole) {
    plant = linearize_known_model(CartPoleParams{}.perturbed(1.6));
  } else {
    if (config.empty()) throw Error(ErrorCode::ConfigError, "synth needs --config or --cartpole");
    const nlohmann::json j = read_json_file(config);
    plant = plant_from_json(j);
    if (j.contains("gamma_bracket")) {
      const auto b = j.at("gamma_bracket").get<std::vector<double>>();
      if (b.size() != 2) throw Error(ErrorCode::ConfigError, "'gamma_bracket' needs 2 values");
      bracket = {b[0], b[1]};
    }
  }
  if (lo) bracket.first = *lo;
  if (hi) bracket.second = *hi;
  const HInfController ctrl = synthesize_hinf(plant, bracket, tol);
  nlohmann::json out = controller_to_json(ctrl);
  const Matrix closed = plant.A - plant.B2 * ctrl.K;
  out["closed_loop_hurwitz"] = is_hurwitz(closed);
  out["closed_loop_max_real_eigenvalue"] = max_real_eigenvalue(closed);
  out["riccati_residual"] = care_residual(plant, ctrl.P, ctrl.zeta).norm();
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_train(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed) {
  const TrainConfig cfg = train_config_from_json(read_json_file(config));
  const std::uint64_t s = seed ? *seed : cfg.seeds.front();
  const RunRecord rec = run_single(cfg, s, out);
  std::cout << nlohmann::json{{"csv", rec.csv_path.string()},
                              {"checkpoint", rec.checkpoint_path.string()},
                              {"summary", rec.summary_path.string()},
                              {"episodes", rec.episodes.size()},
                              {"final_reward", rec.episodes.back().total_reward}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_sweep(const std::string& config, std::string out, int parallel,
              std::optional<std::uint64_t> seed) {
  SweepSpec spec = sweep_spec_from_json(read_json_file(config));
  if (seed) spec.base.seeds = {*seed};
  if (out.empty()) out = spec.output_dir;
  if (out.empty()) throw Error(ErrorCode::ConfigError, "sweep needs --out or 'output_dir'");
  const SweepResult r = run_sweep(spec, out, parallel);
  std::cout << r.summary.dump(2) << '\n';
  for (const auto& f : r.failures) {
    std::cerr << "cell " << f.label << " seed " << f.seed << " failed: " << f.error << '\n';
  }
  return 0;
}

int cmd_diagnose(const std::string& out, std::optional<std::uint64_t> seed, std::size_t samples,
                 double exponent) {
  DiagnosticsOptions opt;
  if (seed) opt.seed = *seed;
  opt.variance_samples = samples;
  opt.mixing_exponent = exponent;
  const nlohmann::json report = run_diagnostics(opt);
  if (!out.empty()) write_json_file(out, report);
  std::cout << report.dump(2) << '\n';
  if (!report.at("pass").get<bool>()) {
    for (const auto& c : report.at("checks")) {
      if (!c.at("pass").get<bool>()) std::cerr << "failed: " << c.at("name").get<std::string>() << '\n';
    }
    return 1;
  }
  return 0;
}

int cmd_stability(const std::string& run, const std::string& out, std::optional<double> c_d,
                  std::optional<double> c_pi) {
  const nlohmann::json report = stability_report(run, {c_d, c_pi});
  if (!out.empty()) write_json_file(out, report);
  std::cout << report.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control-regularized reinforcement learning toolkit"};
  app.require_subcommand(1);

  std::string config, out, run_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> gamma_lo, gamma_hi, c_d, c_pi;
  double gamma_tol = 1e-4;
  bool cartpole = false;
  int parallel = 1;
  std::size_t samples = 1000000;
  double exponent = 1.0;

  auto* synth = app.add_subcommand("synth", "Synthesize an H-infinity state-feedback controller");
  synth->add_option("--config", config, "Plant JSON {A, B1, B2, C1[, gamma_bracket]}");
  synth->add_flag("--cartpole", cartpole, "Use the built-in perturbed cartpole linearization");
  synth->add_option("--gamma-lo", gamma_lo, "Lower end of the attenuation bracket");
  synth->add_option("--gamma-hi", gamma_hi, "Upper end of the attenuation bracket");
  synth->add_option("--gamma-tol", gamma_tol, "Bisection tolerance");

  auto* train = app.add_subcommand("train", "Train one run");
  train->add_option("--config", config, "Training config JSON")->required();
  train->add_option("--out", out, "Run directory")->required();
  train->add_option("--seed", seed, "Seed (defaults to the first in the config)");

  auto* sweep = app.add_subcommand("sweep", "Run a multi-seed mixing-weight sweep");
  sweep->add_option("--config", config, "Sweep spec JSON")->required();
  sweep->add_option("--out", out, "Output directory (or 'output_dir' in the spec)");
  sweep->add_option("--parallel", parallel, "Cells to run concurrently")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", seed, "Run a single seed instead of the spec's list");

  auto* diagnose = app.add_subcommand("diagnose", "Run the analytic diagnostics suites");
  diagnose->add_option("--out", out, "Also write the report here");
  diagnose->add_option("--seed", seed, "Root seed for the Monte-Carlo checks");
  diagnose->add_option("--samples", samples, "Samples for the variance check");
  diagnose->add_option("--mixing-exponent", exponent)->group("");  // mutation-test hook

  auto* stability = app.add_subcommand("stability-report", "Stability radii versus observed runs");
  stability->add_option("--run", run_dir, "Run or sweep directory")->required();
  stability->add_option("--c-d", c_d, "Override the disturbance bound C_D");
  stability->add_option("--c-pi", c_pi, "Override the action-gap bound C_pi");
  stability->add_option("--out", out, "Also write the report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(config, cartpole, gamma_lo, gamma_hi, gamma_tol);
    if (*train) return cmd_train(config, out, seed);
    if (*sweep) return cmd_sweep(config, out, parallel, seed);
    if (*diagnose) return cmd_diagnose(out, seed, samples, exponent);
    if (*stability) return cmd_stability(run_dir, out, c_d, c_pi);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
