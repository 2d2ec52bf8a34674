#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "corerl/environment.hpp"

namespace corerl {

/// Five-car chain, index 0 is the lead car; the controlled car is index 3.
inline constexpr int kChainLength = 5;
inline constexpr int kControlledCar = 3;

struct CarFollowParams {
  double dt = 0.1;
  int horizon = 100;
  double accel_lo = -5.0;
  double accel_hi = 2.5;
  std::uint64_t leader_profile_seed = 0;
};

struct CarFollowState {
  std::array<double, kChainLength> position{};
  std::array<double, kChainLength> velocity{};

  double s_front() const { return position[kControlledCar - 1]; }
  double s_curr() const { return position[kControlledCar]; }
  double s_back() const { return position[kControlledCar + 1]; }
  double v_front() const { return velocity[kControlledCar - 1]; }
  double v_curr() const { return velocity[kControlledCar]; }
  double v_back() const { return velocity[kControlledCar + 1]; }
  double front_gap() const { return s_front() - s_curr(); }
  double back_gap() const { return s_curr() - s_back(); }

  /// (s_back, s_curr, s_front, v_back, v_curr, v_front): the bang-bang prior layout.
  Eigen::VectorXd prior_vector() const;
};

/// Recorded (or synthetic) trajectories for all five cars. Only the first
/// sample of the controlled car is used, as its initial condition.
struct LeaderTrace {
  double dt = 0.1;
  std::vector<std::array<double, kChainLength>> position;  // [t][car]
  std::vector<std::array<double, kChainLength>> velocity;

  std::size_t steps() const { return position.size(); }
  CarFollowState state_at(std::size_t t) const;
};

/// Trace generator limits.
inline constexpr double kTraceMaxSpeed = 30.0;
inline constexpr double kTraceMinAccel = -3.0;
inline constexpr double kTraceMaxAccel = 2.0;
inline constexpr double kTraceMinGap = 8.0;
inline constexpr double kTraceMaxGap = 25.0;

/// Collision clamp for the headway penalties.
inline constexpr double kGapClamp = 1e-3;

/// Deterministic synthetic traffic: a shared piecewise-constant acceleration
/// profile with per-car lag and perturbations. Same seed, same trace.
LeaderTrace generate_leader_trace(std::uint64_t seed, const CarFollowParams& params);

/// Advances the controlled car under `accel` (clipped) and replays the other
/// cars from `trace` at index t + 1.
StepResult carfollow_step(const CarFollowState& state, double accel, const CarFollowParams& params,
                          const LeaderTrace& trace, std::size_t t, CarFollowState* next_out = nullptr);

/// -v_dot min(0, a) - 100 |G1| - 50 G2, gaps clamped at kGapClamp.
double carfollow_reward(const CarFollowState& state, double accel, double v_dot);

void write_trace_csv(const LeaderTrace& trace, const std::filesystem::path& path);
LeaderTrace read_trace_csv(const std::filesystem::path& path);

class CarFollowEnv final : public Environment {
 public:
  /// Episodes draw uniformly from a pool of `pool_size` traces generated from
  /// consecutive seeds starting at `params.leader_profile_seed`.
  CarFollowEnv(CarFollowParams params, int pool_size);
  CarFollowEnv(CarFollowParams params, std::vector<LeaderTrace> traces);

  std::string name() const override { return "carfollow"; }
  Eigen::Index observation_dim() const override { return 5; }
  Eigen::Index action_dim() const override { return 1; }
  Eigen::VectorXd action_low() const override;
  Eigen::VectorXd action_high() const override;
  int horizon() const override { return params_.horizon; }

  Eigen::VectorXd reset(Rng& rng) override;
  StepResult step(const Eigen::VectorXd& action) override;
  Eigen::VectorXd prior_state() const override { return state_.prior_vector(); }
  Eigen::VectorXd monitor_state() const override;

  /// Starts an episode on a specific trace.
  Eigen::VectorXd reset_to(std::size_t trace_index);
  const CarFollowState& state() const { return state_; }
  const std::vector<LeaderTrace>& traces() const { return traces_; }

  /// Scaled features: gaps, own speed, and relative speeds.
  static Eigen::VectorXd observe(const CarFollowState& s);

 private:
  CarFollowParams params_;
  std::vector<LeaderTrace> traces_;
  std::size_t trace_index_ = 0;
  CarFollowState state_;
  std::size_t t_ = 0;
};

}  // namespace corerl
