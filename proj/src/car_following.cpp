#include "corerl/car_following.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "corerl/error.hpp"

namespace corerl {

namespace {

// Exact constant-acceleration update with the velocity floored at zero.
void integrate(double& s, double& v, double a, double dt) {
  const double v_next = v + a * dt;
  if (v_next >= 0.0) {
    s += v * dt + 0.5 * a * dt * dt;
    v = v_next;
  } else {
    s += -v * v / (2.0 * a);
    v = 0.0;
  }
}

struct Segment {
  double start;  // s
  double accel;  // m/s^2
};

std::vector<Segment> piecewise_profile(Rng& rng, double duration, double min_len, double max_len,
                                       double a_lo, double a_hi) {
  std::uniform_real_distribution<double> len(min_len, max_len);
  std::uniform_real_distribution<double> acc(a_lo, a_hi);
  std::vector<Segment> segs;
  // Starts before zero so lagged lookups stay inside the profile.
  for (double t = -5.0; t < duration; t += len(rng)) segs.push_back({t, acc(rng)});
  return segs;
}

double profile_at(const std::vector<Segment>& segs, double t) {
  double a = segs.front().accel;
  for (const auto& s : segs) {
    if (s.start > t) break;
    a = s.accel;
  }
  return a;
}

bool trace_is_valid(const LeaderTrace& tr) {
  for (std::size_t t = 0; t < tr.steps(); ++t) {
    for (int c = 0; c < kChainLength; ++c) {
      const double v = tr.velocity[t][c];
      if (!(v >= 0.0 && v <= kTraceMaxSpeed)) return false;
      if (t > 0) {
        const double a = (v - tr.velocity[t - 1][c]) / tr.dt;
        if (a < kTraceMinAccel - 1e-9 || a > kTraceMaxAccel + 1e-9) return false;
      }
      if (c + 1 < kChainLength && tr.position[t][c] - tr.position[t][c + 1] <= 2.0) return false;
    }
    // The controlled car needs room between its replayed neighbours.
    if (tr.position[t][kControlledCar - 1] - tr.position[t][kControlledCar + 1] < 12.0) return false;
  }
  for (int c = 0; c + 1 < kChainLength; ++c) {
    const double gap = tr.position[0][c] - tr.position[0][c + 1];
    if (gap < kTraceMinGap || gap > kTraceMaxGap) return false;
  }
  return true;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Eigen::VectorXd CarFollowState::prior_vector() const {
  Eigen::VectorXd v(6);
  v << s_back(), s_curr(), s_front(), v_back(), v_curr(), v_front();
  return v;
}

CarFollowState LeaderTrace::state_at(std::size_t t) const {
  CarFollowState s;
  s.position = position.at(t);
  s.velocity = velocity.at(t);
  return s;
}

LeaderTrace generate_leader_trace(std::uint64_t seed, const CarFollowParams& params) {
  Rng rng = child_rng(seed, "leader_trace");
  const double duration = params.dt * params.horizon;

  for (;;) {
    const auto common = piecewise_profile(rng, duration, 1.0, 3.0, -1.5, 1.0);
    std::uniform_real_distribution<double> v0_dist(8.0, 20.0);
    std::uniform_real_distribution<double> lag_dist(0.2, 0.6);
    std::uniform_real_distribution<double> gap_dist(10.0, 22.0);
    std::uniform_real_distribution<double> dv_dist(-0.5, 0.5);

    const double v0 = v0_dist(rng);
    std::array<double, kChainLength> s{};
    std::array<double, kChainLength> v{};
    std::array<double, kChainLength> lag{};
    std::array<std::vector<Segment>, kChainLength> pert;
    s[0] = 0.0;
    for (int c = 0; c < kChainLength; ++c) {
      if (c > 0) {
        s[c] = s[c - 1] - gap_dist(rng);
        lag[c] = lag[c - 1] + lag_dist(rng);
      }
      v[c] = std::max(0.0, v0 + dv_dist(rng));
      pert[c] = piecewise_profile(rng, duration, 0.5, 2.0, -0.3, 0.3);
    }

    LeaderTrace tr;
    tr.dt = params.dt;
    tr.position.push_back(s);
    tr.velocity.push_back(v);
    for (int k = 0; k < params.horizon; ++k) {
      const double t = k * params.dt;
      for (int c = 0; c < kChainLength; ++c) {
        double a = profile_at(common, t - lag[c]) + profile_at(pert[c], t);
        a = std::clamp(a, kTraceMinAccel, kTraceMaxAccel);
        if (v[c] + a * params.dt > kTraceMaxSpeed) a = (kTraceMaxSpeed - v[c]) / params.dt;
        integrate(s[c], v[c], a, params.dt);
      }
      tr.position.push_back(s);
      tr.velocity.push_back(v);
    }
    if (trace_is_valid(tr)) return tr;
  }
}

double carfollow_reward(const CarFollowState& state, double accel, double v_dot) {
  const double front = std::max(state.front_gap(), kGapClamp);
  const double back = std::max(state.back_gap(), kGapClamp);
  double g1 = 0.0;
  if (front <= 10.0) {
    g1 = 1.0 / front;
  } else if (back <= 10.0) {
    g1 = 1.0 / back;
  }
  const double g2 = (front <= 2.0 || back <= 2.0) ? 1.0 : 0.0;
  return -v_dot * std::min(0.0, accel) - 100.0 * std::abs(g1) - 50.0 * g2;
}

StepResult carfollow_step(const CarFollowState& state, double accel, const CarFollowParams& params,
                          const LeaderTrace& trace, std::size_t t, CarFollowState* next_out) {
  if (t + 1 >= trace.steps()) {
    throw Error(ErrorCode::DimensionMismatch, "leader trace shorter than the episode");
  }
  const double a = std::clamp(accel, params.accel_lo, params.accel_hi);

  CarFollowState next = trace.state_at(t + 1);
  double s = state.s_curr();
  double v = state.v_curr();
  integrate(s, v, a, params.dt);
  next.position[kControlledCar] = s;
  next.velocity[kControlledCar] = v;
  const double v_dot = (v - state.v_curr()) / params.dt;

  for (int c = 0; c < kChainLength; ++c) {
    if (!std::isfinite(next.position[c]) || !std::isfinite(next.velocity[c])) {
      throw Error(ErrorCode::NonFiniteState, "car-following state became non-finite");
    }
  }

  StepResult out;
  out.collision = next.front_gap() <= 0.0 || next.back_gap() <= 0.0;
  out.reward = carfollow_reward(next, a, v_dot);
  out.terminal = out.collision;
  out.done = out.collision || t + 1 >= static_cast<std::size_t>(params.horizon);
  out.next_state = CarFollowEnv::observe(next);
  if (next_out) *next_out = next;
  return out;
}

void write_trace_csv(const LeaderTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "t";
  for (int c = 1; c <= kChainLength; ++c) out << ",s_" << c << ",v_" << c;
  out << "\n";
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    out << fmt17(static_cast<double>(k) * trace.dt);
    for (int c = 0; c < kChainLength; ++c) {
      out << ',' << fmt17(trace.position[k][c]) << ',' << fmt17(trace.velocity[k][c]);
    }
    out << "\n";
  }
}

LeaderTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);  // header
  LeaderTrace tr;
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != 1 + 2 * kChainLength) {
      throw Error(ErrorCode::ConfigError, "trace row has " + std::to_string(row.size()) + " columns");
    }
    times.push_back(row[0]);
    std::array<double, kChainLength> s{};
    std::array<double, kChainLength> v{};
    for (int c = 0; c < kChainLength; ++c) {
      s[c] = row[1 + 2 * c];
      v[c] = row[2 + 2 * c];
    }
    tr.position.push_back(s);
    tr.velocity.push_back(v);
  }
  if (times.size() < 2) throw Error(ErrorCode::ConfigError, "trace needs at least two rows");
  tr.dt = times[1] - times[0];
  return tr;
}

CarFollowEnv::CarFollowEnv(CarFollowParams params, int pool_size) : params_(params) {
  if (pool_size < 1) throw Error(ErrorCode::ConfigError, "trace pool must be nonempty");
  for (int k = 0; k < pool_size; ++k) {
    traces_.push_back(generate_leader_trace(params.leader_profile_seed + k, params));
  }
}

CarFollowEnv::CarFollowEnv(CarFollowParams params, std::vector<LeaderTrace> traces)
    : params_(params), traces_(std::move(traces)) {
  if (traces_.empty()) throw Error(ErrorCode::ConfigError, "trace pool must be nonempty");
  for (const auto& tr : traces_) {
    if (tr.steps() < static_cast<std::size_t>(params_.horizon) + 1) {
      throw Error(ErrorCode::ConfigError, "trace shorter than the horizon");
    }
  }
}

Eigen::VectorXd CarFollowEnv::action_low() const {
  return Eigen::VectorXd::Constant(1, params_.accel_lo);
}

Eigen::VectorXd CarFollowEnv::action_high() const {
  return Eigen::VectorXd::Constant(1, params_.accel_hi);
}

Eigen::VectorXd CarFollowEnv::reset(Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, traces_.size() - 1);
  return reset_to(pick(rng));
}

Eigen::VectorXd CarFollowEnv::reset_to(std::size_t trace_index) {
  trace_index_ = trace_index;
  state_ = traces_.at(trace_index).state_at(0);
  t_ = 0;
  return observe(state_);
}

StepResult CarFollowEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != 1) throw Error(ErrorCode::DimensionMismatch, "car-following action is scalar");
  CarFollowState next;
  StepResult out = carfollow_step(state_, action(0), params_, traces_[trace_index_], t_, &next);
  state_ = next;
  ++t_;
  return out;
}

Eigen::VectorXd CarFollowEnv::monitor_state() const {
  Eigen::VectorXd m(2);
  m << state_.front_gap() - state_.back_gap(), state_.v_front() - 2.0 * state_.v_curr() + state_.v_back();
  return m;
}

Eigen::VectorXd CarFollowEnv::observe(const CarFollowState& s) {
  Eigen::VectorXd o(5);
  o << s.front_gap() / 10.0, s.back_gap() / 10.0, s.v_curr() / 10.0,
      (s.v_front() - s.v_curr()) / 2.0, (s.v_back() - s.v_curr()) / 2.0;
  return o;
}

}  // namespace corerl
