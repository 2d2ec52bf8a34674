#pragma once

#include <Eigen/Dense>
#include <optional>
#include <variant>

namespace corerl {

struct FixedMixing {
  double lambda = 0.0;
};

/// lambda = lambda_max (1 - exp(-C |delta_prev|)).
struct AdaptiveMixing {
  double C = 1.0;
  double lambda_max = 10.0;
};

struct MixingConfig {
  std::variant<FixedMixing, AdaptiveMixing> mode;

  bool adaptive() const { return std::holds_alternative<AdaptiveMixing>(mode); }
  void validate() const;
};

/// (u_rl + lambda u_prior) / (1 + lambda), clipped to [low, high].
Eigen::VectorXd mix_action(const Eigen::VectorXd& u_rl, const Eigen::VectorXd& u_prior,
                           double lambda, const Eigen::VectorXd& low,
                           const Eigen::VectorXd& high);

double adaptive_lambda(double delta_prev, double C, double lambda_max);

/// Weight for the step: the fixed value, or the adaptive rule on the previous
/// step's TD error. With no previous TD error (first step of an episode) the
/// adaptive mode trusts the prior fully and returns lambda_max.
double mixing_weight(const MixingConfig& config, std::optional<double> delta_prev);

}  // namespace corerl
