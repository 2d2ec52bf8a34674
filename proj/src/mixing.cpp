#include "corerl/mixing.hpp"

#include <cmath>
#include <string>

#include "corerl/error.hpp"

namespace corerl {

void MixingConfig::validate() const {
  if (const auto* f = std::get_if<FixedMixing>(&mode)) {
    if (!(f->lambda >= 0.0)) throw Error(ErrorCode::ConfigError, "lambda must be >= 0");
  } else {
    const auto& a = std::get<AdaptiveMixing>(mode);
    if (!(a.C > 0.0) || !(a.lambda_max > 0.0)) {
      throw Error(ErrorCode::ConfigError, "adaptive mixing needs C > 0 and lambda_max > 0");
    }
  }
}

Eigen::VectorXd mix_action(const Eigen::VectorXd& u_rl, const Eigen::VectorXd& u_prior,
                           double lambda, const Eigen::VectorXd& low,
                           const Eigen::VectorXd& high) {
  if (u_rl.size() != u_prior.size() || u_rl.size() != low.size() || low.size() != high.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "mix_action sizes rl=" + std::to_string(u_rl.size()) +
                    " prior=" + std::to_string(u_prior.size()));
  }
  if (!(lambda >= 0.0)) throw Error(ErrorCode::ConfigError, "lambda must be >= 0");
  Eigen::VectorXd u;
  if (std::isinf(lambda)) {
    u = u_prior;
  } else {
    u = (u_rl + lambda * u_prior) / (1.0 + lambda);
  }
  return u.cwiseMax(low).cwiseMin(high);
}

double adaptive_lambda(double delta_prev, double C, double lambda_max) {
  // -expm1(-x) keeps precision for small |delta|.
  return lambda_max * -std::expm1(-C * std::abs(delta_prev));
}

double mixing_weight(const MixingConfig& config, std::optional<double> delta_prev) {
  if (const auto* f = std::get_if<FixedMixing>(&config.mode)) return f->lambda;
  const auto& a = std::get<AdaptiveMixing>(config.mode);
  if (!delta_prev) return a.lambda_max;
  return adaptive_lambda(*delta_prev, a.C, a.lambda_max);
}

}  // namespace corerl
