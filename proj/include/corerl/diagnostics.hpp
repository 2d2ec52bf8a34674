#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <vector>

#include "corerl/rng.hpp"

namespace corerl {

/// Gaussian with diagonal covariance.
struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;

  void validate() const;
};

/// One-dimensional Gaussian mixture density.
struct Mixture1D {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stds;

  static Mixture1D single(double mean, double std);
  static Mixture1D from(const GaussianSpec& g);
  /// w_a * a + (1 - w_a) * b as densities.
  static Mixture1D blend(const Mixture1D& a, const Mixture1D& b, double w_a);

  double pdf(double x) const;
  double cdf(double x) const;
};

struct TvResult {
  double value = 0.0;
  double tail_mass = 0.0;  // mass of p plus q outside the window
  bool truncation_warning = false;
};

/// (1/2) integral |p - q| by adaptive Gauss-Kronrod over the window
/// [min mean - 12 max std, max mean + 12 max std].
TvResult tv_distance(const Mixture1D& p, const Mixture1D& q);

struct Lemma1Result {
  Eigen::VectorXd closed_form;
  Eigen::VectorXd numeric_argmin;
  double gap = 0.0;  // infinity norm of the difference
  long iterations = 0;
};

/// Compares the mixed mean (u + lambda u_prior)/(1 + lambda) against a
/// gradient-descent minimizer of the Sigma-weighted quadratic
/// |u - u_rl|^2_Sigma + lambda |u - u_prior|^2_Sigma.
Lemma1Result lemma1_argmin_check(const Eigen::VectorXd& u_rl_mean, const Eigen::VectorXd& u_prior,
                                 double lambda, const Eigen::VectorXd& sigma);

struct Theorem1Report {
  double lambda = 0.0;
  double d_sub = 0.0;            // TV(pi_opt, pi_prior)
  double tv_mixture = 0.0;       // TV(pi_k, pi_opt), pi_k the density mixture
  double upper_bound = 0.0;      // lambda/(1+lambda) D_sub
  double lower_bound = 0.0;      // D_sub - TV(pi_theta, pi_prior)/(1+lambda), pi_theta = pi_opt
  double tv_action_average = 0.0;  // TV when pi_k averages actions instead (reported only)
  bool equality_holds = false;   // |tv_mixture - upper_bound| <= 1e-4
  bool lower_bound_holds = false;
  bool truncation_warning = false;
};

/// Bias bounds at convergence (pi_theta = pi_opt), 1-D policies.
Theorem1Report theorem1_bounds_check(const GaussianSpec& pi_opt, const GaussianSpec& pi_prior,
                                     double lambda);

struct VarianceFactorResult {
  Eigen::VectorXd empirical_ratio;  // per dimension: var(mixed) / Sigma
  double expected = 1.0;            // 1 / (1 + lambda)^2
  bool pass = false;                // every ratio within 3% of expected
};

/// Samples u ~ N(mean, Sigma), mixes with a constant prior using weight
/// (1/(1+lambda))^mixing_exponent on u, and compares the variance of the
/// mixed action with Sigma. `mixing_exponent` != 1 is a mutation hook.
VarianceFactorResult variance_factor_check(const Eigen::VectorXd& sigma, double lambda,
                                           std::size_t n_samples, Rng& rng,
                                           double mixing_exponent = 1.0);

struct SeedEnsembleStats {
  std::size_t seeds = 0;
  std::vector<double> mean_reward;  // per episode, across seeds
  std::vector<double> var_reward;   // per episode, unbiased across seeds
  double mean_variance = 0.0;       // average of var_reward over episodes
  double overall_mean = 0.0;        // average of mean_reward over episodes
  std::vector<double> final_window_means;  // per seed: mean of its last `window` episodes
  double final_window_mean = 0.0;
  double final_window_variance = 0.0;  // unbiased across seeds
};

/// `rewards[seed][episode]`; all seeds must have the same episode count.
SeedEnsembleStats ensemble_stats(const std::vector<std::vector<double>>& rewards,
                                 std::size_t final_window = 10);

struct DiagnosticsOptions {
  std::uint64_t seed = 2024;
  std::size_t variance_samples = 1000000;
  double mixing_exponent = 1.0;
  double prior_smoothing_fraction = 0.05;  // of the action range
};

/// Runs the mixed-mean argmin, bias-bound and TV-distance property suites. The report
/// has "checks" (name, pass, numbers) and an overall "pass".
nlohmann::json run_diagnostics(const DiagnosticsOptions& options = {});

}  // namespace corerl
