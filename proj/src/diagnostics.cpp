#include "corerl/diagnostics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "corerl/error.hpp"
#include "corerl/mixing.hpp"

namespace corerl {

namespace {

constexpr double kWindowStds = 12.0;
constexpr double kTailWarning = 1e-8;

double normal_pdf(double x, double mean, double std) {
  const double z = (x - mean) / std;
  return std::exp(-0.5 * z * z) / (std * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(double x, double mean, double std) {
  return 0.5 * std::erfc(-(x - mean) / (std * std::numbers::sqrt2));
}

double integrate_abs_diff(const Mixture1D& p, const Mixture1D& q, double a, double b) {
  const auto f = [&](double x) { return std::abs(p.pdf(x) - q.pdf(x)); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

double unbiased_variance(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / (n - 1.0);
}

nlohmann::json check(const std::string& name, bool pass, nlohmann::json details) {
  return {{"name", name}, {"pass", pass}, {"details", std::move(details)}};
}

}  // namespace

void GaussianSpec::validate() const {
  if (mean.size() == 0 || mean.size() != var.size()) {
    throw Error(ErrorCode::DimensionMismatch, "Gaussian mean and variance sizes differ");
  }
  if (!(var.array() > 0.0).all()) throw Error(ErrorCode::ConfigError, "variances must be positive");
}

Mixture1D Mixture1D::single(double mean, double std) { return {{1.0}, {mean}, {std}}; }

Mixture1D Mixture1D::from(const GaussianSpec& g) {
  g.validate();
  if (g.mean.size() != 1) {
    throw Error(ErrorCode::DimensionMismatch, "TV quadrature supports one-dimensional policies");
  }
  return single(g.mean(0), std::sqrt(g.var(0)));
}

Mixture1D Mixture1D::blend(const Mixture1D& a, const Mixture1D& b, double w_a) {
  Mixture1D out;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    out.weights.push_back(w_a * a.weights[i]);
    out.means.push_back(a.means[i]);
    out.stds.push_back(a.stds[i]);
  }
  for (std::size_t i = 0; i < b.weights.size(); ++i) {
    out.weights.push_back((1.0 - w_a) * b.weights[i]);
    out.means.push_back(b.means[i]);
    out.stds.push_back(b.stds[i]);
  }
  return out;
}

double Mixture1D::pdf(double x) const {
  double p = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) p += weights[i] * normal_pdf(x, means[i], stds[i]);
  return p;
}

double Mixture1D::cdf(double x) const {
  double c = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) c += weights[i] * normal_cdf(x, means[i], stds[i]);
  return c;
}

TvResult tv_distance(const Mixture1D& p, const Mixture1D& q) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double max_std = 0.0;
  for (const Mixture1D* m : {&p, &q}) {
    for (std::size_t i = 0; i < m->weights.size(); ++i) {
      if (!(m->stds[i] > 0.0)) throw Error(ErrorCode::ConfigError, "mixture stds must be positive");
      lo = std::min(lo, m->means[i]);
      hi = std::max(hi, m->means[i]);
      max_std = std::max(max_std, m->stds[i]);
    }
  }
  lo -= kWindowStds * max_std;
  hi += kWindowStds * max_std;

  // Split at sign changes of p - q so each panel integrates a smooth function.
  constexpr int kScan = 4000;
  std::vector<double> breaks{lo};
  const auto diff = [&](double x) { return p.pdf(x) - q.pdf(x); };
  double x_prev = lo;
  double d_prev = diff(lo);
  for (int i = 1; i <= kScan; ++i) {
    const double x = lo + (hi - lo) * i / kScan;
    const double d = diff(x);
    if ((d_prev < 0.0 && d > 0.0) || (d_prev > 0.0 && d < 0.0)) {
      double a = x_prev, b = x, fa = d_prev;
      for (int it = 0; it < 100 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = diff(mid);
        if ((fa < 0.0) == (fm < 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      breaks.push_back(0.5 * (a + b));
    }
    x_prev = x;
    d_prev = d;
  }
  breaks.push_back(hi);

  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    integral += integrate_abs_diff(p, q, breaks[i], breaks[i + 1]);
  }

  TvResult r;
  r.value = std::clamp(0.5 * integral, 0.0, 1.0);
  r.tail_mass = p.cdf(lo) + (1.0 - p.cdf(hi)) + q.cdf(lo) + (1.0 - q.cdf(hi));
  r.truncation_warning = r.tail_mass > kTailWarning;
  return r;
}

Lemma1Result lemma1_argmin_check(const Eigen::VectorXd& u_rl_mean, const Eigen::VectorXd& u_prior,
                                 double lambda, const Eigen::VectorXd& sigma) {
  if (u_rl_mean.size() != u_prior.size() || u_rl_mean.size() != sigma.size()) {
    throw Error(ErrorCode::DimensionMismatch, "lemma1 inputs must share a dimension");
  }
  if (!(lambda >= 0.0) || !(sigma.array() > 0.0).all()) {
    throw Error(ErrorCode::ConfigError, "lemma1 needs lambda >= 0 and positive Sigma");
  }
  Lemma1Result r;
  r.closed_form = (u_rl_mean + lambda * u_prior) / (1.0 + lambda);

  const Eigen::VectorXd w = sigma.cwiseInverse();
  const double step = 1.0 / (2.0 * (1.0 + lambda) * w.maxCoeff());
  Eigen::VectorXd u = Eigen::VectorXd::Zero(u_rl_mean.size());
  const auto gradient = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return 2.0 * w.cwiseProduct((x - u_rl_mean) + lambda * (x - u_prior));
  };
  double best = std::numeric_limits<double>::infinity();
  long stalled = 0;
  for (r.iterations = 0; r.iterations < 1000000; ++r.iterations) {
    const Eigen::VectorXd g = gradient(u);
    const double gn = g.norm();
    if (gn <= 1e-12) break;
    if (gn < best) {
      best = gn;
      stalled = 0;
    } else if (++stalled > 50) {
      break;  // rounding floor reached
    }
    u -= step * g;
  }
  r.numeric_argmin = u;
  r.gap = (r.numeric_argmin - r.closed_form).cwiseAbs().maxCoeff();
  return r;
}

Theorem1Report theorem1_bounds_check(const GaussianSpec& pi_opt, const GaussianSpec& pi_prior,
                                     double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::ConfigError, "lambda must be >= 0");
  const Mixture1D opt = Mixture1D::from(pi_opt);
  const Mixture1D prior = Mixture1D::from(pi_prior);

  Theorem1Report r;
  r.lambda = lambda;
  const TvResult sub = tv_distance(opt, prior);
  r.d_sub = sub.value;

  // At convergence pi_theta = pi_opt, so the mixture is opt/(1+l) + l prior/(1+l).
  const Mixture1D mixed = Mixture1D::blend(opt, prior, 1.0 / (1.0 + lambda));
  const TvResult mix = tv_distance(mixed, opt);
  r.tv_mixture = mix.value;
  r.upper_bound = lambda / (1.0 + lambda) * r.d_sub;
  r.lower_bound = r.d_sub - sub.value / (1.0 + lambda);
  r.equality_holds = std::abs(r.tv_mixture - r.upper_bound) <= 1e-4;
  r.lower_bound_holds = r.tv_mixture >= r.lower_bound - 1e-4;

  // Averaging independent actions instead: N((m_o + l m_p)/(1+l), (s_o^2 + l^2 s_p^2)/(1+l)^2).
  const double m = (opt.means[0] + lambda * prior.means[0]) / (1.0 + lambda);
  const double s = std::sqrt(opt.stds[0] * opt.stds[0] +
                             lambda * lambda * prior.stds[0] * prior.stds[0]) /
                   (1.0 + lambda);
  const TvResult avg = tv_distance(Mixture1D::single(m, s), opt);
  r.tv_action_average = avg.value;
  r.truncation_warning = sub.truncation_warning || mix.truncation_warning || avg.truncation_warning;
  return r;
}

VarianceFactorResult variance_factor_check(const Eigen::VectorXd& sigma, double lambda,
                                           std::size_t n_samples, Rng& rng,
                                           double mixing_exponent) {
  if (n_samples < 2) throw Error(ErrorCode::ConfigError, "need at least two samples");
  const Eigen::Index dim = sigma.size();
  const double w = std::pow(1.0 / (1.0 + lambda), mixing_exponent);
  const double lambda_eff = 1.0 / w - 1.0;
  const Eigen::VectorXd mean = Eigen::VectorXd::LinSpaced(dim, 0.3, 0.3 + dim);
  const Eigen::VectorXd prior = Eigen::VectorXd::Constant(dim, -1.0);
  const Eigen::VectorXd big = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity());

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd u(dim);
  for (std::size_t k = 0; k < n_samples; ++k) {
    for (Eigen::Index i = 0; i < dim; ++i) u(i) = mean(i) + std::sqrt(sigma(i)) * normal(rng);
    const Eigen::VectorXd mixed = mix_action(u, prior, lambda_eff, -big, big);
    // Shift by the known mean of the mix for numerically stable accumulation.
    const Eigen::VectorXd c = mixed - (w * mean + (1.0 - w) * prior);
    sum += c;
    sum_sq += c.cwiseAbs2();
  }
  const double n = static_cast<double>(n_samples);
  const Eigen::VectorXd var = (sum_sq - sum.cwiseAbs2() / n) / (n - 1.0);

  VarianceFactorResult r;
  r.expected = 1.0 / ((1.0 + lambda) * (1.0 + lambda));
  r.empirical_ratio = var.cwiseQuotient(sigma);
  r.pass = ((r.empirical_ratio.array() - r.expected).abs() <= 0.03 * r.expected).all();
  return r;
}

SeedEnsembleStats ensemble_stats(const std::vector<std::vector<double>>& rewards,
                                 std::size_t final_window) {
  if (rewards.size() < 2) throw Error(ErrorCode::MisalignedRuns, "need at least two seeds");
  const std::size_t episodes = rewards.front().size();
  if (episodes == 0) throw Error(ErrorCode::MisalignedRuns, "runs have no episodes");
  for (const auto& r : rewards) {
    if (r.size() != episodes) {
      throw Error(ErrorCode::MisalignedRuns, "runs have " + std::to_string(r.size()) + " and " +
                                                 std::to_string(episodes) + " episodes");
    }
  }
  SeedEnsembleStats s;
  s.seeds = rewards.size();
  std::vector<double> column(s.seeds);
  for (std::size_t e = 0; e < episodes; ++e) {
    double mean = 0.0;
    for (std::size_t k = 0; k < s.seeds; ++k) {
      column[k] = rewards[k][e];
      mean += column[k];
    }
    s.mean_reward.push_back(mean / s.seeds);
    s.var_reward.push_back(unbiased_variance(column));
  }
  for (std::size_t e = 0; e < episodes; ++e) {
    s.mean_variance += s.var_reward[e] / episodes;
    s.overall_mean += s.mean_reward[e] / episodes;
  }
  const std::size_t window = std::min(final_window, episodes);
  for (const auto& r : rewards) {
    double m = 0.0;
    for (std::size_t e = episodes - window; e < episodes; ++e) m += r[e];
    s.final_window_means.push_back(m / window);
  }
  for (double m : s.final_window_means) s.final_window_mean += m / s.seeds;
  s.final_window_variance = unbiased_variance(s.final_window_means);
  return s;
}

nlohmann::json run_diagnostics(const DiagnosticsOptions& options) {
  nlohmann::json checks = nlohmann::json::array();
  Rng rng = child_rng(options.seed, "diagnostics");

  {  // Mixed mean vs numeric argmin on random instances.
    std::uniform_int_distribution<int> dim_dist(1, 4);
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    std::uniform_real_distribution<double> lam(0.0, 20.0);
    std::uniform_real_distribution<double> var(0.5, 2.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const int d = dim_dist(rng);
      Eigen::VectorXd u(d), p(d), s(d);
      for (int i = 0; i < d; ++i) {
        u(i) = val(rng);
        p(i) = val(rng);
        s(i) = var(rng);
      }
      worst = std::max(worst, lemma1_argmin_check(u, p, lam(rng), s).gap);
    }
    checks.push_back(check("lemma1_argmin", worst <= 1e-10,
                           {{"instances", 100}, {"max_gap", worst}, {"tolerance", 1e-10}}));
  }

  {  // Variance factor of the mixed action.
    const Eigen::VectorXd sigma = Eigen::VectorXd::Constant(1, 4.0);
    nlohmann::json rows = nlohmann::json::array();
    bool pass = true;
    for (double lambda : {0.5, 1.0, 4.0}) {
      const auto r = variance_factor_check(sigma, lambda, options.variance_samples, rng,
                                           options.mixing_exponent);
      pass = pass && r.pass;
      rows.push_back({{"lambda", lambda},
                      {"empirical_ratio", r.empirical_ratio(0)},
                      {"expected", r.expected},
                      {"pass", r.pass}});
    }
    checks.push_back(check("variance_factor", pass,
                           {{"samples", options.variance_samples}, {"rows", rows}}));
  }

  {  // Bias bounds under both readings of the mixed policy.
    const double action_range = 20.0;
    const double policy_std = 0.1 * action_range;
    const double prior_std = options.prior_smoothing_fraction * action_range;
    nlohmann::json rows = nlohmann::json::array();
    bool pass = true;
    for (double gap : {1.0, 2.0, 4.0}) {
      for (double lambda : {0.5, 1.0, 4.0}) {
        GaussianSpec opt{Eigen::VectorXd::Constant(1, 0.0),
                         Eigen::VectorXd::Constant(1, policy_std * policy_std)};
        GaussianSpec prior{Eigen::VectorXd::Constant(1, gap),
                           Eigen::VectorXd::Constant(1, prior_std * prior_std)};
        const auto r = theorem1_bounds_check(opt, prior, lambda);
        pass = pass && r.equality_holds && r.lower_bound_holds;
        rows.push_back({{"mean_gap", gap},
                        {"lambda", lambda},
                        {"d_sub", r.d_sub},
                        {"tv_mixture", r.tv_mixture},
                        {"upper_bound", r.upper_bound},
                        {"lower_bound", r.lower_bound},
                        {"tv_action_average", r.tv_action_average},
                        {"equality_holds", r.equality_holds},
                        {"lower_bound_holds", r.lower_bound_holds}});
      }
    }
    checks.push_back(check("theorem1_bias_bounds", pass,
                           {{"prior_smoothing_std", prior_std},
                            {"readings", {"density_mixture (asserted)", "action_average (reported)"}},
                            {"rows", rows}}));
  }

  {  // TV metric properties and a closed-form anchor.
    const double closed = 2.0 * normal_cdf(1.0, 0.0, 1.0) - 1.0;
    const double shift = tv_distance(Mixture1D::single(0, 1), Mixture1D::single(2, 1)).value;
    std::uniform_real_distribution<double> mean(-3.0, 3.0);
    std::uniform_real_distribution<double> sd(0.3, 2.0);
    std::uniform_real_distribution<double> lam(0.0, 10.0);
    double worst_sym = 0.0, worst_tri = 0.0, worst_mix = 0.0;
    for (int k = 0; k < 20; ++k) {
      const auto a = Mixture1D::single(mean(rng), sd(rng));
      const auto b = Mixture1D::single(mean(rng), sd(rng));
      const auto c = Mixture1D::single(mean(rng), sd(rng));
      const double ab = tv_distance(a, b).value;
      worst_sym = std::max(worst_sym, std::abs(ab - tv_distance(b, a).value));
      worst_tri = std::max(worst_tri, ab - tv_distance(a, c).value - tv_distance(c, b).value);
      const double l = lam(rng);
      const double lhs = tv_distance(b, Mixture1D::blend(a, b, 1.0 / (1.0 + l))).value;
      worst_mix = std::max(worst_mix, std::abs(lhs - ab / (1.0 + l)));
    }
    const bool pass = std::abs(shift - closed) <= 1e-5 && worst_sym <= 3e-5 &&
                      worst_tri <= 3e-5 && worst_mix <= 3e-5;
    checks.push_back(check("tv_properties", pass,
                           {{"shift_tv", shift},
                            {"shift_closed_form", closed},
                            {"max_symmetry_error", worst_sym},
                            {"max_triangle_excess", worst_tri},
                            {"max_mixture_identity_error", worst_mix}}));
  }

  bool all = true;
  for (const auto& c : checks) all = all && c.at("pass").get<bool>();
  return {{"pass", all}, {"checks", checks}};
}

}  // namespace corerl
