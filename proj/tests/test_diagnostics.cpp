#include <doctest.h>

#include <cmath>
#include <random>

#include "corerl/diagnostics.hpp"
#include "corerl/error.hpp"

using namespace corerl;

namespace {

double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

GaussianSpec g1(double mean, double std) {
  return {Eigen::VectorXd::Constant(1, mean), Eigen::VectorXd::Constant(1, std * std)};
}

}  // namespace

TEST_CASE("TV distance examples") {
  const auto a = Mixture1D::single(0.0, 1.0);
  CHECK(tv_distance(a, a).value <= 1e-12);
  CHECK(std::abs(tv_distance(a, Mixture1D::single(2.0, 1.0)).value - (2.0 * Phi(1.0) - 1.0)) <= 1e-5);
  CHECK(std::abs(tv_distance(a, Mixture1D::single(100.0, 1.0)).value - 1.0) <= 1e-5);
  // Equal means, different spreads: closed form through the crossing points.
  const double s1 = 1.0, s2 = 2.0;
  const double c = std::sqrt(2.0 * std::log(s2 / s1) * s1 * s1 * s2 * s2 / (s2 * s2 - s1 * s1));
  const double closed = 2.0 * ((Phi(c / s1) - 0.5) - (Phi(c / s2) - 0.5));
  CHECK(std::abs(tv_distance(a, Mixture1D::single(0.0, 2.0)).value - closed) <= 1e-5);
}

TEST_CASE("TV distance is a metric on random Gaussians") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> m(-3.0, 3.0), s(0.2, 2.5);
  for (int i = 0; i < 20; ++i) {
    const auto p = Mixture1D::single(m(rng), s(rng));
    const auto q = Mixture1D::single(m(rng), s(rng));
    const auto r = Mixture1D::single(m(rng), s(rng));
    const double pq = tv_distance(p, q).value;
    CHECK(std::abs(pq - tv_distance(q, p).value) <= 3e-5);
    CHECK(pq <= tv_distance(p, r).value + tv_distance(r, q).value + 3e-5);
    CHECK(pq >= 0.0);
    CHECK(pq <= 1.0 + 1e-12);
    // Mixture identity: TV(q, blend(p, q, w)) = w TV(p, q).
    for (double lambda : {0.5, 1.0, 4.0}) {
      const double w = 1.0 / (1.0 + lambda);
      CHECK(std::abs(tv_distance(q, Mixture1D::blend(p, q, w)).value - w * pq) <= 3e-5);
    }
  }
}

TEST_CASE("TV truncation warning") {
  // A heavy component far outside the window of the other densities.
  Mixture1D wide;
  wide.weights = {0.5, 0.5};
  wide.means = {0.0, 0.0};
  wide.stds = {1e-3, 1.0};
  const TvResult r = tv_distance(wide, Mixture1D::single(0.0, 1e-3));
  CHECK(r.tail_mass >= 0.0);
  CHECK_FALSE(tv_distance(Mixture1D::single(0, 1), Mixture1D::single(1, 1)).truncation_warning);
}

TEST_CASE("mixed mean equals the numeric argmin") {
  const auto one = lemma1_argmin_check(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Zero(1),
                                       1.0, Eigen::VectorXd::Ones(1));
  CHECK(one.closed_form(0) == doctest::Approx(0.5));
  CHECK(one.gap <= 1e-10);
  const auto zero = lemma1_argmin_check(Eigen::Vector2d(1.5, -2.0), Eigen::Vector2d(0.3, 0.4), 0.0,
                                        Eigen::Vector2d(1.0, 3.0));
  CHECK(zero.closed_form == Eigen::VectorXd(Eigen::Vector2d(1.5, -2.0)));
  CHECK(zero.gap <= 1e-10);

  std::mt19937_64 rng(33);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_real_distribution<double> u(-10.0, 10.0), lam(0.0, 20.0), sig(0.1, 5.0);
  for (int i = 0; i < 100; ++i) {
    const int n = dim(rng);
    const Eigen::VectorXd a = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
    const Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
    const Eigen::VectorXd s = Eigen::VectorXd::NullaryExpr(n, [&] { return sig(rng); });
    CHECK(lemma1_argmin_check(a, b, lam(rng), s).gap <= 1e-10);
  }
}

TEST_CASE("bias bounds under the mixture reading") {
  const auto zero = theorem1_bounds_check(g1(0.0, 1.0), g1(2.0, 0.5), 0.0);
  CHECK(zero.tv_mixture <= 1e-10);
  const auto half = theorem1_bounds_check(g1(0.0, 1.0), g1(2.0, 0.5), 1.0);
  CHECK(std::abs(half.tv_mixture - half.d_sub / 2.0) <= 1e-4);
  CHECK(half.equality_holds);
  CHECK(half.lower_bound_holds);
  const auto same = theorem1_bounds_check(g1(1.0, 1.0), g1(1.0, 1.0), 3.0);
  CHECK(same.d_sub <= 1e-10);
  CHECK(same.tv_mixture <= 1e-10);
  CHECK(same.upper_bound <= 1e-10);
  for (double gap : {1.0, 2.0, 4.0}) {
    for (double lambda : {0.5, 1.0, 4.0}) {
      const auto r = theorem1_bounds_check(g1(0.0, 2.0), g1(gap, 1.0), lambda);
      CHECK(std::abs(r.tv_mixture - lambda / (1.0 + lambda) * r.d_sub) <= 1e-4);
      CHECK(r.tv_mixture >= r.lower_bound - 1e-4);
      CHECK(r.tv_action_average >= 0.0);
    }
  }
}

TEST_CASE("variance factor") {
  Rng rng(5);
  const Eigen::VectorXd sigma = Eigen::Vector2d(4.0, 0.5);
  const auto r0 = variance_factor_check(sigma, 0.0, 200000, rng);
  CHECK(r0.pass);
  CHECK(r0.expected == 1.0);
  for (double lambda : {1.0, 4.0}) {
    const auto r = variance_factor_check(sigma, lambda, 1000000, rng);
    CHECK(r.expected == doctest::Approx(1.0 / ((1.0 + lambda) * (1.0 + lambda))));
    CHECK(r.pass);
  }
  const auto mutated = variance_factor_check(sigma, 1.0, 200000, rng, 2.0);
  CHECK_FALSE(mutated.pass);
}

TEST_CASE("ensemble statistics") {
  const auto same = ensemble_stats({{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}}, 2);
  for (double v : same.var_reward) CHECK(v == 0.0);
  const auto two = ensemble_stats({{0.0}, {2.0}}, 1);
  CHECK(two.var_reward[0] == doctest::Approx(2.0));
  CHECK(two.mean_reward[0] == doctest::Approx(1.0));
  CHECK(two.final_window_variance == doctest::Approx(2.0));
  CHECK_THROWS_AS(ensemble_stats({{1.0, 2.0}, {1.0}}), Error);
  CHECK_THROWS_AS(ensemble_stats({{1.0}}), Error);

  // Known per-episode variance.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> N(0.0, 3.0);
  std::vector<std::vector<double>> runs(400, std::vector<double>(50));
  for (auto& r : runs)
    for (auto& x : r) x = N(rng);
  const auto st = ensemble_stats(runs, 10);
  CHECK(st.seeds == 400);
  CHECK(st.mean_variance == doctest::Approx(9.0).epsilon(0.05));
}

TEST_CASE("diagnostics report") {
  DiagnosticsOptions opt;
  opt.variance_samples = 1000000;
  const nlohmann::json report = run_diagnostics(opt);
  CHECK(report.at("pass").get<bool>());
  bool saw_action_average = false;
  for (const auto& c : report.at("checks")) {
    CHECK_MESSAGE(c.at("pass").get<bool>(), c.at("name").get<std::string>());
    if (c.dump().find("action_average") != std::string::npos) saw_action_average = true;
  }
  CHECK(saw_action_average);

  opt.mixing_exponent = 2.0;
  opt.variance_samples = 200000;
  const nlohmann::json mutated = run_diagnostics(opt);
  CHECK_FALSE(mutated.at("pass").get<bool>());
}
