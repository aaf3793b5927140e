#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <psim/rng.hpp>
#include <psim/stats.hpp>

using namespace psim;

TEST_CASE("regularized gamma against closed forms") {
  // P(1, x) = 1 - exp(-x).
  for (double x : {0.1, 0.5, 1.0, 3.0, 10.0})
    CHECK(regularized_gamma_p(1.0, x) == doctest::Approx(1.0 - std::exp(-x)).epsilon(1e-12));
  // Chi-square quantile checks: P(chi2_2 > 5.991) ~ 0.05, P(chi2_1 > 3.841) ~ 0.05.
  CHECK(chi_square_sf(5.991, 2) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(chi_square_sf(3.841, 1) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(chi_square_sf(0.0, 4) == 1.0);
}

TEST_CASE("kolmogorov survival") {
  CHECK(kolmogorov_sf(1.3581) == doctest::Approx(0.05).epsilon(2e-2));
  CHECK(kolmogorov_sf(1.6276) == doctest::Approx(0.01).epsilon(5e-2));
  CHECK(kolmogorov_sf(0.0) == 1.0);
}

TEST_CASE("normality check calibration") {
  RngStream rng(1, 1);
  std::vector<double> normal(10000), expo(10000);
  for (auto& x : normal) x = rng.normal();
  for (auto& x : expo) x = rng.exponential(1.0);

  const auto rn = normality_check(normal);
  CHECK(rn.pass);
  CHECK(!rn.degenerate);

  const auto re = normality_check(expo);
  CHECK(!re.pass);
  CHECK(re.z_skewness > 4.0);

  std::vector<double> zeros(600, 0.0);
  const auto rz = normality_check(zeros);
  CHECK(rz.degenerate);

  CHECK_THROWS_AS((void)normality_check(std::vector<double>(100, 1.0)), ConfigError);
}

TEST_CASE("two-sample chi-square") {
  std::vector<std::int64_t> a = {100, 200, 300};
  const auto same = chi_square_equality(a, a);
  CHECK(same.statistic == doctest::Approx(0.0));
  CHECK(same.p_value == doctest::Approx(1.0));

  std::vector<std::int64_t> left = {1000, 0, 0};
  std::vector<std::int64_t> right = {0, 0, 1000};
  CHECK(chi_square_equality(left, right).p_value < 1e-12);

  // Null calibration: p-values of same-distribution samples are uniform.
  RngStream rng(2, 2);
  Eigen::VectorXd probs(4);
  probs << 0.4, 0.3, 0.2, 0.1;
  std::vector<double> pvalues;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::int64_t> ca(4, 0), cb(4, 0);
    for (int d = 0; d < 20000; ++d) {
      auto draw = [&]() {
        const double u = rng.uniform01();
        double cum = 0;
        for (int i = 0; i < 4; ++i) {
          cum += probs[i];
          if (u < cum) return i;
        }
        return 3;
      };
      ++ca[static_cast<std::size_t>(draw())];
      ++cb[static_cast<std::size_t>(draw())];
    }
    pvalues.push_back(chi_square_equality(ca, cb).p_value);
  }
  const double ks = ks_uniform_statistic(pvalues);
  CHECK(ks_uniform_pvalue(ks, 200) > 0.01);
}

TEST_CASE("chi-square pooling") {
  // Small cells pool together instead of inflating the statistic.
  std::vector<std::int64_t> a = {3, 4, 3, 990};
  std::vector<std::int64_t> b = {4, 3, 4, 989};
  const auto r = chi_square_equality(a, b);
  CHECK(r.cells_used == 2);
  CHECK(r.p_value > 0.1);

  // Pooling that collapses everything into one cell is an error.
  std::vector<std::int64_t> sparse_a = {1, 2, 1, 996};
  std::vector<std::int64_t> sparse_b = {2, 1, 2, 995};
  CHECK_THROWS_AS((void)chi_square_equality(sparse_a, sparse_b), ConfigError);

  std::vector<std::int64_t> tiny_a = {1, 0};
  std::vector<std::int64_t> tiny_b = {0, 1};
  CHECK_THROWS_AS((void)chi_square_equality(tiny_a, tiny_b), ConfigError);
}

TEST_CASE("log-log slope estimator") {
  // Synthetic errors c N^{-1/2} (1 + 5% noise) recover slope -0.5 +- 0.05.
  RngStream rng(3, 3);
  std::vector<double> ns = {200, 800, 3200, 12800, 51200};
  std::vector<double> errs;
  for (double n : ns) errs.push_back(2.0 / std::sqrt(n) * (1.0 + 0.05 * (2 * rng.uniform01() - 1)));
  const auto fit = fit_loglog_slope(ns, errs);
  CHECK(std::abs(fit.slope + 0.5) <= 0.05);
  CHECK(!fit.degenerate);

  // Scaling the same noise realization by 1/sqrt(2) scales the CI width by
  // exactly 1/sqrt(2) (replica-doubling behavior of the standard error).
  std::vector<double> noise;
  for (std::size_t i = 0; i < ns.size(); ++i) noise.push_back(0.05 * (2 * rng.uniform01() - 1));
  std::vector<double> e1, e2;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    e1.push_back(2.0 / std::sqrt(ns[i]) * std::exp(noise[i]));
    e2.push_back(2.0 / std::sqrt(ns[i]) * std::exp(noise[i] / std::sqrt(2.0)));
  }
  const auto f1 = fit_loglog_slope(ns, e1);
  const auto f2 = fit_loglog_slope(ns, e2);
  CHECK(f2.slope_se == doctest::Approx(f1.slope_se / std::sqrt(2.0)).epsilon(1e-9));

  // Zero errors are degenerate, not a crash.
  const auto dz = fit_loglog_slope({100, 200, 400}, {0.0, 0.0, 0.0});
  CHECK(dz.degenerate);

  CHECK_THROWS_AS((void)fit_loglog_slope({100, 200}, {0.1, 0.05}), ConfigError);
}

TEST_CASE("ks uniform statistic null behavior") {
  RngStream rng(4, 4);
  std::vector<double> pvals;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> xs(500);
    for (auto& x : xs) x = rng.uniform01();
    pvals.push_back(ks_uniform_pvalue(ks_uniform_statistic(xs), 500));
  }
  const double mean = mean_of(pvals);
  CHECK(mean > 0.35);
  CHECK(mean < 0.65);
}
