#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "psim/types.hpp"

namespace psim {

// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x),
// via the usual series / continued-fraction split.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Survival function of the chi-square distribution with `dof` degrees.
double chi_square_sf(double x, double dof);

// Survival function of the Kolmogorov distribution.
double kolmogorov_sf(double x);

// One-sided KS statistic of samples against U(0,1), and its p-value at
// sample size n (asymptotic, with the sqrt(n) scaling).
double ks_uniform_statistic(std::vector<double> samples01);
double ks_uniform_pvalue(double statistic, std::int64_t n);

struct NormalityReport {
  std::int64_t n = 0;
  double mean = 0, sd = 0;
  double skewness = 0, excess_kurtosis = 0;
  double z_skewness = 0, z_kurtosis = 0;
  bool degenerate = false;  // zero variance; flagged, not failed
  bool pass = false;
};

// Skewness/kurtosis z-tests under the normal null; fails if either |z| > 4.
// Requires at least 500 samples.
NormalityReport normality_check(const std::vector<double>& samples);

struct ChiSquareResult {
  double statistic = 0;
  double dof = 0;
  double p_value = 1;
  int cells_used = 0;  // after pooling
};

// Two-sample chi-square test of distribution equality on shared categories.
// Cells are pooled (smallest totals first) until every expected count is at
// least 5; fewer than two cells left is an error.
ChiSquareResult chi_square_equality(const std::vector<std::int64_t>& counts_a,
                                    const std::vector<std::int64_t>& counts_b);

// One-sample goodness of fit of counts against a discrete distribution.
ChiSquareResult chi_square_gof(const std::vector<std::int64_t>& counts, const Eigen::VectorXd& probs);

struct SlopeFit {
  double slope = 0, intercept = 0;
  double slope_se = 0;
  double ci_lo = 0, ci_hi = 0;  // 95% normal interval
  bool degenerate = false;      // zero/undefined errors
};

// OLS slope of log(error) against log(N).
SlopeFit fit_loglog_slope(const std::vector<double>& n_values, const std::vector<double>& errors);

// Mean / sample variance helpers.
double mean_of(const std::vector<double>& xs);
double sample_sd(const std::vector<double>& xs);

}  // namespace psim
