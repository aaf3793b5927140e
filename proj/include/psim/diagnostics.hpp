#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "psim/limit_solver.hpp"
#include "psim/model.hpp"
#include "psim/stats.hpp"

namespace psim {

// Empirical law-of-large-numbers rate: per N, the mean over replicas of the
// sup-over-time distance between the empirical path and the limit, plus the
// fitted log-log slope against N.
struct LlnReport {
  std::string metric;  // "tv" or "ks"
  std::vector<std::int64_t> n_values;
  std::vector<double> mean_errors;
  std::vector<double> std_errors;                // standard error of each mean
  std::vector<std::vector<double>> per_replica;  // [n_index][replica]
  int replicas = 0;
  std::vector<double> sample_times;
  SlopeFit slope;
};

// Initial configurations per replica: independent draws from nu0, or the
// deterministic rounded-count configuration closest to nu0 (largest
// remainders win), which starts every replica exactly at the limit.
enum class LlnInit { product, rounded };

LlnReport lln_convergence_report(const FiniteModel& model, const Eigen::VectorXd& nu0,
                                 const std::vector<std::int64_t>& n_list, int replicas, double T,
                                 double dt_limit, int sample_points, std::uint64_t seed,
                                 int workers, LlnInit init_mode = LlnInit::product);

std::vector<int> rounded_configuration(const Eigen::VectorXd& nu0, int n_agents);

LlnReport lln_convergence_report(const PercolationModel& model, const DensityGrid& g0,
                                 const std::vector<std::int64_t>& n_list, int replicas, double T,
                                 double dt_limit, int sample_points, std::uint64_t seed,
                                 int workers);

// CLT verdict: empirical covariance of sigma_N(T) across replicas against the
// covariance-equation prediction, plus per-component normality z-tests.
struct CltReport {
  std::int64_t n_agents = 0;
  int replicas = 0;
  double T = 0;
  Eigen::MatrixXd empirical_cov;
  Eigen::MatrixXd predicted_cov;
  Eigen::VectorXd empirical_mean;
  double rel_frobenius_error = 0;
  double tolerance = 0;
  bool covariance_pass = false;
  std::vector<NormalityReport> component_normality;
  bool normality_pass = false;
  Eigen::MatrixXd samples;  // replicas x k, the sigma_N(T) draws
};

// Product initial condition: Sigma(0) is the multinomial covariance
// diag(nu0) - nu0 nu0^T. Requires at least 100 replicas.
CltReport clt_covariance_check(const FiniteModel& model, const Eigen::VectorXd& nu0, std::int64_t N,
                               int replicas, double T, double dt_limit, double tolerance,
                               std::uint64_t seed, int workers);

// Kernel-consistency verdicts for a model with linear kernel structure:
// averaging Gamma/Lambda over z ~ nu must reproduce gamma*a and lambda*b,
// and discrete samplers must pass chi-square goodness of fit.
struct ModelValidationReport {
  double max_gamma_residual = 0;   // |gamma a - sum_z nu(z) Gamma| on atoms
  double max_lambda_residual = 0;  // engine pair part vs Lambda
  double max_channel_residual = 0; // aggregate channel rate vs its formula
  double min_sampler_pvalue = 1;   // chi-square GOF over sampler draws
  bool pass = false;
  std::vector<std::string> failures;
};

ModelValidationReport validate_model_kernels(const FiniteModel& model, std::uint64_t seed,
                                             int probe_states = 8, int sampler_draws = 100000);

}  // namespace psim
