#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "psim/engine.hpp"
#include "psim/limit_solver.hpp"
#include "psim/model.hpp"
#include "psim/test_function.hpp"

namespace psim {

// sigma_N(t)(phi) = sqrt(N) (<nu_N_t, phi> - <nu_t, phi>) for a test family,
// sampled on a time grid. The constant-function component is exactly zero
// (both measures are probability measures).
struct FluctuationSample {
  std::vector<double> times;
  Eigen::MatrixXd values;  // times x family
  std::int64_t n_agents = 0;
  std::uint64_t replica = 0;
};

FluctuationSample extract_fluctuations(const Trajectory<int>& traj, const LimitTrajectory& limit,
                                       const TestFamily& family, const std::vector<double>& times);

// Matrix-valued path on a time grid with linear interpolation.
struct MatrixPath {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> mats;
  Eigen::MatrixXd at(double t) const;
};

// Drift operator J[u] phi(z): the four averaged jump-kernel terms
//   int Gphi(w;z) u(dw) + int Gphi(z;x) u(dx)
//   + int int Lphi(w1,w2;z) u(dw2) u(dw1)
//   + int int [Lphi(z,w;x) + Lphi(w,z;x)] u(dw) u(dx)
// with Gphi(w;z) = int (phi(w') - phi(w)) Gamma(w,z,dw') and the analogous
// four-point difference for Lambda. Returns J phi on the atoms.
Eigen::VectorXd apply_drift_operator(const FiniteKernels& kernels, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& phi_vals);
Eigen::VectorXd apply_drift_operator(const FiniteKernels& kernels, const Eigen::VectorXd& u,
                                     const TestFunction& phi, const TypeSpace& space);

// A(t)_{ij} = (J[u_t] 1_{w_i})(w_j), so the fluctuation drift is F = A sigma.
// Columns sum to zero (J annihilates constants).
Eigen::MatrixXd drift_matrix_at(const FiniteKernels& kernels, const Eigen::VectorXd& u);
MatrixPath build_drift_matrix(const FiniteKernels& kernels, const LimitTrajectory& limit);

// G(t)_{ij}: instantaneous fluctuation covariance on indicator pairs,
// assembled jump by jump as weight * delta delta^T with delta the signed
// indicator change of the jump; symmetric PSD with zero row sums by
// construction, and entrywise equal to the covariance form on indicators.
Eigen::MatrixXd diffusion_matrix_at(const FiniteKernels& kernels, const Eigen::VectorXd& u);
MatrixPath build_diffusion_matrix(const FiniteKernels& kernels, const LimitTrajectory& limit);

// Symmetric PSD square root via eigendecomposition. Eigenvalues in
// [-1e-8, 0) are clamped to zero; anything lower is an error.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& G);

using MatrixFn = std::function<Eigen::MatrixXd(double)>;

MatrixFn drift_fn(std::shared_ptr<const FiniteKernels> kernels, const LimitTrajectory& limit);
MatrixFn diffusion_fn(std::shared_ptr<const FiniteKernels> kernels, const LimitTrajectory& limit);

// RK4 on the covariance equation Sigma' = A Sigma + Sigma A^T + G of the
// linear fluctuation SDE; output is symmetric PSD (to 1e-8) at every node.
MatrixPath solve_fluctuation_covariance(const MatrixFn& A, const MatrixFn& G,
                                        const Eigen::MatrixXd& sigma0, double T, double dt);

struct LimitSdePath {
  std::vector<double> times;
  Eigen::MatrixXd states;  // times x k
};

// Euler-Maruyama for d sigma = A(t) sigma dt + G(t)^{1/2} dB_t.
LimitSdePath simulate_limit_sde(const MatrixFn& A, const MatrixFn& G, const Eigen::VectorXd& sigma0,
                                double T, double dt, RngStream rng);

// Precomputed per-step coefficients for running many paths.
struct LinearSdeCoeffs {
  double dt = 0;
  std::vector<double> times;          // step start times
  std::vector<Eigen::MatrixXd> drift; // A(t_n)
  std::vector<Eigen::MatrixXd> noise; // G(t_n)^{1/2}
};

LinearSdeCoeffs prepare_sde_coeffs(const MatrixFn& A, const MatrixFn& G, double T, double dt);
Eigen::VectorXd em_final_state(const LinearSdeCoeffs& coeffs, Eigen::VectorXd sigma, RngStream& rng);

// Martingale part of <nu_N_t, phi>: the pairing minus its initial value and
// the exactly integrated drift along the piecewise-constant path.
struct MartingalePath {
  std::vector<double> times;  // 0, event times, T
  std::vector<double> values;
  double final_value() const { return values.back(); }
};

MartingalePath martingale_residual(const Trajectory<int>& traj, const FiniteModel& model,
                                   const TestFunction& phi);

// Realized quadratic variation: sum over events of the squared jump of
// <nu_N, phi>.
double realized_quadratic_variation(const Trajectory<int>& traj, const TestFunction& phi);

// Predictable quadratic covariation <M^{phi1}, M^{phi2}>_T: the 1/N-scaled
// squared-difference rate integrated exactly along the trajectory.
double predicted_qv_integral(const Trajectory<int>& traj, const FiniteModel& model,
                             const TestFunction& phi1, const TestFunction& phi2);

// Instantaneous fluctuation covariance C(phi1, phi2) for the percolation
// model at a density state: the pair-jump squared-difference form
// lambda * int int (2 phi1(x+y) - phi1(x) - phi1(y)) (same for phi2) g(x) g(y) dx dy.
double percolation_covariance_at(const DensityGrid& g, double lambda, const TestFunction& phi1,
                                 const TestFunction& phi2);

}  // namespace psim
