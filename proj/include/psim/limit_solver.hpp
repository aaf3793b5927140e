#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "psim/model.hpp"
#include "psim/test_function.hpp"
#include "psim/types.hpp"

namespace psim {

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic limit path nu_t on a fixed time grid (finite type space:
// states are probability vectors over the atoms).
struct LimitTrajectory {
  TypeSpace space;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  double dt = 0;

  double t_final() const { return times.empty() ? 0.0 : times.back(); }
  // Linear interpolation between bracketing nodes; exact at nodes.
  Eigen::VectorXd at(double t) const;
};

inline Eigen::VectorXd interpolate_limit(const LimitTrajectory& traj, double t) { return traj.at(t); }

// Right side of the per-atom limit system at state u: outflow through gamma
// and both lambda orderings, inflow through a and through both marginals of
// b. Sums to zero analytically, so mass is conserved.
Eigen::VectorXd finite_limit_field(const FiniteModel& model, const Eigen::VectorXd& u);

LimitTrajectory solve_limit_finite(const FiniteModel& model, const Eigen::VectorXd& nu0, double T,
                                   double dt);

// Uniform grid of density samples: nodes lo + k*dx, k = 0..n-1, with
// dx = (hi-lo)/(n-1). lo is snapped to an integer multiple of dx so that
// differences of nodes are again nodes (needed by the discrete convolution).
struct DensityGrid {
  double lo = 0, hi = 0;
  int n = 0;
  Eigen::VectorXd values;

  static DensityGrid from_values(double lo, double hi, int n, Eigen::VectorXd values);
  static DensityGrid gaussian(double lo, double hi, int n, double mean, double sd);

  double dx() const { return (hi - lo) / static_cast<double>(n - 1); }
  double node(int k) const { return lo + static_cast<double>(k) * dx(); }
  long base_index() const { return std::lround(lo / dx()); }
  Eigen::VectorXd nodes() const;

  double integral() const;                       // trapezoid
  double mean() const;                           // trapezoid of x g(x)
  Eigen::VectorXd cdf() const;                   // trapezoid cumulative, clamped to [0,1]
  double pairing(const TestFunction& phi) const; // trapezoid of phi g
};

// Discrete self-convolution (g*g)(x_k) = sum_j g(x_j) g(x_k - x_j) dx with
// support truncated to the grid. `base` = lo/dx of the grid.
Eigen::VectorXd self_convolution(const Eigen::VectorXd& g, double dx, long base, bool use_fft = false);

struct DensitySolution {
  DensityGrid grid;  // geometry; `values` holds the initial density
  double lambda = 0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  double mass_leakage = 0;  // |1 - integral of g_T|

  Eigen::VectorXd at(double t) const;
  DensityGrid grid_at(double t) const;
};

// Integrates g' = -2 lambda g + 2 lambda (g*g) with RK4. Fails if the final
// mass leaks by more than `leakage_bound` (the grid is then too narrow).
DensitySolution solve_percolation_density(const DensityGrid& g0, double lambda, double T, double dt,
                                          double leakage_bound = 1e-3, bool use_fft = false);

}  // namespace psim
