#include "psim/limit_solver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "psim/rk4.hpp"

namespace psim {

namespace {

Eigen::VectorXd interp_states(const std::vector<double>& times,
                              const std::vector<Eigen::VectorXd>& states, double t) {
  if (times.empty()) throw NumericsError("interpolate: empty trajectory");
  const double tol = 1e-9 * std::max(1.0, std::abs(times.back()));
  if (t < times.front() - tol || t > times.back() + tol)
    throw NumericsError("interpolate: t outside [0,T]");
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it != times.end() && *it == t) return states[static_cast<std::size_t>(it - times.begin())];
  if (it == times.begin()) return states.front();
  if (it == times.end()) return states.back();
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const double t0 = times[hi - 1], t1 = times[hi];
  const double frac = (t - t0) / (t1 - t0);
  return (1.0 - frac) * states[hi - 1] + frac * states[hi];
}

}  // namespace

Eigen::VectorXd LimitTrajectory::at(double t) const { return interp_states(times, states, t); }

Eigen::VectorXd finite_limit_field(const FiniteModel& model, const Eigen::VectorXd& u) {
  const int k = static_cast<int>(u.size());
  const MassView nu(u.data(), k);
  Eigen::VectorXd field = Eigen::VectorXd::Zero(k);
  std::vector<double> aprob(static_cast<std::size_t>(k));

  for (int w = 0; w < k; ++w) {
    if (u[w] == 0) continue;
    const double g = model.gamma(w, nu);
    if (g == 0) continue;
    const double flow = g * u[w];
    field[w] -= flow;
    model.a_probs(w, nu, aprob.data());
    for (int wp = 0; wp < k; ++wp)
      if (aprob[static_cast<std::size_t>(wp)] != 0) field[wp] += flow * aprob[static_cast<std::size_t>(wp)];
  }

  if (model.has_pair_dynamics()) {
    std::vector<PairOutcome> outcomes;
    for (int w1 = 0; w1 < k; ++w1) {
      if (u[w1] == 0) continue;
      for (int w2 = 0; w2 < k; ++w2) {
        if (u[w2] == 0) continue;
        const double l = model.lambda(w1, w2, nu);
        if (l == 0) continue;
        const double flow = l * u[w1] * u[w2];
        field[w1] -= flow;
        field[w2] -= flow;
        model.b_support(w1, w2, nu, outcomes);
        for (const auto& oc : outcomes) {
          field[oc.w1_new] += flow * oc.prob;
          field[oc.w2_new] += flow * oc.prob;
        }
      }
    }
  }
  return field;
}

LimitTrajectory solve_limit_finite(const FiniteModel& model, const Eigen::VectorXd& nu0, double T,
                                   double dt) {
  if (!(dt > 0)) throw ConfigError("solve_limit_finite: dt must be > 0");
  if (T < 0) throw ConfigError("solve_limit_finite: T must be >= 0");
  if (nu0.size() != model.space.size())
    throw ConfigError("solve_limit_finite: nu0 does not match the space");
  if (nu0.minCoeff() < -1e-15 || std::abs(nu0.sum() - 1.0) > 1e-9)
    throw ConfigError("solve_limit_finite: nu0 must be a probability vector");

  LimitTrajectory traj;
  traj.space = model.space;
  traj.dt = dt;

  auto field = [&model](double, const Eigen::VectorXd& u) { return finite_limit_field(model, u); };
  rk4_integrate(field, Eigen::VectorXd(nu0), 0.0, T, dt, [&](double t, Eigen::VectorXd& u_ref) {
    Eigen::VectorXd& u = u_ref;
    const double min_entry = u.minCoeff();
    if (min_entry < -1e-10)
      throw NumericsError("solve_limit_finite: state left the simplex; reduce dt");
    if (min_entry < 0) {
      u = u.cwiseMax(0.0);
      u /= u.sum();
    }
    traj.times.push_back(t);
    traj.states.push_back(u);
  });
  return traj;
}

// ---------------------------------------------------------------------------
// Percolation density solver
// ---------------------------------------------------------------------------

DensityGrid DensityGrid::from_values(double lo, double hi, int n, Eigen::VectorXd values) {
  if (n < 8) throw ConfigError("DensityGrid: need at least 8 nodes");
  if (!(lo < hi)) throw ConfigError("DensityGrid: lo must be < hi");
  if (values.size() != n) throw ConfigError("DensityGrid: values size mismatch");
  DensityGrid g;
  const double dx = (hi - lo) / static_cast<double>(n - 1);
  const double snapped = static_cast<double>(std::lround(lo / dx)) * dx;
  g.lo = snapped;
  g.hi = snapped + static_cast<double>(n - 1) * dx;
  g.n = n;
  g.values = std::move(values);
  return g;
}

DensityGrid DensityGrid::gaussian(double lo, double hi, int n, double mean, double sd) {
  if (!(sd > 0)) throw ConfigError("DensityGrid: gaussian sd must be > 0");
  DensityGrid g = from_values(lo, hi, n, Eigen::VectorXd::Zero(n));
  const double norm = 1.0 / (sd * std::sqrt(2.0 * 3.14159265358979323846));
  for (int k = 0; k < n; ++k) {
    const double z = (g.node(k) - mean) / sd;
    g.values[k] = norm * std::exp(-0.5 * z * z);
  }
  return g;
}

Eigen::VectorXd DensityGrid::nodes() const {
  Eigen::VectorXd x(n);
  for (int k = 0; k < n; ++k) x[k] = node(k);
  return x;
}

double DensityGrid::integral() const {
  const double sum = values.sum() - 0.5 * (values[0] + values[n - 1]);
  return sum * dx();
}

double DensityGrid::mean() const {
  double acc = 0;
  for (int k = 0; k < n; ++k) {
    const double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
    acc += w * node(k) * values[k];
  }
  return acc * dx();
}

double DensityGrid::pairing(const TestFunction& phi) const {
  double acc = 0;
  for (int k = 0; k < n; ++k) {
    const double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
    acc += w * phi.at_scalar(node(k)) * values[k];
  }
  return acc * dx();
}

Eigen::VectorXd DensityGrid::cdf() const {
  Eigen::VectorXd out(n);
  double acc = 0;
  out[0] = 0;
  for (int k = 1; k < n; ++k) {
    acc += 0.5 * (values[k - 1] + values[k]) * dx();
    out[k] = std::min(1.0, std::max(0.0, acc));
  }
  return out;
}

namespace {

void fft_inplace(std::vector<std::complex<double>>& a, bool invert) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * 3.14159265358979323846 / static_cast<double>(len) * (invert ? -1 : 1);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const auto u = a[i + j];
        const auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (invert)
    for (auto& x : a) x /= static_cast<double>(n);
}

}  // namespace

Eigen::VectorXd self_convolution(const Eigen::VectorXd& g, double dx, long base, bool use_fft) {
  const int n = static_cast<int>(g.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (!use_fft) {
    // c_q = sum_j g_j g_{q-j}; the value at node k is dx * c_{k - base}.
    for (int k = 0; k < n; ++k) {
      const long q = static_cast<long>(k) - base;
      if (q < 0 || q > 2 * (n - 1)) continue;
      const int j_lo = static_cast<int>(std::max<long>(0, q - (n - 1)));
      const int j_hi = static_cast<int>(std::min<long>(n - 1, q));
      double acc = 0;
      for (int j = j_lo; j <= j_hi; ++j) acc += g[j] * g[static_cast<int>(q) - j];
      out[k] = acc * dx;
    }
    return out;
  }
  std::size_t size = 1;
  while (size < static_cast<std::size_t>(2 * n)) size <<= 1;
  std::vector<std::complex<double>> buf(size);
  for (int j = 0; j < n; ++j) buf[static_cast<std::size_t>(j)] = g[j];
  fft_inplace(buf, false);
  for (auto& x : buf) x *= x;
  fft_inplace(buf, true);
  for (int k = 0; k < n; ++k) {
    const long q = static_cast<long>(k) - base;
    if (q < 0 || q > 2 * (n - 1)) continue;
    out[k] = buf[static_cast<std::size_t>(q)].real() * dx;
  }
  return out;
}

DensitySolution solve_percolation_density(const DensityGrid& g0, double lambda, double T, double dt,
                                          double leakage_bound, bool use_fft) {
  if (!(dt > 0)) throw ConfigError("solve_percolation_density: dt must be > 0");
  if (T < 0) throw ConfigError("solve_percolation_density: T must be >= 0");
  if (!(lambda >= 0)) throw ConfigError("solve_percolation_density: lambda must be >= 0");
  if (std::abs(g0.integral() - 1.0) > 1e-6)
    throw ConfigError("solve_percolation_density: initial density must integrate to 1 within 1e-6");

  DensitySolution sol;
  sol.grid = g0;
  sol.lambda = lambda;

  const double dx = g0.dx();
  const long base = g0.base_index();
  auto field = [lambda, dx, base, use_fft](double, const Eigen::VectorXd& g) {
    Eigen::VectorXd conv = self_convolution(g, dx, base, use_fft);
    return Eigen::VectorXd(2.0 * lambda * (conv - g));
  };
  rk4_integrate(field, Eigen::VectorXd(g0.values), 0.0, T, dt, [&](double t, const Eigen::VectorXd& g) {
    sol.times.push_back(t);
    sol.states.push_back(g);
  });

  DensityGrid final_grid = g0;
  final_grid.values = sol.states.back();
  sol.mass_leakage = std::abs(1.0 - final_grid.integral());
  if (sol.mass_leakage > leakage_bound)
    throw NumericsError(
        "solve_percolation_density: mass leakage above bound; widen the grid [lo, hi]");
  return sol;
}

Eigen::VectorXd DensitySolution::at(double t) const { return interp_states(times, states, t); }

DensityGrid DensitySolution::grid_at(double t) const {
  DensityGrid g = grid;
  g.values = at(t);
  return g;
}

}  // namespace psim
