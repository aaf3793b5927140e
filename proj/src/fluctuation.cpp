#include "psim/fluctuation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "psim/rk4.hpp"

namespace psim {

namespace {

Eigen::MatrixXd interp_mats(const std::vector<double>& times, const std::vector<Eigen::MatrixXd>& mats,
                            double t) {
  if (times.empty()) throw NumericsError("MatrixPath: empty path");
  const double tol = 1e-9 * std::max(1.0, std::abs(times.back()));
  if (t < times.front() - tol || t > times.back() + tol)
    throw NumericsError("MatrixPath: t outside the grid");
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it != times.end() && *it == t) return mats[static_cast<std::size_t>(it - times.begin())];
  if (it == times.begin()) return mats.front();
  if (it == times.end()) return mats.back();
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const double frac = (t - times[hi - 1]) / (times[hi] - times[hi - 1]);
  return (1.0 - frac) * mats[hi - 1] + frac * mats[hi];
}

}  // namespace

Eigen::MatrixXd MatrixPath::at(double t) const { return interp_mats(times, mats, t); }

FluctuationSample extract_fluctuations(const Trajectory<int>& traj, const LimitTrajectory& limit,
                                       const TestFamily& family, const std::vector<double>& times) {
  if (traj.space != limit.space) throw ConfigError("extract_fluctuations: trajectory and limit disagree on the space");
  for (double t : times)
    if (t < 0 || t > traj.t_final + 1e-12 || t > limit.t_final() + 1e-9)
      throw ConfigError("extract_fluctuations: time beyond the horizon");

  const int k = traj.space.size();
  const int m = static_cast<int>(family.size());
  Eigen::MatrixXd phi_vals(k, m);
  for (int f = 0; f < m; ++f) phi_vals.col(f) = family[static_cast<std::size_t>(f)].label_values(traj.space);

  const double n = static_cast<double>(traj.n_agents());
  const double sqrt_n = std::sqrt(n);

  FluctuationSample out;
  out.times = times;
  out.n_agents = traj.n_agents();
  out.values.resize(static_cast<Eigen::Index>(times.size()), m);

  const auto counts = counts_at_times(traj, times);
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const Eigen::VectorXd u = limit.at(times[ti]);
    Eigen::VectorXd emp(k);
    for (int i = 0; i < k; ++i)
      emp[i] = static_cast<double>(counts[ti][static_cast<std::size_t>(i)]) / n;
    for (int f = 0; f < m; ++f) {
      if (family[static_cast<std::size_t>(f)].is_constant()) {
        out.values(static_cast<Eigen::Index>(ti), f) = 0.0;  // both sides pair constants exactly
      } else {
        const double vn = emp.dot(phi_vals.col(f));
        const double vl = u.dot(phi_vals.col(f));
        out.values(static_cast<Eigen::Index>(ti), f) = sqrt_n * (vn - vl);
      }
    }
  }
  return out;
}

Eigen::VectorXd apply_drift_operator(const FiniteKernels& kernels, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& phi_vals) {
  const int k = kernels.k;
  if (u.size() != k || phi_vals.size() != k)
    throw ConfigError("apply_drift_operator: dimension mismatch");

  // Gphi(w; z) = sum_{w'} (phi(w') - phi(w)) Gamma(w, z, {w'})
  Eigen::MatrixXd gphi = Eigen::MatrixXd::Zero(k, k);
  for (int w = 0; w < k; ++w)
    for (int z = 0; z < k; ++z) {
      double acc = 0;
      for (int wp = 0; wp < k; ++wp) {
        const double g = kernels.gamma_entry(w, z, wp);
        if (g != 0) acc += (phi_vals[wp] - phi_vals[w]) * g;
      }
      gphi(w, z) = acc;
    }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
  for (int z = 0; z < k; ++z) {
    double t1 = 0, t2 = 0;
    for (int w = 0; w < k; ++w) {
      t1 += u[w] * gphi(w, z);
      t2 += u[w] * gphi(z, w);
    }
    out[z] = t1 + t2;
  }

  if (kernels.has_lambda()) {
    // Lphi(w1, w2; z) = sum (phi(w1') + phi(w2') - phi(w1) - phi(w2)) Lambda(...)
    std::vector<double> lphi(static_cast<std::size_t>(k) * k * k, 0.0);
    for (int w1 = 0; w1 < k; ++w1)
      for (int w2 = 0; w2 < k; ++w2)
        for (int z = 0; z < k; ++z) {
          double acc = 0;
          for (int w1p = 0; w1p < k; ++w1p)
            for (int w2p = 0; w2p < k; ++w2p) {
              const double l = kernels.lambda_entry(w1, w2, z, w1p, w2p);
              if (l != 0) acc += (phi_vals[w1p] + phi_vals[w2p] - phi_vals[w1] - phi_vals[w2]) * l;
            }
          lphi[(static_cast<std::size_t>(w1) * k + w2) * k + z] = acc;
        }
    auto L = [&lphi, k](int w1, int w2, int z) {
      return lphi[(static_cast<std::size_t>(w1) * k + w2) * k + z];
    };
    for (int z = 0; z < k; ++z) {
      double t3 = 0, t4 = 0;
      for (int w1 = 0; w1 < k; ++w1)
        for (int w2 = 0; w2 < k; ++w2) t3 += u[w1] * u[w2] * L(w1, w2, z);
      for (int x = 0; x < k; ++x)
        for (int w = 0; w < k; ++w) t4 += u[x] * u[w] * (L(z, w, x) + L(w, z, x));
      out[z] += t3 + t4;
    }
  }
  return out;
}

Eigen::VectorXd apply_drift_operator(const FiniteKernels& kernels, const Eigen::VectorXd& u,
                                     const TestFunction& phi, const TypeSpace& space) {
  return apply_drift_operator(kernels, u, phi.label_values(space));
}

Eigen::MatrixXd drift_matrix_at(const FiniteKernels& kernels, const Eigen::VectorXd& u) {
  const int k = kernels.k;
  Eigen::MatrixXd A(k, k);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd indicator = Eigen::VectorXd::Zero(k);
    indicator[i] = 1.0;
    A.row(i) = apply_drift_operator(kernels, u, indicator).transpose();
  }
  return A;
}

Eigen::MatrixXd diffusion_matrix_at(const FiniteKernels& kernels, const Eigen::VectorXd& u) {
  const int k = kernels.k;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(k, k);
  for (int w = 0; w < k; ++w)
    for (int z = 0; z < k; ++z) {
      const double uu = u[w] * u[z];
      if (uu == 0) continue;
      for (int wp = 0; wp < k; ++wp) {
        if (wp == w) continue;  // null jumps contribute nothing
        const double rate = kernels.gamma_entry(w, z, wp) * uu;
        if (rate == 0) continue;
        G(w, w) += rate;
        G(wp, wp) += rate;
        G(w, wp) -= rate;
        G(wp, w) -= rate;
      }
    }
  if (kernels.has_lambda()) {
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(k);
    for (int w1 = 0; w1 < k; ++w1)
      for (int w2 = 0; w2 < k; ++w2)
        for (int z = 0; z < k; ++z) {
          const double uuu = u[w1] * u[w2] * u[z];
          if (uuu == 0) continue;
          for (int w1p = 0; w1p < k; ++w1p)
            for (int w2p = 0; w2p < k; ++w2p) {
              const double rate = kernels.lambda_entry(w1, w2, z, w1p, w2p) * uuu;
              if (rate == 0) continue;
              delta.setZero();
              delta[w1p] += 1;
              delta[w2p] += 1;
              delta[w1] -= 1;
              delta[w2] -= 1;
              G.noalias() += rate * delta * delta.transpose();
            }
        }
  }
  return G;
}

MatrixPath build_drift_matrix(const FiniteKernels& kernels, const LimitTrajectory& limit) {
  MatrixPath p;
  p.times = limit.times;
  p.mats.reserve(limit.states.size());
  for (const auto& u : limit.states) p.mats.push_back(drift_matrix_at(kernels, u));
  return p;
}

MatrixPath build_diffusion_matrix(const FiniteKernels& kernels, const LimitTrajectory& limit) {
  MatrixPath p;
  p.times = limit.times;
  p.mats.reserve(limit.states.size());
  for (const auto& u : limit.states) p.mats.push_back(diffusion_matrix_at(kernels, u));
  return p;
}

MatrixFn drift_fn(std::shared_ptr<const FiniteKernels> kernels, const LimitTrajectory& limit) {
  auto lim = std::make_shared<LimitTrajectory>(limit);
  return [kernels, lim](double t) { return drift_matrix_at(*kernels, lim->at(t)); };
}

MatrixFn diffusion_fn(std::shared_ptr<const FiniteKernels> kernels, const LimitTrajectory& limit) {
  auto lim = std::make_shared<LimitTrajectory>(limit);
  return [kernels, lim](double t) { return diffusion_matrix_at(*kernels, lim->at(t)); };
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& G) {
  if (G.rows() != G.cols()) throw ConfigError("psd_sqrt: matrix must be square");
  const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
  if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ConfigError("psd_sqrt: matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-8) throw NumericsError("psd_sqrt: matrix is not positive semidefinite");
    ev[i] = ev[i] < 0 ? 0.0 : ev[i];
  }
  const Eigen::MatrixXd S =
      es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (S + S.transpose());
}

MatrixPath solve_fluctuation_covariance(const MatrixFn& A, const MatrixFn& G,
                                        const Eigen::MatrixXd& sigma0, double T, double dt) {
  if (!(dt > 0)) throw ConfigError("solve_fluctuation_covariance: dt must be > 0");
  const double scale0 = std::max(1.0, sigma0.cwiseAbs().maxCoeff());
  if ((sigma0 - sigma0.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale0)
    throw ConfigError("solve_fluctuation_covariance: Sigma0 must be symmetric");

  auto field = [&A, &G](double t, const Eigen::MatrixXd& S) {
    const Eigen::MatrixXd At = A(t);
    return Eigen::MatrixXd(At * S + S * At.transpose() + G(t));
  };
  MatrixPath path;
  rk4_integrate(field, Eigen::MatrixXd(sigma0), 0.0, T, dt, [&](double t, Eigen::MatrixXd& S) {
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8)
      throw NumericsError("solve_fluctuation_covariance: PSD violated; reduce dt");
    path.times.push_back(t);
    path.mats.push_back(S);
  });
  return path;
}

LinearSdeCoeffs prepare_sde_coeffs(const MatrixFn& A, const MatrixFn& G, double T, double dt) {
  if (!(dt > 0)) throw ConfigError("simulate_limit_sde: dt must be > 0");
  LinearSdeCoeffs c;
  c.dt = dt;
  const auto n_steps = static_cast<std::int64_t>(std::ceil(T / dt - 1e-9));
  for (std::int64_t i = 0; i < n_steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    c.times.push_back(t);
    c.drift.push_back(A(t));
    c.noise.push_back(psd_sqrt(G(t)));
  }
  return c;
}

Eigen::VectorXd em_final_state(const LinearSdeCoeffs& coeffs, Eigen::VectorXd sigma, RngStream& rng) {
  const double sqrt_dt = std::sqrt(coeffs.dt);
  const Eigen::Index k = sigma.size();
  Eigen::VectorXd xi(k);
  for (std::size_t n = 0; n < coeffs.times.size(); ++n) {
    for (Eigen::Index i = 0; i < k; ++i) xi[i] = rng.normal();
    sigma += coeffs.dt * (coeffs.drift[n] * sigma) + sqrt_dt * (coeffs.noise[n] * xi);
  }
  return sigma;
}

LimitSdePath simulate_limit_sde(const MatrixFn& A, const MatrixFn& G, const Eigen::VectorXd& sigma0,
                                double T, double dt, RngStream rng) {
  const LinearSdeCoeffs coeffs = prepare_sde_coeffs(A, G, T, dt);
  const Eigen::Index k = sigma0.size();
  LimitSdePath path;
  path.times.resize(coeffs.times.size() + 1);
  path.states.resize(static_cast<Eigen::Index>(coeffs.times.size()) + 1, k);
  Eigen::VectorXd sigma = sigma0;
  path.times[0] = 0;
  path.states.row(0) = sigma.transpose();
  const double sqrt_dt = std::sqrt(dt);
  Eigen::VectorXd xi(k);
  for (std::size_t n = 0; n < coeffs.times.size(); ++n) {
    for (Eigen::Index i = 0; i < k; ++i) xi[i] = rng.normal();
    sigma += dt * (coeffs.drift[n] * sigma) + sqrt_dt * (coeffs.noise[n] * xi);
    path.times[n + 1] = coeffs.times[n] + dt;
    path.states.row(static_cast<Eigen::Index>(n) + 1) = sigma.transpose();
  }
  return path;
}

namespace {

// Drift of <nu, phi> under the model rates at a fixed finite state.
double pairing_drift(const FiniteModel& model, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& phi_vals, std::vector<double>& aprob,
                     std::vector<PairOutcome>& outcomes) {
  const int k = static_cast<int>(u.size());
  const MassView nu(u.data(), k);
  double acc = 0;
  for (int w = 0; w < k; ++w) {
    if (u[w] == 0) continue;
    const double g = model.gamma(w, nu);
    if (g == 0) continue;
    model.a_probs(w, nu, aprob.data());
    double inner = 0;
    for (int wp = 0; wp < k; ++wp)
      if (aprob[static_cast<std::size_t>(wp)] != 0)
        inner += aprob[static_cast<std::size_t>(wp)] * (phi_vals[wp] - phi_vals[w]);
    acc += u[w] * g * inner;
  }
  if (model.has_pair_dynamics()) {
    for (int w1 = 0; w1 < k; ++w1) {
      if (u[w1] == 0) continue;
      for (int w2 = 0; w2 < k; ++w2) {
        if (u[w2] == 0) continue;
        const double l = model.lambda(w1, w2, nu);
        if (l == 0) continue;
        model.b_support(w1, w2, nu, outcomes);
        double inner = 0;
        for (const auto& oc : outcomes)
          inner += oc.prob * (phi_vals[oc.w1_new] + phi_vals[oc.w2_new] - phi_vals[w1] - phi_vals[w2]);
        acc += u[w1] * u[w2] * l * inner;
      }
    }
  }
  return acc;
}

// Squared-difference rate of eq. <M,M>: same loops with products of phi
// differences; carries the 1/N factor of the predictable covariation.
double qv_rate(const FiniteModel& model, const Eigen::VectorXd& u, const Eigen::VectorXd& p1,
               const Eigen::VectorXd& p2, std::vector<double>& aprob,
               std::vector<PairOutcome>& outcomes) {
  const int k = static_cast<int>(u.size());
  const MassView nu(u.data(), k);
  double acc = 0;
  for (int w = 0; w < k; ++w) {
    if (u[w] == 0) continue;
    const double g = model.gamma(w, nu);
    if (g == 0) continue;
    model.a_probs(w, nu, aprob.data());
    double inner = 0;
    for (int wp = 0; wp < k; ++wp)
      if (aprob[static_cast<std::size_t>(wp)] != 0)
        inner += aprob[static_cast<std::size_t>(wp)] * (p1[wp] - p1[w]) * (p2[wp] - p2[w]);
    acc += u[w] * g * inner;
  }
  if (model.has_pair_dynamics()) {
    for (int w1 = 0; w1 < k; ++w1) {
      if (u[w1] == 0) continue;
      for (int w2 = 0; w2 < k; ++w2) {
        if (u[w2] == 0) continue;
        const double l = model.lambda(w1, w2, nu);
        if (l == 0) continue;
        model.b_support(w1, w2, nu, outcomes);
        double inner = 0;
        for (const auto& oc : outcomes)
          inner += oc.prob * (p1[oc.w1_new] + p1[oc.w2_new] - p1[w1] - p1[w2]) *
                   (p2[oc.w1_new] + p2[oc.w2_new] - p2[w1] - p2[w2]);
        acc += u[w1] * u[w2] * l * inner;
      }
    }
  }
  return acc;
}

}  // namespace

MartingalePath martingale_residual(const Trajectory<int>& traj, const FiniteModel& model,
                                   const TestFunction& phi) {
  const int k = traj.space.size();
  const Eigen::VectorXd phi_vals = phi.label_values(traj.space);
  const double n = static_cast<double>(traj.n_agents());

  std::vector<std::int64_t> counts = counts_of(traj.space, traj.initial);
  auto to_probs = [&counts, k, n]() {
    Eigen::VectorXd u(k);
    for (int i = 0; i < k; ++i) u[i] = static_cast<double>(counts[static_cast<std::size_t>(i)]) / n;
    return u;
  };

  std::vector<double> aprob(static_cast<std::size_t>(k));
  std::vector<PairOutcome> outcomes;

  Eigen::VectorXd u = to_probs();
  const double pairing0 = u.dot(phi_vals);
  double integral = 0;
  double t_prev = 0;

  MartingalePath path;
  path.times.push_back(0.0);
  path.values.push_back(0.0);

  for (const auto& e : traj.events) {
    integral += pairing_drift(model, u, phi_vals, aprob, outcomes) * (e.time - t_prev);
    --counts[static_cast<std::size_t>(e.before_i)];
    ++counts[static_cast<std::size_t>(e.after_i)];
    if (e.j >= 0) {
      --counts[static_cast<std::size_t>(e.before_j)];
      ++counts[static_cast<std::size_t>(e.after_j)];
    }
    u = to_probs();
    t_prev = e.time;
    path.times.push_back(e.time);
    path.values.push_back(u.dot(phi_vals) - pairing0 - integral);
  }
  integral += pairing_drift(model, u, phi_vals, aprob, outcomes) * (traj.t_final - t_prev);
  path.times.push_back(traj.t_final);
  path.values.push_back(u.dot(phi_vals) - pairing0 - integral);
  return path;
}

double realized_quadratic_variation(const Trajectory<int>& traj, const TestFunction& phi) {
  const Eigen::VectorXd phi_vals = phi.label_values(traj.space);
  const double n = static_cast<double>(traj.n_agents());
  double acc = 0;
  for (const auto& e : traj.events) {
    double jump = phi_vals[e.after_i] - phi_vals[e.before_i];
    if (e.j >= 0) jump += phi_vals[e.after_j] - phi_vals[e.before_j];
    jump /= n;
    acc += jump * jump;
  }
  return acc;
}

double predicted_qv_integral(const Trajectory<int>& traj, const FiniteModel& model,
                             const TestFunction& phi1, const TestFunction& phi2) {
  const int k = traj.space.size();
  const Eigen::VectorXd p1 = phi1.label_values(traj.space);
  const Eigen::VectorXd p2 = phi2.label_values(traj.space);
  const double n = static_cast<double>(traj.n_agents());

  std::vector<std::int64_t> counts = counts_of(traj.space, traj.initial);
  std::vector<double> aprob(static_cast<std::size_t>(k));
  std::vector<PairOutcome> outcomes;

  auto to_probs = [&counts, k, n]() {
    Eigen::VectorXd u(k);
    for (int i = 0; i < k; ++i) u[i] = static_cast<double>(counts[static_cast<std::size_t>(i)]) / n;
    return u;
  };

  Eigen::VectorXd u = to_probs();
  double integral = 0;
  double t_prev = 0;
  for (const auto& e : traj.events) {
    integral += qv_rate(model, u, p1, p2, aprob, outcomes) * (e.time - t_prev);
    --counts[static_cast<std::size_t>(e.before_i)];
    ++counts[static_cast<std::size_t>(e.after_i)];
    if (e.j >= 0) {
      --counts[static_cast<std::size_t>(e.before_j)];
      ++counts[static_cast<std::size_t>(e.after_j)];
    }
    u = to_probs();
    t_prev = e.time;
  }
  integral += qv_rate(model, u, p1, p2, aprob, outcomes) * (traj.t_final - t_prev);
  return integral / n;
}

double percolation_covariance_at(const DensityGrid& g, double lambda, const TestFunction& phi1,
                                 const TestFunction& phi2) {
  const int n = g.n;
  const double dx = g.dx();
  Eigen::VectorXd v1(n), v2(n), w(n);
  for (int i = 0; i < n; ++i) {
    v1[i] = phi1.at_scalar(g.node(i));
    v2[i] = phi2.at_scalar(g.node(i));
    w[i] = (i == 0 || i == n - 1) ? 0.5 : 1.0;
  }
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    if (g.values[i] == 0) continue;
    for (int j = 0; j < n; ++j) {
      if (g.values[j] == 0) continue;
      const double s = g.node(i) + g.node(j);
      const double d1 = 2.0 * phi1.at_scalar(s) - v1[i] - v1[j];
      const double d2 = 2.0 * phi2.at_scalar(s) - v2[i] - v2[j];
      acc += w[i] * w[j] * d1 * d2 * g.values[i] * g.values[j];
    }
  }
  return lambda * acc * dx * dx;
}

}  // namespace psim
