#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <psim/limit_solver.hpp>
#include <psim/rng.hpp>

using namespace psim;

namespace {

// Independent hand-coded right side of the OTC limit system: for each type,
// 2 beta u_hn u_lo + rho min(u_hn, u_lo) trade flow plus the intrinsic-type
// exchange terms.
Eigen::VectorXd otc_field_by_hand(double lu, double ld, double beta, double rho,
                                  const Eigen::VectorXd& u) {
  const double uho = u[0], uhn = u[1], ulo = u[2], uln = u[3];
  const double trade = 2 * beta * uhn * ulo + rho * std::min(uhn, ulo);
  Eigen::VectorXd f(4);
  f[0] = trade + lu * ulo - ld * uho;
  f[1] = -trade + lu * uln - ld * uhn;
  f[2] = -trade - lu * ulo + ld * uho;
  f[3] = trade - lu * uln + ld * uhn;
  return f;
}

FiniteModel sample_opinion() {
  return opinion_model(1.0, 1.5, {{0, 0.7, 0.3}, {0.2, 0, 0.8}, {0.6, 0.4, 0}},
                       {{0, 0.5, 0.5}, {0.9, 0, 0.1}, {0.3, 0.7, 0}}, 1);
}

Eigen::VectorXd random_simplex(int k, RngStream& rng) {
  Eigen::VectorXd u(k);
  for (int i = 0; i < k; ++i) u[i] = rng.uniform_pos();
  u /= u.sum();
  return u;
}

}  // namespace

TEST_CASE("zero rates freeze the limit") {
  FiniteKernels ker = FiniteKernels::zero(3, false);
  ker.gamma_entry(0, 0, 1) = 1e-300;  // keep the total rate positive but negligible
  auto m = custom_model(TypeSpace::finite({"a", "b", "c"}), ker);
  Eigen::VectorXd nu0(3);
  nu0 << 0.2, 0.3, 0.5;
  auto traj = solve_limit_finite(m, nu0, 1.0, 0.01);
  CHECK((traj.states.back() - nu0).cwiseAbs().maxCoeff() <= 1e-250);
}

TEST_CASE("otc field equals the hand-coded system") {
  const double lu = 0.8, ld = 1.3, beta = 0.9, rho = 1.4;
  auto m = otc_model(lu, ld, beta, rho);
  RngStream rng(41, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::VectorXd u = random_simplex(4, rng);
    const Eigen::VectorXd got = finite_limit_field(m, u);
    const Eigen::VectorXd want = otc_field_by_hand(lu, ld, beta, rho, u);
    CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(got.sum()) <= 1e-14);
  }
}

TEST_CASE("otc with beta=rho=0 reduces to the two-state chain") {
  const double lu = 1.0, ld = 1.0;
  auto m = otc_model(lu, ld, 0.0, 0.0);
  Eigen::VectorXd nu0(4);
  nu0 << 0.25, 0.25, 0.25, 0.25;
  const double T = 2.0;
  auto traj = solve_limit_finite(m, nu0, T, 1e-3);
  const double h0 = nu0[0] + nu0[1];
  const double hinf = lu / (lu + ld);
  for (std::size_t i = 0; i < traj.times.size(); i += 100) {
    const double t = traj.times[i];
    const double expect = hinf + (h0 - hinf) * std::exp(-(lu + ld) * t);
    const double got = traj.states[i][0] + traj.states[i][1];
    CHECK(got == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("mass conservation and simplex confinement") {
  auto m = sample_opinion();
  Eigen::VectorXd nu0(3);
  nu0 << 0.6, 0.3, 0.1;
  auto traj = solve_limit_finite(m, nu0, 3.0, 1e-3);
  for (std::size_t i = 0; i < traj.states.size(); i += 50) {
    CHECK(std::abs(traj.states[i].sum() - 1.0) <= 1e-12 * (1.0 + traj.times[i]));
    CHECK(traj.states[i].minCoeff() >= -1e-10);
  }
}

TEST_CASE("stationary states stay fixed") {
  // Symmetric opinion model: the uniform vector has zero field.
  auto m = opinion_model(1.0, 1.0, {{0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}},
                         {{0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}}, 1);
  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  CHECK(finite_limit_field(m, uniform).cwiseAbs().maxCoeff() <= 1e-15);
  auto traj = solve_limit_finite(m, uniform, 2.0, 1e-2);
  CHECK((traj.states.back() - uniform).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("rk4 refinement order on the finite system") {
  auto m = sample_opinion();
  Eigen::VectorXd nu0(3);
  nu0 << 0.5, 0.2, 0.3;
  const double T = 1.0;
  std::vector<double> dts = {0.2, 0.1, 0.05, 0.025};
  std::vector<double> errs;
  const Eigen::VectorXd ref = solve_limit_finite(m, nu0, T, 0.003125).states.back();
  for (double dt : dts)
    errs.push_back((solve_limit_finite(m, nu0, T, dt).states.back() - ref).norm());
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    const double slope = std::log2(errs[i] / errs[i + 1]);
    CHECK(slope >= 3.5);
  }
}

TEST_CASE("limit interpolation") {
  auto m = sample_opinion();
  Eigen::VectorXd nu0(3);
  nu0 << 0.5, 0.2, 0.3;
  auto traj = solve_limit_finite(m, nu0, 1.0, 0.125);
  CHECK((traj.at(0.25) - traj.states[2]).cwiseAbs().maxCoeff() == 0.0);  // exact at nodes
  const Eigen::VectorXd mid = traj.at(0.25 + 0.0625);
  CHECK((mid - 0.5 * (traj.states[2] + traj.states[3])).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS((void)traj.at(1.5), NumericsError);
  CHECK_THROWS_AS((void)traj.at(-0.2), NumericsError);
}

TEST_CASE("percolation density: lambda=0 freezes the density") {
  auto g0 = DensityGrid::gaussian(-8, 8, 256, 0.0, 0.5);
  auto sol = solve_percolation_density(g0, 0.0, 1.0, 0.01);
  CHECK((sol.states.back() - g0.values).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(sol.mass_leakage <= 1e-9);
}

TEST_CASE("percolation density: mean grows like exp(2 lambda t)") {
  const double lambda = 1.0, T = 1.0, m0 = 0.5;
  auto g0 = DensityGrid::gaussian(-8, 40, 3072, m0, 0.5);
  auto sol = solve_percolation_density(g0, lambda, T, 0.01);
  DensityGrid gT = sol.grid_at(T);
  CHECK(std::abs(gT.mean() - m0 * std::exp(2 * lambda * T)) <=
        0.01 * m0 * std::exp(2 * lambda * T));
  CHECK(sol.mass_leakage < 1e-3);
}

TEST_CASE("percolation density: delta-like initial keeps zero mean") {
  // Narrow symmetric gaussian about 0 on a symmetric grid: convolution keeps
  // the symmetry, so the mean stays at 0.
  auto g0 = DensityGrid::gaussian(-10, 10, 513, 0.0, 0.05);
  auto sol = solve_percolation_density(g0, 1.0, 0.5, 0.005);
  CHECK(std::abs(sol.grid_at(0.5).mean()) <= 1e-8);
}

TEST_CASE("direct and fft convolutions agree") {
  auto g0 = DensityGrid::gaussian(-6, 14, 512, 0.3, 0.5);
  const auto direct = self_convolution(g0.values, g0.dx(), g0.base_index(), false);
  const auto fast = self_convolution(g0.values, g0.dx(), g0.base_index(), true);
  CHECK((direct - fast).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("percolation guards") {
  auto g0 = DensityGrid::gaussian(-8, 8, 256, 0.0, 0.5);
  Eigen::VectorXd not_normalized = g0.values * 2.0;
  auto bad = DensityGrid::from_values(g0.lo, g0.hi, g0.n, not_normalized);
  CHECK_THROWS_AS((void)solve_percolation_density(bad, 1.0, 1.0, 0.01), ConfigError);

  // A clearly too-narrow grid leaks mass.
  auto narrow = DensityGrid::gaussian(-3, 3, 256, 0.0, 0.5);
  CHECK_THROWS_AS((void)solve_percolation_density(narrow, 1.0, 2.0, 0.01), NumericsError);
}
