#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <psim/measure.hpp>
#include <psim/rng.hpp>

using namespace psim;

namespace {

AgentConfiguration labels_config(const TypeSpace& space, const std::vector<std::string>& names) {
  AgentConfiguration c;
  c.space = space;
  for (const auto& n : names) c.types.push_back(TypeValue(space.label_index(n)));
  return c;
}

}  // namespace

TEST_CASE("empirical measure basics") {
  const TypeSpace space = TypeSpace::finite({"a", "b"});

  auto all_a = empirical_measure(labels_config(space, {"a", "a", "a", "a", "a"}));
  CHECK(all_a.mass(TypeValue(0)) == 1.0);
  CHECK(all_a.mass(TypeValue(1)) == 0.0);

  auto half = empirical_measure(labels_config(space, {"a", "b"}));
  CHECK(half.mass(TypeValue(0)) == 0.5);
  CHECK(half.mass(TypeValue(1)) == 0.5);

  // Total mass is exactly 1: integer counts sum to N.
  RngStream rng(7, 1);
  for (int trial = 0; trial < 20; ++trial) {
    AgentConfiguration c;
    c.space = space;
    const int n = 1 + rng.uniform_int(40);
    for (int i = 0; i < n; ++i) c.types.push_back(TypeValue(rng.uniform_int(2)));
    auto m = empirical_measure(c);
    std::int64_t total = 0;
    for (auto v : m.counts()) total += v;
    CHECK(total == n);
    CHECK(pairing(m, TestFunction::constant(1.0)) == 1.0);

    // Exchangeability: permuting the configuration leaves the measure fixed.
    AgentConfiguration shuffled = c;
    for (int i = n - 1; i > 0; --i)
      std::swap(shuffled.types[static_cast<std::size_t>(i)],
                shuffled.types[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
    auto m2 = empirical_measure(shuffled);
    CHECK(m.counts() == m2.counts());
  }
}

TEST_CASE("pairing examples and linearity") {
  const TypeSpace space = TypeSpace::finite({"a", "b"});
  auto delta_a = empirical_measure(labels_config(space, {"a"}));
  CHECK(pairing(delta_a, TestFunction::indicator_label(space, "a")) == 1.0);

  auto uniform = empirical_measure(labels_config(space, {"a", "b"}));
  CHECK(pairing(uniform, TestFunction::constant(3.0)) == 3.0);

  // (1/2) delta_0 + (1/2) delta_2 against the identity monomial.
  AgentConfiguration real_cfg;
  real_cfg.space = TypeSpace::real_line(10.0);
  real_cfg.types = {TypeValue(0.0), TypeValue(2.0)};
  auto m = empirical_measure(real_cfg);
  CHECK(pairing(m, TestFunction::monomial(1, 0.0)) == doctest::Approx(1.0).epsilon(1e-15));

  // Linearity in phi.
  RngStream rng(11, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = rng.uniform01() * 4 - 2, b = rng.uniform01() * 4 - 2;
    const auto phi1 = TestFunction::cosine(1.3, 0.2);
    const auto phi2 = TestFunction::monomial(2, 0.5);
    double lhs = 0;
    for (const auto& [w, c] : m.support())
      lhs += static_cast<double>(c) / static_cast<double>(m.n_agents()) * (a * phi1(w) + b * phi2(w));
    const double rhs = a * pairing(m, phi1) + b * pairing(m, phi2);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }

  SignedMeasure signed_m;
  signed_m.atoms = {{TypeValue(0.0), 0.5}, {TypeValue(2.0), 0.5}};
  CHECK(pairing(signed_m, TestFunction::monomial(1, 0.0)) == doctest::Approx(1.0));
}

TEST_CASE("tv distance") {
  const TypeSpace space = TypeSpace::finite({"a", "b"});
  auto m1 = empirical_measure(labels_config(space, {"a", "a", "a", "b"}));
  CHECK(tv_distance(m1, m1) == 0.0);

  auto da = empirical_measure(labels_config(space, {"a"}));
  auto db = empirical_measure(labels_config(space, {"b"}));
  CHECK(tv_distance(da, db) == 1.0);

  auto p75 = empirical_measure(labels_config(space, {"a", "a", "a", "b"}));
  auto p25 = empirical_measure(labels_config(space, {"a", "b", "b", "b"}));
  CHECK(tv_distance(p75, p25) == doctest::Approx(0.5).epsilon(1e-15));

  const TypeSpace other = TypeSpace::finite({"x", "y"});
  auto mo = empirical_measure(labels_config(other, {"x"}));
  CHECK_THROWS_AS((void)tv_distance(m1, mo), ConfigError);

  // Triangle inequality on random probability vectors.
  RngStream rng(3, 9);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd p(3), q(3), r(3);
    for (int i = 0; i < 3; ++i) {
      p[i] = rng.uniform_pos();
      q[i] = rng.uniform_pos();
      r[i] = rng.uniform_pos();
    }
    p /= p.sum();
    q /= q.sum();
    r /= r.sum();
    CHECK(tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12);
  }
}

TEST_CASE("ks distance") {
  // Reference: uniform CDF on [0,1].
  const int g = 201;
  Eigen::VectorXd grid_x(g), grid_cdf(g);
  for (int i = 0; i < g; ++i) {
    grid_x[i] = static_cast<double>(i) / (g - 1);
    grid_cdf[i] = grid_x[i];
  }

  // Samples at the reference quantiles interleave the CDF.
  const int n = 100;
  std::vector<double> quantiles;
  for (int i = 0; i < n; ++i) quantiles.push_back((i + 0.5) / n);
  const double grid_err = 1.0 / (g - 1);
  CHECK(ks_distance(quantiles, grid_x, grid_cdf) <= 0.5 / n + grid_err + 1e-12);

  // Identical point mass vs a point-mass-like reference within one bin.
  Eigen::VectorXd step_cdf(g);
  for (int i = 0; i < g; ++i) step_cdf[i] = grid_x[i] < 0.5 ? 0.0 : 1.0;
  std::vector<double> point(50, 0.5);
  CHECK(ks_distance(point, grid_x, step_cdf) <= grid_err + 1e-12);

  // All mass left of the reference support.
  Eigen::VectorXd far_cdf = Eigen::VectorXd::Zero(g);
  std::vector<double> left(10, -5.0);
  CHECK(ks_distance(left, grid_x, far_cdf) == 1.0);

  CHECK_THROWS_AS((void)ks_distance(std::vector<double>{}, grid_x, grid_cdf), ConfigError);
}

TEST_CASE("lattice measures") {
  const TypeSpace space = TypeSpace::lattice(1);
  auto point = [](int x) {
    Eigen::VectorXi p(1);
    p << x;
    return TypeValue(p);
  };
  AgentConfiguration c;
  c.space = space;
  c.types = {point(0), point(2), point(2), point(5)};
  auto m = empirical_measure(c);
  CHECK(m.mass(point(2)) == 0.5);
  CHECK(m.mass(point(5)) == 0.25);
  CHECK(m.mass(point(1)) == 0.0);
  CHECK(pairing(m, TestFunction::monomial(1, 0.0)) == doctest::Approx(2.25));
  CHECK(pairing(m, TestFunction::constant(1.0)) == 1.0);

  AgentConfiguration c2 = c;
  c2.types[0] = point(1);
  CHECK(tv_distance(m, empirical_measure(c2)) == doctest::Approx(0.25));
}

TEST_CASE("type space and test function validation") {
  CHECK_THROWS_AS((void)TypeSpace::finite({}), ConfigError);
  CHECK_THROWS_AS((void)TypeSpace::finite({"a", "a"}), ConfigError);
  CHECK_THROWS_AS((void)TypeSpace::lattice(0), ConfigError);
  CHECK_THROWS_AS((void)TypeSpace::real_line(0.0), ConfigError);

  const TypeSpace space = TypeSpace::finite({"a", "b"});
  const auto ind = TestFunction::indicator_label(space, "b");
  CHECK(ind.at_label(1) == 1.0);
  CHECK(ind.at_label(0) == 0.0);
  CHECK(!TestFunction::monomial(2, 0.0).evaluable_on(space));

  // Lattice d=1 evaluates through the coordinate.
  Eigen::VectorXi pt(1);
  pt << 3;
  CHECK(TestFunction::monomial(2, 1.0)(TypeValue(pt)) == 4.0);
}
