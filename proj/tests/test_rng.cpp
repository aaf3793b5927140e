#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <psim/rng.hpp>
#include <psim/stats.hpp>

using namespace psim;

TEST_CASE("streams are deterministic and independent") {
  RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool all_equal = true, c_differs = false, d_differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next_u64();
    if (va != b.next_u64()) all_equal = false;
    if (va != c.next_u64()) c_differs = true;
    if (va != d.next_u64()) d_differs = true;
  }
  CHECK(all_equal);
  CHECK(c_differs);
  CHECK(d_differs);
}

TEST_CASE("uniform01 is uniform") {
  RngStream rng(123, 0);
  const int n = 100000;
  std::vector<std::int64_t> bins(100, 0);
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    ++bins[static_cast<std::size_t>(u * 100)];
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  const auto gof = chi_square_gof(bins, Eigen::VectorXd::Constant(100, 0.01));
  CHECK(gof.p_value > 0.001);
}

TEST_CASE("normal and exponential moments") {
  RngStream rng(5, 1);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));

  double se = 0;
  for (int i = 0; i < n; ++i) se += rng.exponential(2.0);
  CHECK(std::abs(se / n - 0.5) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("uniform_below is unbiased") {
  RngStream rng(9, 2);
  std::vector<std::int64_t> bins(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++bins[rng.uniform_below(7)];
  const auto gof = chi_square_gof(bins, Eigen::VectorXd::Constant(7, 1.0 / 7.0));
  CHECK(gof.p_value > 0.001);
}
