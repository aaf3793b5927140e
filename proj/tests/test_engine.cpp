#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <psim/engine.hpp>
#include <psim/stats.hpp>

using namespace psim;

TEST_CASE("T=0 and absorbing configurations") {
  auto m = two_state_model(1.0, 0.5);
  const std::vector<int> init = {0, 0, 1};
  auto traj = run_trajectory(m, init, 0.0, RngStream(1, 0));
  CHECK(traj.events.empty());
  CHECK(traj.t_final == 0.0);

  // OTC with lambda_u = 0 and everyone at ln: nothing can ever fire.
  auto otc = otc_model(0.0, 1.0, 1.0, 1.0);
  const std::vector<int> all_ln(50, otc::ln);
  auto t2 = run_trajectory(otc, all_ln, 2.0, RngStream(3, 0));
  CHECK(t2.events.empty());
  CHECK(t2.candidate_count > 0);
}

TEST_CASE("zero total rate") {
  FiniteKernels ker = FiniteKernels::zero(2, false);
  auto m = custom_model(TypeSpace::finite({"x", "y"}), ker);
  const std::vector<int> init = {0, 1};
  // No candidate clocks at all: the run ends at T with just the initial state.
  auto traj = run_trajectory(m, init, 1.0, RngStream(1, 1));
  CHECK(traj.events.empty());
  CHECK(traj.candidate_count == 0);
  // Constructing a stepper with zero total rate is an error.
  CHECK_THROWS_AS(FiniteEngine(m, init, RngStream(1, 1)), ConfigError);
}

TEST_CASE("holding times are exponential at unit rate") {
  // Flip model, N=1: every candidate is accepted, so accepted holding times
  // are Exponential(1).
  auto m = two_state_model(1.0, 1.0);
  auto traj = run_trajectory(m, {0}, 10500.0, RngStream(17, 4));
  REQUIRE(traj.events.size() >= 10000);
  double sum = 0;
  double prev = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    sum += traj.events[static_cast<std::size_t>(i)].time - prev;
    prev = traj.events[static_cast<std::size_t>(i)].time;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 1.0) <= 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("two-state fraction matches the closed-form chain") {
  // Rates 1->2 at a, 2->1 at b; starting all in state 1 the fraction in
  // state 2 is p(t) = (a/(a+b)) (1 - exp(-(a+b) t)).
  const double a = 1.0, b = 0.5, T = 1.0;
  auto m = two_state_model(a, b);
  const int N = 1000;
  std::vector<int> init(N, 0);
  const auto counts = run_final_counts(m, init, T, RngStream(23, 1));
  const double p = a / (a + b) * (1 - std::exp(-(a + b) * T));
  const double se = std::sqrt(p * (1 - p) / N);
  CHECK(std::abs(static_cast<double>(counts[1]) / N - p) <= 3 * se);
}

TEST_CASE("exact mass and measure consistency along a trajectory") {
  auto otc = otc_model(1.0, 1.0, 1.0, 1.0);
  const int N = 200;
  std::vector<int> init;
  for (int i = 0; i < N; ++i) init.push_back(i % 4);

  FiniteEngine engine(otc, init, RngStream(5, 2));
  int accepted = 0;
  while (auto s = engine.step(1.0)) {
    std::int64_t total = 0;
    for (auto c : engine.counts()) total += c;
    REQUIRE(total == N);
    if (s->accepted) ++accepted;
  }
  CHECK(accepted > 0);
  CHECK(engine.counts() == counts_of(otc.space, engine.types()));
  CHECK(engine.time() == 1.0);
}

TEST_CASE("rate evaluations above the declared bound are hard errors") {
  auto m = two_state_model(1.0, 1.0);
  m.gamma = [](int, const MassView&) { return 5.0; };  // above gamma_bar = 1
  FiniteEngine engine(m, {0, 1, 0}, RngStream(13, 0));
  CHECK_THROWS_AS(
      [&] {
        while (engine.step(100.0)) {
        }
      }(),
      BoundViolation);

  auto otc = otc_model(1.0, 1.0, 1.0, 1.0);
  otc.channels[0].rate = [](const MassView&, std::int64_t n) { return static_cast<double>(n); };
  std::vector<int> init = {otc::hn, otc::lo, otc::ho, otc::ln};
  FiniteEngine engine2(otc, init, RngStream(13, 1));
  CHECK_THROWS_AS(
      [&] {
        while (engine2.step(100.0)) {
        }
      }(),
      BoundViolation);
}

TEST_CASE("event times are strictly increasing") {
  auto otc = otc_model(1.0, 1.0, 1.0, 1.0);
  std::vector<int> init;
  for (int i = 0; i < 100; ++i) init.push_back(i % 4);
  auto traj = run_trajectory(otc, init, 2.0, RngStream(14, 0));
  REQUIRE(traj.events.size() > 10);
  for (std::size_t i = 0; i + 1 < traj.events.size(); ++i)
    CHECK(traj.events[i].time < traj.events[i + 1].time);
}

TEST_CASE("trajectories are bit-reproducible") {
  auto otc = otc_model(1.0, 1.0, 1.0, 1.0);
  std::vector<int> init = {0, 1, 2, 3, 0, 1, 2, 3};
  auto t1 = run_trajectory(otc, init, 2.0, RngStream(77, 3));
  auto t2 = run_trajectory(otc, init, 2.0, RngStream(77, 3));
  CHECK(t1 == t2);
  auto t3 = run_trajectory(otc, init, 2.0, RngStream(78, 3));
  CHECK(!(t1 == t3));
}

TEST_CASE("candidate count matches the total rate") {
  auto m = two_state_model(1.0, 1.0);
  const int N = 100;
  const double T = 2.0;
  const std::vector<int> init(N, 0);
  const int reps = 200;
  double sum = 0;
  for (int r = 0; r < reps; ++r)
    sum += static_cast<double>(
        run_trajectory(m, init, T, RngStream(100, static_cast<std::uint64_t>(r))).candidate_count);
  const double expected = N * 1.0 * T;  // N gamma_bar T
  const double se = std::sqrt(expected / reps);
  CHECK(std::abs(sum / reps - expected) <= 3 * se);
}

TEST_CASE("event locality: pair events move two agents, type changes one") {
  auto otc = otc_model(0.0, 0.0, 1.0, 0.0);  // only direct trades
  std::vector<int> init = {otc::hn, otc::hn, otc::lo, otc::lo};
  auto traj = run_trajectory(otc, init, 4.0, RngStream(9, 9));
  for (const auto& e : traj.events) {
    CHECK(e.kind == EventKind::PairInteraction);
    CHECK(e.j >= 0);
    CHECK(e.i != e.j);
  }

  auto flip = two_state_model(1.0, 1.0);
  auto t2 = run_trajectory(flip, {0, 1, 0}, 3.0, RngStream(10, 0));
  for (const auto& e : t2.events) {
    CHECK(e.kind == EventKind::TypeChange);
    CHECK(e.j == -1);
    CHECK(e.before_i != e.after_i);
  }
}

TEST_CASE("marketmaker channel trades hn and lo") {
  auto otc = otc_model(0.0, 0.0, 0.0, 2.0);  // marketmaker only
  std::vector<int> init = {otc::hn, otc::hn, otc::lo, otc::lo, otc::ln, otc::ho};
  auto traj = run_trajectory(otc, init, 3.0, RngStream(12, 1));
  CHECK(!traj.events.empty());
  for (const auto& e : traj.events) {
    CHECK(e.kind == EventKind::Marketmaker);
    CHECK(e.before_i == otc::hn);
    CHECK(e.after_i == otc::ho);
    CHECK(e.before_j == otc::lo);
    CHECK(e.after_j == otc::ln);
  }
}

TEST_CASE("fleming-viot never occupies the absorbing state") {
  std::vector<std::vector<double>> Q = {
      {0, 0, 0, 0}, {0.3, -1.0, 0.5, 0.2}, {0.1, 0.4, -0.7, 0.2}, {0.2, 0.1, 0.3, -0.6}};
  auto m = fleming_viot_model(Q);
  std::vector<int> init = {0, 0, 1, 1, 2, 2, 0, 1};
  auto traj = run_trajectory(m, init, 5.0, RngStream(31, 2));
  CHECK(!traj.events.empty());
  std::vector<int> types = traj.initial;
  for (const auto& e : traj.events) {
    types[static_cast<std::size_t>(e.i)] = e.after_i;
    for (int t : types) {
      CHECK(t >= 0);
      CHECK(t < 3);
    }
  }
}

TEST_CASE("product initial sampling") {
  Eigen::VectorXd delta(2);
  delta << 1.0, 0.0;
  RngStream rng(55, 0);
  auto all_a = sample_product_labels(delta, 20, rng);
  for (int t : all_a) CHECK(t == 0);

  Eigen::VectorXd uniform(2);
  uniform << 0.5, 0.5;
  const int N = 10000;
  auto draw = sample_product_labels(uniform, N, rng);
  double frac = 0;
  for (int t : draw) frac += (t == 0);
  frac /= N;
  CHECK(std::abs(frac - 0.5) <= 4 * std::sqrt(0.25 / N));

  Eigen::VectorXd nu0(3);
  nu0 << 0.2, 0.5, 0.3;
  std::vector<std::int64_t> counts(3, 0);
  for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(
      sample_product_labels(nu0, 1, rng)[0])];
  CHECK(chi_square_gof(counts, nu0).p_value > 0.001);

  Eigen::VectorXd bad(2);
  bad << 0.6, 0.6;
  CHECK_THROWS_AS((void)sample_product_labels(bad, 5, rng), ConfigError);
}

TEST_CASE("percolation engine merges statistics") {
  auto m = info_percolation_model(1.0);
  // Two agents: the only possible event sets both to the sum.
  std::vector<double> init = {1.5, -0.5};
  auto traj = run_trajectory(m, init, 50.0, RngStream(2, 8));
  REQUIRE(!traj.events.empty());
  const auto& e = traj.events.front();
  CHECK(e.after_i == doctest::Approx(1.0));
  CHECK(e.after_j == doctest::Approx(1.0));

  for (const auto& ev : traj.events) CHECK(ev.i != ev.j);
}

TEST_CASE("oracle: zero rates give a constant trajectory") {
  FiniteKernels ker = FiniteKernels::zero(2, false);
  ker.gamma_entry(0, 0, 1) = 0.0;
  auto m = custom_model(TypeSpace::finite({"x", "y"}), ker);
  auto traj = oracle_discrete_time(m, {0, 1, 0}, 1.0, 1e-2, RngStream(1, 0));
  CHECK(traj.events.empty());
}

TEST_CASE("oracle: one-step transition probability is gamma dt") {
  const double a = 0.3, dt = 1e-2;
  auto m = two_state_model(a, 0.0);
  int flips = 0;
  const int runs = 100000;
  for (int r = 0; r < runs; ++r) {
    auto traj = oracle_discrete_time(m, {0}, dt, dt, RngStream(200, static_cast<std::uint64_t>(r)));
    flips += traj.events.empty() ? 0 : 1;
  }
  const double p = a * dt;
  const double se = std::sqrt(p * (1 - p) / runs);
  CHECK(std::abs(static_cast<double>(flips) / runs - p) <= 4 * se);
}

TEST_CASE("oracle dt guard") {
  auto m = two_state_model(5.0, 5.0);
  CHECK_THROWS_AS((void)oracle_discrete_time(m, std::vector<int>(100, 0), 1.0, 1e-2, RngStream(1, 0)),
                  ConfigError);
}

TEST_CASE("oracle agrees with the exact engine on end-state counts") {
  // Small version of the generator-equivalence gate (the acceptance suite
  // runs the full-size one).
  const double a = 1.0, b = 0.7, T = 0.5, dt = 2e-3;
  auto m = two_state_model(a, b);
  const std::vector<int> init = {0, 0, 1};
  const int runs = 20000;
  std::vector<std::int64_t> exact_profile(4, 0), oracle_profile(4, 0);
  for (int r = 0; r < runs; ++r) {
    const auto ce = run_final_counts(m, init, T, make_stream(301, static_cast<std::uint64_t>(r), RngPurpose::events));
    ++exact_profile[static_cast<std::size_t>(ce[0])];
    const auto to = oracle_discrete_time(m, init, T, dt,
                                         make_stream(302, static_cast<std::uint64_t>(r), RngPurpose::oracle));
    auto types = to.types_at_end();
    int zeros = 0;
    for (int t : types) zeros += (t == 0);
    ++oracle_profile[static_cast<std::size_t>(zeros)];
  }
  CHECK(chi_square_equality(exact_profile, oracle_profile).p_value > 0.001);
}
