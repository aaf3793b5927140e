#pragma once

#include <cmath>
#include <cstdint>

namespace psim {

// Classical fourth-order Runge-Kutta step. Works for any state with vector
// arithmetic (Eigen vectors and matrices included); fixed step keeps results
// bit-reproducible across runs.
template <class State, class Field>
State rk4_step(const Field& f, double t, const State& y, double h) {
  const State k1 = f(t, y);
  const State k2 = f(t + 0.5 * h, State(y + (0.5 * h) * k1));
  const State k3 = f(t + 0.5 * h, State(y + (0.5 * h) * k2));
  const State k4 = f(t + h, State(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates y' = f(t, y) from t0 to t1 with fixed step dt (a shorter final
// step lands exactly on t1). The callback sees every node, t0 included.
template <class State, class Field, class Callback>
void rk4_integrate(const Field& f, State y, double t0, double t1, double dt, Callback&& on_node) {
  on_node(t0, y);
  if (t1 <= t0) return;
  const double span = t1 - t0;
  auto n_full = static_cast<std::int64_t>(std::floor(span / dt + 1e-9));
  double t = t0;
  for (std::int64_t i = 0; i < n_full; ++i) {
    y = rk4_step(f, t, y, dt);
    t = t0 + static_cast<double>(i + 1) * dt;
    on_node(t, y);
  }
  const double rem = t1 - t;
  if (rem > 1e-12 * dt) {
    y = rk4_step(f, t, y, rem);
    on_node(t1, y);
  }
}

}  // namespace psim
