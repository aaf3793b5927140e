#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "psim/rng.hpp"
#include "psim/types.hpp"

namespace psim {

// Read-only view of the probability masses nu({w_i}) on a finite space,
// backed either by exact agent counts or by a dense limit state.
class MassView {
 public:
  MassView(const std::int64_t* counts, int k, std::int64_t n)
      : counts_(counts), probs_(nullptr), k_(k), n_(n) {}
  MassView(const double* probs, int k) : counts_(nullptr), probs_(probs), k_(k), n_(0) {}

  double operator[](int i) const {
    return counts_ ? static_cast<double>(counts_[i]) / static_cast<double>(n_) : probs_[i];
  }
  int size() const { return k_; }

 private:
  const std::int64_t* counts_;
  const double* probs_;
  int k_;
  std::int64_t n_;
};

struct PairOutcome {
  int w1_new;
  int w2_new;
  double prob;
};

// Linear jump-kernel families: gamma(w,nu) a(w,nu,dw') = sum_z nu(z) Gamma(w,z,dw')
// and lambda(w1,w2,nu) b(...) = sum_z nu(z) Lambda(w1,w2,z,...). Stored as dense
// tables over a finite space; Lambda may be absent (pure type-change models).
struct FiniteKernels {
  int k = 0;
  std::vector<double> gamma_tbl;   // [w][z][w'], size k^3
  std::vector<double> lambda_tbl;  // [w1][w2][z][w1'][w2'], size k^5; empty if none

  double gamma_entry(int w, int z, int wp) const { return gamma_tbl[(static_cast<std::size_t>(w) * k + z) * k + wp]; }
  double& gamma_entry(int w, int z, int wp) { return gamma_tbl[(static_cast<std::size_t>(w) * k + z) * k + wp]; }

  double lambda_entry(int w1, int w2, int z, int w1p, int w2p) const {
    return lambda_tbl[(((static_cast<std::size_t>(w1) * k + w2) * k + z) * k + w1p) * k + w2p];
  }
  double& lambda_entry(int w1, int w2, int z, int w1p, int w2p) {
    return lambda_tbl[(((static_cast<std::size_t>(w1) * k + w2) * k + z) * k + w1p) * k + w2p];
  }

  bool has_lambda() const { return !lambda_tbl.empty(); }

  double gamma_mass(int w, int z) const {
    double m = 0;
    for (int wp = 0; wp < k; ++wp) m += gamma_entry(w, z, wp);
    return m;
  }
  double lambda_mass(int w1, int w2, int z) const {
    if (!has_lambda()) return 0;
    double m = 0;
    for (int w1p = 0; w1p < k; ++w1p)
      for (int w2p = 0; w2p < k; ++w2p) m += lambda_entry(w1, w2, z, w1p, w2p);
    return m;
  }

  static FiniteKernels zero(int k, bool with_lambda) {
    FiniteKernels ker;
    ker.k = k;
    ker.gamma_tbl.assign(static_cast<std::size_t>(k) * k * k, 0.0);
    if (with_lambda)
      ker.lambda_tbl.assign(static_cast<std::size_t>(k) * k * k * k * k, 0.0);
    return ker;
  }

  void validate(double gamma_bar, double lambda_bar) const;
};

// A global Poisson clock with state-dependent rate, realizing interactions
// whose per-pair rate has no finite bound (the OTC marketmaker term). The
// move names two source labels; the engine picks one agent of each uniformly.
struct ChannelMove {
  int from1, to1;
  int from2, to2;
};

struct AggregateChannel {
  std::string name;
  std::function<double(const MassView&, std::int64_t n_agents)> rate;        // R_c(nu) <= bound
  std::function<double(std::int64_t n_agents)> rate_bound;                   // constant in nu
  std::function<ChannelMove(const MassView&, RngStream&)> sample_move;
};

// Declarative model over a finite type space.
//
// `gamma`, `a_probs`, `lambda`, `b_support` are the mathematical rates of the
// process (lambda is the per-ordered-pair rate multiplied by N, i.e. the rate
// density against nu x nu). The engine realization splits the pair dynamics
// into a thinned part `lambda_engine` (bounded by lambda_bar) plus aggregate
// channels; together they must reproduce `lambda`/`b_support` in law.
struct FiniteModel {
  TypeSpace space;
  double gamma_bar = 0;
  double lambda_bar = 0;

  std::function<double(int w, const MassView&)> gamma;
  std::function<void(int w, const MassView&, double* probs_out)> a_probs;  // k entries, sums to 1
  std::function<double(int w1, int w2, const MassView&)> lambda;           // full mathematical rate
  std::function<double(int w1, int w2, const MassView&)> lambda_engine;    // thinned part, <= lambda_bar
  std::function<void(int w1, int w2, const MassView&, std::vector<PairOutcome>&)> b_support;

  std::vector<AggregateChannel> channels;
  std::shared_ptr<const FiniteKernels> kernels;  // linear structure, when the model has one

  std::string name;

  int n_labels() const { return space.size(); }
  bool has_pair_dynamics() const { return lambda_bar > 0 || !channels.empty(); }

  // Derives the mathematical rate functions from dense kernel tables.
  static FiniteModel from_kernels(TypeSpace space, FiniteKernels kernels, std::string name,
                                  double gamma_bar_hint = -1, double lambda_bar_hint = -1);
};

// Pairwise-additive model on W = R: gamma == 0, constant meeting rate, and
// both agents adopt the sum of their statistics.
struct PercolationModel {
  TypeSpace space;  // RealLine
  double meeting_rate = 0;
};

// Built-in models.
FiniteModel otc_model(double lambda_u, double lambda_d, double beta, double rho);
PercolationModel info_percolation_model(double lambda, double truncation_bound = 64.0);
FiniteModel opinion_model(double alpha, double beta, const std::vector<std::vector<double>>& P,
                          const std::vector<std::vector<double>>& Q, int m);
FiniteModel fleming_viot_model(const std::vector<std::vector<double>>& Q_rates,
                               double max_exit_rate = 1e6);
FiniteModel two_state_model(double rate_up, double rate_down);
FiniteModel custom_model(TypeSpace space, FiniteKernels kernels, double gamma_bar_hint = -1,
                         double lambda_bar_hint = -1);

// OTC label indices, in declaration order {ho, hn, lo, ln}.
namespace otc {
inline constexpr int ho = 0, hn = 1, lo = 2, ln = 3;
}

}  // namespace psim
