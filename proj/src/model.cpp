#include "psim/model.hpp"

#include <algorithm>
#include <cmath>

namespace psim {

namespace {

void require_nonneg(double v, const char* what) {
  if (!(v >= 0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite and >= 0");
}

std::vector<std::string> int_labels(int lo, int hi) {
  std::vector<std::string> labels;
  for (int i = lo; i <= hi; ++i) labels.push_back(std::to_string(i));
  return labels;
}

}  // namespace

void FiniteKernels::validate(double gamma_bar, double lambda_bar) const {
  for (double v : gamma_tbl)
    if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("kernel: Gamma entries must be finite and >= 0");
  for (double v : lambda_tbl)
    if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("kernel: Lambda entries must be finite and >= 0");
  const double tol = 1e-9;
  for (int w = 0; w < k; ++w)
    for (int z = 0; z < k; ++z)
      if (gamma_mass(w, z) > gamma_bar * (1 + tol) + tol * 1e-3)
        throw ConfigError("kernel: Gamma mass exceeds gamma_bar");
  if (has_lambda())
    for (int w1 = 0; w1 < k; ++w1)
      for (int w2 = 0; w2 < k; ++w2)
        for (int z = 0; z < k; ++z)
          if (lambda_mass(w1, w2, z) > lambda_bar * (1 + tol) + tol * 1e-3)
            throw ConfigError("kernel: Lambda mass exceeds lambda_bar");
}

FiniteModel FiniteModel::from_kernels(TypeSpace space, FiniteKernels kernels, std::string name,
                                      double gamma_bar_hint, double lambda_bar_hint) {
  if (!space.is_finite()) throw ConfigError("from_kernels: finite space required");
  const int k = space.size();
  if (kernels.k != k) throw ConfigError("from_kernels: kernel arity does not match the space");

  auto ker = std::make_shared<FiniteKernels>(std::move(kernels));

  // Precomputed total masses m_Gamma(w,z) and m_Lambda(w1,w2,z).
  auto gmass = std::make_shared<std::vector<double>>(static_cast<std::size_t>(k) * k, 0.0);
  double gbar = 0;
  for (int w = 0; w < k; ++w)
    for (int z = 0; z < k; ++z) {
      const double m = ker->gamma_mass(w, z);
      (*gmass)[static_cast<std::size_t>(w) * k + z] = m;
      gbar = std::max(gbar, m);
    }
  auto lmass = std::make_shared<std::vector<double>>();
  double lbar = 0;
  if (ker->has_lambda()) {
    lmass->assign(static_cast<std::size_t>(k) * k * k, 0.0);
    for (int w1 = 0; w1 < k; ++w1)
      for (int w2 = 0; w2 < k; ++w2)
        for (int z = 0; z < k; ++z) {
          const double m = ker->lambda_mass(w1, w2, z);
          (*lmass)[(static_cast<std::size_t>(w1) * k + w2) * k + z] = m;
          lbar = std::max(lbar, m);
        }
  }
  if (gamma_bar_hint >= 0) {
    if (gamma_bar_hint < gbar * (1 - 1e-12)) throw ConfigError("from_kernels: gamma_bar below kernel mass");
    gbar = gamma_bar_hint;
  }
  if (lambda_bar_hint >= 0) {
    if (lambda_bar_hint < lbar * (1 - 1e-12)) throw ConfigError("from_kernels: lambda_bar below kernel mass");
    lbar = lambda_bar_hint;
  }
  ker->validate(gbar, lbar);

  FiniteModel m;
  m.space = std::move(space);
  m.name = std::move(name);
  m.gamma_bar = gbar;
  m.lambda_bar = lbar;
  m.kernels = ker;

  m.gamma = [ker, gmass, k](int w, const MassView& nu) {
    double g = 0;
    for (int z = 0; z < k; ++z) g += nu[z] * (*gmass)[static_cast<std::size_t>(w) * k + z];
    return g;
  };
  m.a_probs = [ker, k](int w, const MassView& nu, double* out) {
    double total = 0;
    for (int wp = 0; wp < k; ++wp) {
      double acc = 0;
      for (int z = 0; z < k; ++z) acc += nu[z] * ker->gamma_entry(w, z, wp);
      out[wp] = acc;
      total += acc;
    }
    if (total > 0)
      for (int wp = 0; wp < k; ++wp) out[wp] /= total;
  };
  if (ker->has_lambda()) {
    m.lambda = [lmass, k](int w1, int w2, const MassView& nu) {
      double l = 0;
      for (int z = 0; z < k; ++z) l += nu[z] * (*lmass)[(static_cast<std::size_t>(w1) * k + w2) * k + z];
      return l;
    };
    m.b_support = [ker, k](int w1, int w2, const MassView& nu, std::vector<PairOutcome>& out) {
      out.clear();
      double total = 0;
      for (int w1p = 0; w1p < k; ++w1p)
        for (int w2p = 0; w2p < k; ++w2p) {
          double acc = 0;
          for (int z = 0; z < k; ++z) acc += nu[z] * ker->lambda_entry(w1, w2, z, w1p, w2p);
          if (acc > 0) {
            out.push_back({w1p, w2p, acc});
            total += acc;
          }
        }
      for (auto& o : out) o.prob /= total;
    };
  } else {
    m.lambda = [](int, int, const MassView&) { return 0.0; };
    m.b_support = [](int, int, const MassView&, std::vector<PairOutcome>& out) { out.clear(); };
  }
  m.lambda_engine = m.lambda;
  return m;
}

FiniteModel custom_model(TypeSpace space, FiniteKernels kernels, double gamma_bar_hint,
                         double lambda_bar_hint) {
  return FiniteModel::from_kernels(std::move(space), std::move(kernels), "custom", gamma_bar_hint,
                                   lambda_bar_hint);
}

FiniteModel two_state_model(double rate_up, double rate_down) {
  require_nonneg(rate_up, "rate_up");
  require_nonneg(rate_down, "rate_down");
  FiniteKernels ker = FiniteKernels::zero(2, false);
  for (int z = 0; z < 2; ++z) {
    ker.gamma_entry(0, z, 1) = rate_up;
    ker.gamma_entry(1, z, 0) = rate_down;
  }
  FiniteModel m = FiniteModel::from_kernels(TypeSpace::finite({"1", "2"}), std::move(ker), "two_state");
  return m;
}

FiniteModel otc_model(double lambda_u, double lambda_d, double beta, double rho) {
  require_nonneg(lambda_u, "lambda_u");
  require_nonneg(lambda_d, "lambda_d");
  require_nonneg(beta, "beta");
  require_nonneg(rho, "rho");

  using namespace otc;
  TypeSpace space = TypeSpace::finite({"ho", "hn", "lo", "ln"});
  const int k = 4;

  // Intrinsic-type switching: high types decay at lambda_d, low types rise at
  // lambda_u; ownership is unchanged. a is deterministic, independent of nu.
  const int a_target[4] = {lo, ln, ho, hn};
  const double g_rate[4] = {lambda_d, lambda_d, lambda_u, lambda_u};

  FiniteKernels ker = FiniteKernels::zero(k, true);
  for (int w = 0; w < k; ++w)
    for (int z = 0; z < k; ++z) ker.gamma_entry(w, z, a_target[w]) = g_rate[w];
  // Linear pair part: direct hn-lo contacts at rate beta; the marketmaker
  // term is not linear in nu and lives in an aggregate channel instead.
  for (int z = 0; z < k; ++z) {
    ker.lambda_entry(hn, lo, z, ho, ln) = beta;
    ker.lambda_entry(lo, hn, z, ln, ho) = beta;
  }

  FiniteModel m = FiniteModel::from_kernels(space, std::move(ker), "otc",
                                            std::max(lambda_u, lambda_d), beta);

  // Full mathematical pair rate, marketmaker share included.
  m.lambda = [beta, rho](int w1, int w2, const MassView& nu) -> double {
    const bool trade = (w1 == hn && w2 == lo) || (w1 == lo && w2 == hn);
    if (!trade) return 0.0;
    const double p = nu[hn] * nu[lo];
    if (rho > 0 && p > 0) return beta + 0.5 * rho * std::min(nu[hn], nu[lo]) / p;
    return beta;
  };
  m.lambda_engine = [beta](int w1, int w2, const MassView&) -> double {
    const bool trade = (w1 == hn && w2 == lo) || (w1 == lo && w2 == hn);
    return trade ? beta : 0.0;
  };
  m.b_support = [](int w1, int w2, const MassView&, std::vector<PairOutcome>& out) {
    out.clear();
    if (w1 == hn && w2 == lo)
      out.push_back({ho, ln, 1.0});
    else if (w1 == lo && w2 == hn)
      out.push_back({ln, ho, 1.0});
  };

  if (rho > 0) {
    AggregateChannel mm;
    mm.name = "marketmaker";
    mm.rate = [rho](const MassView& nu, std::int64_t n) {
      return static_cast<double>(n) * rho * std::min(nu[hn], nu[lo]);
    };
    mm.rate_bound = [rho](std::int64_t n) { return static_cast<double>(n) * rho * 0.5; };
    mm.sample_move = [](const MassView&, RngStream&) { return ChannelMove{hn, ho, lo, ln}; };
    m.channels.push_back(std::move(mm));
  }
  return m;
}

PercolationModel info_percolation_model(double lambda, double truncation_bound) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw ConfigError("info_percolation: lambda must be > 0");
  PercolationModel m;
  m.space = TypeSpace::real_line(truncation_bound);
  m.meeting_rate = lambda;
  return m;
}

FiniteModel opinion_model(double alpha, double beta, const std::vector<std::vector<double>>& P,
                          const std::vector<std::vector<double>>& Q, int m_range) {
  require_nonneg(alpha, "alpha");
  require_nonneg(beta, "beta");
  if (m_range < 0) throw ConfigError("opinion: m must be >= 0");
  const int k = 2 * m_range + 1;

  auto check_stochastic = [k](const std::vector<std::vector<double>>& M, const char* name) {
    if (static_cast<int>(M.size()) != k) throw ConfigError(std::string("opinion: ") + name + " must be k x k");
    for (int i = 0; i < k; ++i) {
      if (static_cast<int>(M[i].size()) != k)
        throw ConfigError(std::string("opinion: ") + name + " must be k x k");
      double row = 0;
      for (int j = 0; j < k; ++j) {
        if (!(M[i][j] >= 0)) throw ConfigError(std::string("opinion: ") + name + " entries must be >= 0");
        row += M[i][j];
      }
      if (std::abs(M[i][i]) > 0)
        throw ConfigError(std::string("opinion: ") + name + " must have zero diagonal");
      if (std::abs(row - 1.0) > 1e-9)
        throw ConfigError(std::string("opinion: ") + name + " rows must sum to 1");
    }
  };
  check_stochastic(P, "P");
  check_stochastic(Q, "Q");

  // Gamma(i, z, {j}) = alpha p_ij if z = i, beta q_ij if z = j, else 0.
  FiniteKernels ker = FiniteKernels::zero(k, false);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      ker.gamma_entry(i, i, j) += alpha * P[i][j];
      ker.gamma_entry(i, j, j) += beta * Q[i][j];
    }
  return FiniteModel::from_kernels(TypeSpace::finite(int_labels(-m_range, m_range)), std::move(ker),
                                   "opinion");
}

FiniteModel fleming_viot_model(const std::vector<std::vector<double>>& Q_rates, double max_exit_rate) {
  const int n = static_cast<int>(Q_rates.size());
  if (n < 2) throw ConfigError("fleming_viot: need the absorbing state plus at least one live state");
  for (const auto& row : Q_rates)
    if (static_cast<int>(row.size()) != n) throw ConfigError("fleming_viot: Q must be square");
  for (int j = 0; j < n; ++j)
    if (Q_rates[0][j] != 0) throw ConfigError("fleming_viot: state 0 must be absorbing");
  const int k = n - 1;  // live states 1..K
  for (int i = 0; i < n; ++i) {
    double off = 0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!(Q_rates[i][j] >= 0)) throw ConfigError("fleming_viot: off-diagonal rates must be >= 0");
      off += Q_rates[i][j];
    }
    if (std::abs(Q_rates[i][i] + off) > 1e-9 * std::max(1.0, off))
      throw ConfigError("fleming_viot: rows must be conservative (diag = -sum of off-diagonal)");
    if (off > max_exit_rate) throw ConfigError("fleming_viot: exit rate exceeds the configured cap");
  }

  // Gamma(i, z, {j}) = q(i,j) + q(i,0) 1{z=j} for i != j: free motion plus
  // absorption followed by a uniform redraw from the population. Landing on
  // the current site is a null move, so state 0 is never occupied.
  FiniteKernels ker = FiniteKernels::zero(k, false);
  for (int i = 1; i <= k; ++i)
    for (int j = 1; j <= k; ++j) {
      if (i == j) continue;
      for (int z = 1; z <= k; ++z)
        ker.gamma_entry(i - 1, z - 1, j - 1) = Q_rates[i][j] + (z == j ? Q_rates[i][0] : 0.0);
    }
  return FiniteModel::from_kernels(TypeSpace::finite(int_labels(1, k)), std::move(ker),
                                   "fleming_viot");
}

}  // namespace psim
