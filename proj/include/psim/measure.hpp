#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "psim/test_function.hpp"
#include "psim/types.hpp"

namespace psim {

// Empirical measure nu_N = (1/N) sum_i delta_{eta(i)}. Masses are integer
// counts over N, so total mass is exactly 1 by construction; floating point
// enters only at the pairing boundary. Finite spaces use a dense count
// vector, point spaces (reals, lattice) a sorted support list.
class EmpiricalMeasure {
 public:
  static EmpiricalMeasure from_config(const AgentConfiguration& config) {
    config.validate();
    EmpiricalMeasure m;
    m.space_ = config.space;
    m.n_ = config.n_agents();
    if (config.space.is_finite()) {
      m.counts_.assign(static_cast<std::size_t>(config.space.size()), 0);
      for (const auto& t : config.types) ++m.counts_[static_cast<std::size_t>(t.label())];
    } else {
      std::map<TypeValue, std::int64_t> acc;
      for (const auto& t : config.types) ++acc[t];
      m.support_.assign(acc.begin(), acc.end());
    }
    return m;
  }

  static EmpiricalMeasure from_counts(const TypeSpace& space, std::vector<std::int64_t> counts) {
    if (!space.is_finite() || static_cast<int>(counts.size()) != space.size())
      throw ConfigError("EmpiricalMeasure: counts must cover the finite space");
    EmpiricalMeasure m;
    m.space_ = space;
    m.counts_ = std::move(counts);
    m.n_ = 0;
    for (auto c : m.counts_) {
      if (c < 0) throw ConfigError("EmpiricalMeasure: negative count");
      m.n_ += c;
    }
    if (m.n_ <= 0) throw ConfigError("EmpiricalMeasure: empty measure");
    return m;
  }

  const TypeSpace& space() const { return space_; }
  std::int64_t n_agents() const { return n_; }
  bool is_dense() const { return space_.is_finite(); }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  const std::vector<std::pair<TypeValue, std::int64_t>>& support() const { return support_; }

  double mass(const TypeValue& w) const {
    if (is_dense()) return static_cast<double>(counts_[static_cast<std::size_t>(w.label())]) / static_cast<double>(n_);
    auto it = std::lower_bound(support_.begin(), support_.end(), w,
                               [](const auto& a, const TypeValue& b) { return a.first < b; });
    if (it != support_.end() && it->first == w) return static_cast<double>(it->second) / static_cast<double>(n_);
    return 0.0;
  }

  // Probability masses as a dense vector (finite spaces).
  Eigen::VectorXd probabilities() const {
    Eigen::VectorXd p(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i)
      p[static_cast<Eigen::Index>(i)] = static_cast<double>(counts_[i]) / static_cast<double>(n_);
    return p;
  }

  // Total mass is 1 by the integer-count representation.
  double total_mass() const { return 1.0; }

 private:
  TypeSpace space_;
  std::int64_t n_ = 0;
  std::vector<std::int64_t> counts_;                       // finite W
  std::vector<std::pair<TypeValue, std::int64_t>> support_;  // point spaces
};

// General signed combination sum_i m_i delta_{w_i} (not necessarily
// normalized); used for test oracles and signed pairings.
struct SignedMeasure {
  std::vector<std::pair<TypeValue, double>> atoms;
};

inline EmpiricalMeasure empirical_measure(const AgentConfiguration& config) {
  return EmpiricalMeasure::from_config(config);
}

// <nu, phi> = integral of phi d nu. Probability measures pair constants to
// the constant exactly (total mass is exactly 1 for count-based measures).
inline double pairing(const EmpiricalMeasure& m, const TestFunction& phi) {
  if (!phi.evaluable_on(m.space())) throw ConfigError("pairing: phi not evaluable on this space");
  if (phi.is_constant()) return phi.constant_value();
  if (m.is_dense()) {
    const auto& c = m.counts();
    double acc = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c[i] != 0) acc += static_cast<double>(c[i]) * phi.at_label(static_cast<int>(i));
    return acc / static_cast<double>(m.n_agents());
  }
  double acc = 0;
  for (const auto& [w, c] : m.support()) acc += static_cast<double>(c) * phi(w);
  return acc / static_cast<double>(m.n_agents());
}

// Pairing against a dense probability state on a finite space (a limit
// solver state). Treated as a probability measure: constants pair exactly.
inline double pairing(const Eigen::VectorXd& probs, const TestFunction& phi, const TypeSpace& space) {
  if (!phi.evaluable_on(space)) throw ConfigError("pairing: phi not evaluable on this space");
  if (phi.is_constant()) return phi.constant_value();
  double acc = 0;
  for (int i = 0; i < space.size(); ++i) acc += probs[i] * phi.at_label(i);
  return acc;
}

inline double pairing(const SignedMeasure& m, const TestFunction& phi) {
  double acc = 0;
  for (const auto& [w, mass] : m.atoms) acc += mass * phi(w);
  return acc;
}

// Total variation distance between probability measures: half the l1 norm
// of the difference. Symmetric, zero iff equal, at most 1.
inline double tv_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.space() != b.space()) throw ConfigError("tv_distance: measures live on different spaces");
  double acc = 0;
  if (a.is_dense()) {
    const auto& ca = a.counts();
    const auto& cb = b.counts();
    for (std::size_t i = 0; i < ca.size(); ++i)
      acc += std::abs(static_cast<double>(ca[i]) / static_cast<double>(a.n_agents()) -
                      static_cast<double>(cb[i]) / static_cast<double>(b.n_agents()));
    return 0.5 * acc;
  }
  const auto& sa = a.support();
  const auto& sb = b.support();
  std::size_t i = 0, j = 0;
  const double na = static_cast<double>(a.n_agents()), nb = static_cast<double>(b.n_agents());
  while (i < sa.size() || j < sb.size()) {
    if (j >= sb.size() || (i < sa.size() && sa[i].first < sb[j].first)) {
      acc += static_cast<double>(sa[i].second) / na;
      ++i;
    } else if (i >= sa.size() || sb[j].first < sa[i].first) {
      acc += static_cast<double>(sb[j].second) / nb;
      ++j;
    } else {
      acc += std::abs(static_cast<double>(sa[i].second) / na - static_cast<double>(sb[j].second) / nb);
      ++i;
      ++j;
    }
  }
  return 0.5 * acc;
}

inline double tv_distance(const EmpiricalMeasure& a, const Eigen::VectorXd& probs) {
  if (!a.is_dense() || static_cast<int>(a.counts().size()) != probs.size())
    throw ConfigError("tv_distance: dense comparison needs matching finite spaces");
  double acc = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    acc += std::abs(static_cast<double>(a.counts()[static_cast<std::size_t>(i)]) /
                        static_cast<double>(a.n_agents()) -
                    probs[i]);
  return 0.5 * acc;
}

inline double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw ConfigError("tv_distance: vectors of different length");
  return 0.5 * (p - q).cwiseAbs().sum();
}

// Kolmogorov-Smirnov distance between a sample on R and a reference CDF
// given on grid nodes: sup over nodes of |F_n(x_k) - R(x_k)|. Samples beyond
// the grid land in the tail bins (they push F_n at the boundary nodes).
inline double ks_distance(std::vector<double> sample, const Eigen::VectorXd& grid_x,
                          const Eigen::VectorXd& grid_cdf) {
  if (sample.empty()) throw ConfigError("ks_distance: empty sample");
  if (grid_x.size() != grid_cdf.size() || grid_x.size() < 2)
    throw ConfigError("ks_distance: grid and CDF sizes must match (>= 2 nodes)");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double sup = 0;
  std::size_t idx = 0;
  for (Eigen::Index k = 0; k < grid_x.size(); ++k) {
    while (idx < sample.size() && sample[idx] <= grid_x[k]) ++idx;
    const double fn = static_cast<double>(idx) / n;
    sup = std::max(sup, std::abs(fn - grid_cdf[k]));
  }
  return sup;
}

inline double ks_distance(const EmpiricalMeasure& m, const Eigen::VectorXd& grid_x,
                          const Eigen::VectorXd& grid_cdf) {
  if (m.is_dense()) throw ConfigError("ks_distance: expects a measure on R");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m.n_agents()));
  for (const auto& [w, c] : m.support())
    for (std::int64_t r = 0; r < c; ++r) values.push_back(w.real());
  return ks_distance(std::move(values), grid_x, grid_cdf);
}

}  // namespace psim
