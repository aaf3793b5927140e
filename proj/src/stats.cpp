#include "psim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace psim {

namespace {

// Series expansion of P(a,x), good for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 103; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a,x), good for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 203; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0) || x < 0) throw ConfigError("regularized_gamma: bad arguments");
  if (x == 0) return 0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0) || x < 0) throw ConfigError("regularized_gamma: bad arguments");
  if (x == 0) return 1;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi_square_sf(double x, double dof) { return regularized_gamma_q(0.5 * dof, 0.5 * x); }

double kolmogorov_sf(double x) {
  if (x <= 0) return 1.0;
  double sum = 0;
  for (int k = 1; k <= 101; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::min(1.0, std::max(0.0, 2.0 * sum));
}

double ks_uniform_statistic(std::vector<double> samples01) {
  if (samples01.empty()) throw ConfigError("ks_uniform: empty sample");
  std::sort(samples01.begin(), samples01.end());
  const double n = static_cast<double>(samples01.size());
  double sup = 0;
  for (std::size_t i = 0; i < samples01.size(); ++i) {
    const double x = samples01[i];
    sup = std::max(sup, std::abs(static_cast<double>(i + 1) / n - x));
    sup = std::max(sup, std::abs(static_cast<double>(i) / n - x));
  }
  return sup;
}

double ks_uniform_pvalue(double statistic, std::int64_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  return kolmogorov_sf((sn + 0.12 + 0.11 / sn) * statistic);
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double acc = 0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

NormalityReport normality_check(const std::vector<double>& samples) {
  if (samples.size() < 500) throw ConfigError("normality_check: need at least 500 samples");
  NormalityReport r;
  r.n = static_cast<std::int64_t>(samples.size());
  const double n = static_cast<double>(samples.size());
  r.mean = mean_of(samples);
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : samples) {
    const double d = x - r.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 == 0) {
    r.degenerate = true;
    r.pass = true;  // flagged separately, not failed
    return r;
  }
  r.sd = std::sqrt(m2 * n / (n - 1));
  r.skewness = m3 / std::pow(m2, 1.5);
  r.excess_kurtosis = m4 / (m2 * m2) - 3.0;

  // Exact null moments of b1 and b2 for i.i.d. normal samples.
  const double var_skew = 6.0 * (n - 2.0) / ((n + 1.0) * (n + 3.0));
  const double mean_kurt = -6.0 / (n + 1.0);  // of excess kurtosis b2 - 3
  const double var_kurt =
      24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
  r.z_skewness = r.skewness / std::sqrt(var_skew);
  r.z_kurtosis = (r.excess_kurtosis - mean_kurt) / std::sqrt(var_kurt);
  r.pass = std::abs(r.z_skewness) <= 4.0 && std::abs(r.z_kurtosis) <= 4.0;
  return r;
}

namespace {

struct PooledCell {
  double a = 0, b = 0;
};

}  // namespace

ChiSquareResult chi_square_equality(const std::vector<std::int64_t>& counts_a,
                                    const std::vector<std::int64_t>& counts_b) {
  if (counts_a.size() != counts_b.size() || counts_a.empty())
    throw ConfigError("chi_square_equality: category mismatch");
  double ka = 0, kb = 0;
  std::vector<PooledCell> cells;
  for (std::size_t i = 0; i < counts_a.size(); ++i) {
    if (counts_a[i] < 0 || counts_b[i] < 0) throw ConfigError("chi_square_equality: negative count");
    if (counts_a[i] == 0 && counts_b[i] == 0) continue;
    cells.push_back({static_cast<double>(counts_a[i]), static_cast<double>(counts_b[i])});
    ka += static_cast<double>(counts_a[i]);
    kb += static_cast<double>(counts_b[i]);
  }
  if (ka == 0 || kb == 0) throw ConfigError("chi_square_equality: a sample is empty");

  // Pool smallest-total cells until each expected count is at least 5.
  const double fa = ka / (ka + kb), fb = kb / (ka + kb);
  auto min_expected = [&](const PooledCell& c) { return std::min(fa, fb) * (c.a + c.b); };
  std::sort(cells.begin(), cells.end(),
            [](const PooledCell& x, const PooledCell& y) { return x.a + x.b < y.a + y.b; });
  while (cells.size() > 1 && min_expected(cells.front()) < 5.0) {
    cells[1].a += cells[0].a;
    cells[1].b += cells[0].b;
    cells.erase(cells.begin());
    std::sort(cells.begin(), cells.end(),
              [](const PooledCell& x, const PooledCell& y) { return x.a + x.b < y.a + y.b; });
  }
  if (cells.size() < 2)
    throw ConfigError("chi_square_equality: too few counts even after pooling");

  double stat = 0;
  for (const auto& c : cells) {
    const double ea = fa * (c.a + c.b);
    const double eb = fb * (c.a + c.b);
    stat += (c.a - ea) * (c.a - ea) / ea + (c.b - eb) * (c.b - eb) / eb;
  }
  ChiSquareResult r;
  r.statistic = stat;
  r.cells_used = static_cast<int>(cells.size());
  r.dof = static_cast<double>(cells.size() - 1);
  r.p_value = chi_square_sf(stat, r.dof);
  return r;
}

ChiSquareResult chi_square_gof(const std::vector<std::int64_t>& counts, const Eigen::VectorXd& probs) {
  if (static_cast<Eigen::Index>(counts.size()) != probs.size() || counts.empty())
    throw ConfigError("chi_square_gof: category mismatch");
  double n = 0;
  for (auto c : counts) {
    if (c < 0) throw ConfigError("chi_square_gof: negative count");
    n += static_cast<double>(c);
  }
  struct Cell {
    double o, p;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (probs[static_cast<Eigen::Index>(i)] > 0)
      cells.push_back({static_cast<double>(counts[i]), probs[static_cast<Eigen::Index>(i)]});
    else if (counts[i] > 0)
      throw ConfigError("chi_square_gof: counts observed in a zero-probability category");
  std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) { return x.p < y.p; });
  while (cells.size() > 1 && n * cells.front().p < 5.0) {
    cells[1].o += cells[0].o;
    cells[1].p += cells[0].p;
    cells.erase(cells.begin());
    std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) { return x.p < y.p; });
  }
  if (cells.size() < 2) throw ConfigError("chi_square_gof: too few counts even after pooling");
  double stat = 0;
  for (const auto& c : cells) {
    const double e = n * c.p;
    stat += (c.o - e) * (c.o - e) / e;
  }
  ChiSquareResult r;
  r.statistic = stat;
  r.cells_used = static_cast<int>(cells.size());
  r.dof = static_cast<double>(cells.size() - 1);
  r.p_value = chi_square_sf(stat, r.dof);
  return r;
}

SlopeFit fit_loglog_slope(const std::vector<double>& n_values, const std::vector<double>& errors) {
  if (n_values.size() != errors.size() || n_values.size() < 3)
    throw ConfigError("fit_loglog_slope: need at least 3 points");
  SlopeFit fit;
  for (double e : errors)
    if (!(e > 0)) {
      fit.degenerate = true;
      return fit;
    }
  const std::size_t n = n_values.size();
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = std::log(n_values[i]);
    ys[i] = std::log(errors[i]);
  }
  const double xbar = mean_of(xs), ybar = mean_of(ys);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
  }
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
  }
  const double s2 = ss_res / static_cast<double>(n - 2);
  fit.slope_se = std::sqrt(s2 / sxx);
  fit.ci_lo = fit.slope - 1.96 * fit.slope_se;
  fit.ci_hi = fit.slope + 1.96 * fit.slope_se;
  return fit;
}

}  // namespace psim
