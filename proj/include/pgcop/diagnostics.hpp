#pragma once

// Posterior summaries, convergence diagnostics, LPML and predictive grids.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgcop/copula.hpp"
#include "pgcop/inference.hpp"
#include "pgcop/joint_model.hpp"
#include "pgcop/numerics.hpp"
#include "pgcop/projected_gamma.hpp"

namespace pgcop {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool degenerate = false;  // lower == upper: constant input
};

namespace detail {

// Type-7 sample quantile: linear interpolation between order statistics.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Autocovariance sum by Geyer's initial positive sequence; returns
// gamma_0 + 2 sum gamma_k, i.e. the spectral density at frequency zero.
inline double spectral_density_at_zero(std::span<const double> x) {
  const std::size_t n = x.size();
  const double mu = mean_of(x);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (x[t] - mu) * (x[t + lag] - mu);
    return s / static_cast<double>(n);
  };
  const double gamma0 = autocov(0);
  if (!(gamma0 > 0.0)) throw DomainError("chain has zero variance");
  double sum = -gamma0;  // pairs below include gamma_0 once; net result is gamma_0 + 2 sum_{k>=1}
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = autocov(2 * k) + autocov(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);  // initial monotone sequence
    sum += 2.0 * pair;
    prev_pair = pair;
  }
  return std::max(sum, gamma0 * 1e-12);
}

}  // namespace detail

/// Equal-tailed interval at level gamma.
inline Interval credible_interval(std::span<const double> draws, double gamma) {
  if (draws.size() < 2) throw DomainError("credible_interval: at least two draws are required");
  detail::require(gamma > 0.0 && gamma < 1.0, "credible_interval: level must lie in (0, 1)");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  Interval iv;
  iv.lower = detail::sorted_quantile(sorted, 0.5 * (1.0 - gamma));
  iv.upper = detail::sorted_quantile(sorted, 0.5 * (1.0 + gamma));
  iv.degenerate = !(iv.lower < iv.upper);
  return iv;
}

inline double effective_sample_size(std::span<const double> draws) {
  if (draws.size() < 50) throw DomainError("effective_sample_size: at least 50 draws are required");
  const double n = static_cast<double>(draws.size());
  const double mu = detail::mean_of(draws);
  double gamma0 = 0.0;
  for (double v : draws) gamma0 += (v - mu) * (v - mu);
  gamma0 /= n;
  return n * gamma0 / detail::spectral_density_at_zero(draws);
}

/// Difference of the means of the first 10% and last 50% of the chain in
/// units of its spectral standard error.
inline double geweke_z(std::span<const double> draws) {
  if (draws.size() < 50) throw DomainError("geweke_z: at least 50 draws are required");
  const std::size_t n = draws.size();
  const std::size_t n_a = n / 10;
  const std::size_t n_b = n / 2;
  const auto a = draws.first(n_a);
  const auto b = draws.last(n_b);
  const double var = detail::spectral_density_at_zero(a) / static_cast<double>(n_a) +
                     detail::spectral_density_at_zero(b) / static_cast<double>(n_b);
  return (detail::mean_of(a) - detail::mean_of(b)) / std::sqrt(var);
}

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  Interval interval;
  std::optional<double> ess;
  std::optional<double> geweke;
};

struct Summary {
  double level = 0.95;
  std::size_t draws = 0;
  std::vector<ParameterSummary> parameters;

  const ParameterSummary& at(const std::string& name) const {
    for (const auto& p : parameters)
      if (p.name == name) return p;
    throw std::out_of_range("Summary: no parameter named " + name);
  }
};

/// Draws of one parameter (by parameter_names() position) across the chain.
inline std::vector<double> parameter_trace(const Chain& chain, std::size_t index) {
  std::vector<double> out;
  out.reserve(chain.size());
  for (const auto& d : chain.draws) out.push_back(flatten(d).at(index));
  return out;
}

inline Summary summarize(const Chain& chain, double level = 0.95) {
  if (chain.size() < 2) throw DomainError("summarize: at least two draws are required");
  Summary s;
  s.level = level;
  s.draws = chain.size();
  const auto names = parameter_names(chain.dimension, chain.family);
  std::vector<std::vector<double>> traces(names.size());
  for (const auto& d : chain.draws) {
    const auto v = flatten(d);
    for (std::size_t k = 0; k < names.size(); ++k) traces[k].push_back(v[k]);
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto& x = traces[k];
    ParameterSummary p;
    p.name = names[k];
    p.mean = detail::mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - p.mean) * (v - p.mean);
    p.sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
    p.interval = credible_interval(x, level);
    try {
      p.ess = effective_sample_size(x);
      p.geweke = geweke_z(x);
    } catch (const DomainError&) {
      // short or constant trace: diagnostics undefined
    }
    s.parameters.push_back(std::move(p));
  }
  return s;
}

// ---------------------------------------------------------------------------
// LPML
// ---------------------------------------------------------------------------

/// ln CPO_i for every observation: minus the log of the posterior mean of
/// 1 / f(theta_i | draw), accumulated by log-sum-exp.
inline std::vector<double> log_cpo(const Dataset& data, const Chain& chain) {
  if (chain.draws.empty()) throw DomainError("log_cpo: chain has no draws");
  if (chain.dimension != data.dimension())
    throw DimensionMismatch("log_cpo: chain dimension " + std::to_string(chain.dimension) +
                            " differs from dataset dimension " + std::to_string(data.dimension()));
  const std::size_t n = data.size();
  const std::size_t draws = chain.size();
  // Column-major by observation so each row's terms are contiguous.
  std::vector<double> neg(n * draws);
  for (std::size_t d = 0; d < draws; ++d) {
    const ModelParams& params = chain.draws[d];
    for (std::size_t i = 0; i < n; ++i) neg[i * draws + d] = -joint_log_pdf(data.row(i), params);
  }
  std::vector<double> out(n);
  const double log_m = std::log(static_cast<double>(draws));
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> terms(neg.data() + i * draws, draws);
    const double v = -(log_sum_exp(terms) - log_m);
    if (!std::isfinite(v)) throw NumericalError("log_cpo: non-finite CPO at observation " + std::to_string(i + 1));
    out[i] = v;
  }
  return out;
}

inline double lpml(const Dataset& data, const Chain& chain) {
  const auto cpo = log_cpo(data, chain);
  return std::accumulate(cpo.begin(), cpo.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Predictive grid
// ---------------------------------------------------------------------------

/// Posterior predictive density of a pair of coordinates on the open
/// midpoint lattice theta_k = (k + 1/2) pi / (2 resolution).
struct PredictiveGrid {
  std::size_t axis_a = 0;
  std::size_t axis_b = 1;
  std::vector<double> nodes;
  Matrix density;  // density(k_a, k_b)

  double spacing() const { return half_pi / static_cast<double>(nodes.size()); }
};

inline std::vector<double> lattice_nodes(std::size_t resolution) {
  std::vector<double> nodes(resolution);
  const double h = half_pi / static_cast<double>(resolution);
  for (std::size_t k = 0; k < resolution; ++k) nodes[k] = (static_cast<double>(k) + 0.5) * h;
  return nodes;
}

/// For more than two coordinates the pair's sub-model (two marginals, 2x2
/// sub-correlation, same nu) is the exact bivariate margin of an elliptical copula.
inline PredictiveGrid predictive_grid(const Chain& chain, std::size_t axis_a, std::size_t axis_b,
                                      std::size_t resolution) {
  if (chain.draws.empty()) throw DomainError("predictive_grid: chain has no draws");
  if (resolution < 2) throw DomainError("predictive_grid: resolution must be at least 2");
  if (axis_a >= chain.dimension || axis_b >= chain.dimension || axis_a == axis_b)
    throw DomainError("predictive_grid: axes must be two distinct columns below " + std::to_string(chain.dimension));

  PredictiveGrid grid;
  grid.axis_a = axis_a;
  grid.axis_b = axis_b;
  grid.nodes = lattice_nodes(resolution);
  grid.density = Matrix(resolution, resolution);

  const std::size_t r = resolution;
  std::vector<double> log_f_a(r), log_f_b(r), z_a(r), z_b(r), marg_a(r), marg_b(r);
  for (const ModelParams& draw : chain.draws) {
    const CopulaParams& c = draw.copula;
    const CorrelationMatrix sub = c.correlation.pair(axis_a, axis_b);
    const LowerTriangularFactor& factor = sub.factor();
    const bool gaussian = c.family == CopulaFamily::Gaussian;
    for (std::size_t k = 0; k < r; ++k) {
      const double t = grid.nodes[k];
      log_f_a[k] = pg_log_pdf(t, draw.marginals[axis_a]);
      log_f_b[k] = pg_log_pdf(t, draw.marginals[axis_b]);
      const double ua = clamp_probability(pg_cdf(t, draw.marginals[axis_a]));
      const double ub = clamp_probability(pg_cdf(t, draw.marginals[axis_b]));
      if (gaussian) {
        z_a[k] = std_normal_quantile(ua);
        z_b[k] = std_normal_quantile(ub);
        marg_a[k] = z_a[k] * z_a[k];
        marg_b[k] = z_b[k] * z_b[k];
      } else {
        z_a[k] = student_t_quantile(ua, c.nu);
        z_b[k] = student_t_quantile(ub, c.nu);
        marg_a[k] = student_t_log_pdf(z_a[k], c.nu);
        marg_b[k] = student_t_log_pdf(z_b[k], c.nu);
      }
    }
    const double t_const = gaussian ? 0.0
                                    : log_gamma_fn(0.5 * (c.nu + 2.0)) - log_gamma_fn(0.5 * c.nu) -
                                          std::log(c.nu * std::numbers::pi) - factor.half_log_det();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        const std::array<double, 2> z = {z_a[i], z_b[j]};
        const double q = factor.quadratic_form(z);
        const double log_c = gaussian ? -factor.half_log_det() - 0.5 * (q - marg_a[i] - marg_b[j])
                                      : t_const - 0.5 * (c.nu + 2.0) * std::log1p(q / c.nu) - marg_a[i] - marg_b[j];
        grid.density(i, j) += std::exp(log_c + log_f_a[i] + log_f_b[j]);
      }
  }
  const double inv = 1.0 / static_cast<double>(chain.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) grid.density(i, j) *= inv;
  return grid;
}

/// Cell-centred quadrature of the grid: sum of density times cell area.
inline double grid_mass(const PredictiveGrid& grid) {
  const double h = grid.spacing();
  double s = 0.0;
  for (std::size_t i = 0; i < grid.nodes.size(); ++i)
    for (std::size_t j = 0; j < grid.nodes.size(); ++j) s += grid.density(i, j);
  return s * h * h;
}

}  // namespace pgcop
