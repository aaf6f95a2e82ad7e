#pragma once

// Copula-coupled Projected Gamma model: marginals F_PG(.|omega_j) joined by a
// Gaussian or t copula.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pgcop/copula.hpp"
#include "pgcop/numerics.hpp"
#include "pgcop/projected_gamma.hpp"

namespace pgcop {

/// CDF values are pushed into [eps, 1 - eps] before any quantile transform.
inline constexpr double probability_clamp = 1e-12;

inline double clamp_probability(double p) { return std::clamp(p, probability_clamp, 1.0 - probability_clamp); }

struct ModelParams {
  std::vector<MarginalParams> marginals;
  CopulaParams copula;

  ModelParams(std::vector<MarginalParams> m, CopulaParams c) : marginals(std::move(m)), copula(std::move(c)) {
    if (marginals.size() < 2) throw DomainError("ModelParams: at least two marginals are required");
    if (marginals.size() != copula.dimension())
      throw DimensionMismatch("ModelParams: marginal count differs from copula dimension");
  }

  std::size_t dimension() const { return marginals.size(); }
  bool operator==(const ModelParams&) const = default;
};

/// n x m table of angles, every entry strictly inside (0, pi/2).
class Dataset {
 public:
  Dataset(Matrix angles, std::vector<std::string> labels = {}) : angles_(std::move(angles)), labels_(std::move(labels)) {
    if (angles_.rows() < 1) throw DomainError("Dataset: at least one observation is required");
    if (angles_.cols() < 1) throw DomainError("Dataset: at least one column is required");
    if (labels_.empty()) {
      for (std::size_t j = 0; j < angles_.cols(); ++j) labels_.push_back("theta_" + std::to_string(j + 1));
    }
    if (labels_.size() != angles_.cols()) throw DimensionMismatch("Dataset: label count differs from column count");

    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < angles_.rows(); ++i)
      for (std::size_t j = 0; j < angles_.cols(); ++j)
        if (!is_interior_angle(angles_(i, j))) {
          bad.push_back(i + 1);
          break;
        }
    if (!bad.empty()) {
      std::ostringstream os;
      os << "Dataset: " << bad.size() << " row(s) hold angles outside the open interval (0, pi/2); rows (1-based):";
      for (std::size_t k = 0; k < bad.size() && k < 20; ++k) os << ' ' << bad[k];
      if (bad.size() > 20) os << " ...";
      throw DomainError(os.str());
    }
  }

  std::size_t size() const { return angles_.rows(); }
  std::size_t dimension() const { return angles_.cols(); }
  std::span<const double> row(std::size_t i) const { return angles_.row(i); }
  double operator()(std::size_t i, std::size_t j) const { return angles_(i, j); }
  const Matrix& angles() const { return angles_; }
  const std::vector<std::string>& labels() const { return labels_; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = angles_(i, j);
    return out;
  }

  bool operator==(const Dataset&) const = default;

 private:
  Matrix angles_;
  std::vector<std::string> labels_;
};

inline double joint_log_pdf(std::span<const double> theta, const ModelParams& params) {
  const std::size_t m = params.dimension();
  if (theta.size() != m) throw DimensionMismatch("joint_log_pdf: angle vector length differs from model dimension");
  std::vector<double> u(m);
  double marginal = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    marginal += pg_log_pdf(theta[j], params.marginals[j]);
    u[j] = clamp_probability(pg_cdf(theta[j], params.marginals[j]));
  }
  return copula_log_density(u, params.copula) + marginal;
}

/// Rows are summed in order so the result is reproducible bit for bit.
inline double log_likelihood(const Dataset& data, const ModelParams& params) {
  if (data.dimension() != params.dimension())
    throw DimensionMismatch("log_likelihood: dataset dimension differs from model dimension");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += joint_log_pdf(data.row(i), params);
  return total;
}

/// Rows built as theta_j = F_PG^{-1}(u_j | omega_j) with u from the copula.
template <class Rng>
Dataset simulate_dataset(const ModelParams& params, std::size_t n, Rng& rng) {
  if (n < 1) throw DomainError("simulate_dataset: n must be positive");
  const std::size_t m = params.dimension();
  constexpr double lowest = std::numeric_limits<double>::denorm_min();
  const double highest = std::nextafter(half_pi, 0.0);
  Matrix angles(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> u = copula_sample(params.copula, rng);
    for (std::size_t j = 0; j < m; ++j) {
      // Extreme quantiles can round onto the arc ends in double precision.
      angles(i, j) = std::clamp(pg_quantile(clamp_probability(u[j]), params.marginals[j]), lowest, highest);
    }
  }
  return Dataset(std::move(angles));
}

}  // namespace pgcop
