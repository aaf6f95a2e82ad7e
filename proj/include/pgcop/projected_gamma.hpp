#pragma once

// Projected Gamma distribution on the quarter circle (0, pi/2): the angle of
// (G1, beta^{-1} G2) for independent unit-rate gammas G1 ~ Ga(alpha1),
// G2 ~ Ga(alpha2).

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pgcop/numerics.hpp"

namespace pgcop {

inline constexpr double half_pi = 0.5 * std::numbers::pi;

/// Parameters (alpha1, alpha2, beta) of one marginal.
struct MarginalParams {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double beta = 1.0;

  MarginalParams() = default;
  MarginalParams(double a1, double a2, double b) : alpha1(a1), alpha2(a2), beta(b) {
    if (!valid()) {
      std::ostringstream os;
      os << "MarginalParams: all of (alpha1, alpha2, beta) must be positive and finite, got (" << a1 << ", " << a2
         << ", " << b << ")";
      throw DomainError(os.str());
    }
  }

  bool valid() const {
    return std::isfinite(alpha1) && std::isfinite(alpha2) && std::isfinite(beta) && alpha1 > 0.0 && alpha2 > 0.0 &&
           beta > 0.0;
  }

  bool operator==(const MarginalParams&) const = default;
};

inline bool is_interior_angle(double theta) { return theta > 0.0 && theta < half_pi; }

inline double pg_log_pdf(double theta, const MarginalParams& p) {
  if (!is_interior_angle(theta)) {
    std::ostringstream os;
    os << "pg_log_pdf: angle " << theta << " is not strictly inside (0, pi/2)";
    throw DomainError(os.str());
  }
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return p.alpha2 * std::log(p.beta) + (p.alpha1 - 1.0) * std::log(c) + (p.alpha2 - 1.0) * std::log(s) -
         log_beta_fn(p.alpha1, p.alpha2) - (p.alpha1 + p.alpha2) * std::log(c + p.beta * s);
}

/// F(theta) = I_u(alpha2, alpha1) with u = beta tan(theta) / (1 + beta tan(theta)).
inline double pg_cdf(double theta, const MarginalParams& p) {
  detail::require(!std::isnan(theta), "pg_cdf: angle is NaN");
  if (theta <= 0.0) return 0.0;
  if (theta >= half_pi) return 1.0;
  const double bs = p.beta * std::sin(theta);
  const double u = bs / (std::cos(theta) + bs);
  return reg_inc_beta(u, p.alpha2, p.alpha1);
}

inline double pg_quantile(double prob, const MarginalParams& p) {
  detail::require(prob > 0.0 && prob < 1.0, "pg_quantile: probability must lie strictly inside (0, 1)");
  const double u = reg_inc_beta_inv(prob, p.alpha2, p.alpha1);
  return std::atan2(u, p.beta * (1.0 - u));
}

/// Exact draw by projecting two independent gamma variates.
template <class Rng>
double pg_sample(const MarginalParams& p, Rng& rng) {
  std::gamma_distribution<double> g1(p.alpha1, 1.0);
  std::gamma_distribution<double> g2(p.alpha2, 1.0);
  for (;;) {
    const double x = g1(rng);
    const double y = g2(rng);
    const double theta = std::atan2(y, p.beta * x);
    if (is_interior_angle(theta)) return theta;
  }
}

/// Cached trigonometry of one data column; evaluates the column's summed
/// log-density in one pass over ln(cos + beta sin).
class PgColumn {
 public:
  explicit PgColumn(std::span<const double> angles) {
    cos_.reserve(angles.size());
    sin_.reserve(angles.size());
    for (double theta : angles) {
      if (!is_interior_angle(theta)) throw DomainError("PgColumn: angle outside (0, pi/2)");
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      cos_.push_back(c);
      sin_.push_back(s);
      sum_log_cos_ += std::log(c);
      sum_log_sin_ += std::log(s);
    }
  }

  std::size_t size() const { return cos_.size(); }

  double log_likelihood(const MarginalParams& p) const {
    double sum_log_mix = 0.0;
    for (std::size_t i = 0; i < cos_.size(); ++i) sum_log_mix += std::log(cos_[i] + p.beta * sin_[i]);
    const double n = static_cast<double>(cos_.size());
    return n * (p.alpha2 * std::log(p.beta) - log_beta_fn(p.alpha1, p.alpha2)) + (p.alpha1 - 1.0) * sum_log_cos_ +
           (p.alpha2 - 1.0) * sum_log_sin_ - (p.alpha1 + p.alpha2) * sum_log_mix;
  }

 private:
  std::vector<double> cos_;
  std::vector<double> sin_;
  double sum_log_cos_ = 0.0;
  double sum_log_sin_ = 0.0;
};

}  // namespace pgcop
