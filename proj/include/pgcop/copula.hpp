#pragma once

// Implicit (elliptical) copulas: Gaussian and Student t.

#include <cmath>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pgcop/numerics.hpp"

namespace pgcop {

/// Symmetric, unit-diagonal, positive-definite matrix with its Cholesky factor.
class CorrelationMatrix {
 public:
  explicit CorrelationMatrix(Matrix r) : matrix_(std::move(r)) {
    const std::size_t m = matrix_.rows();
    if (m < 2 || matrix_.cols() != m) throw DomainError("CorrelationMatrix: must be square with dimension >= 2");
    for (std::size_t i = 0; i < m; ++i) {
      if (matrix_(i, i) != 1.0) throw DomainError("CorrelationMatrix: diagonal entries must be exactly 1");
      for (std::size_t j = 0; j < i; ++j) {
        const double v = matrix_(i, j);
        if (v != matrix_(j, i)) throw DomainError("CorrelationMatrix: matrix is not symmetric");
        if (!(v > -1.0 && v < 1.0)) throw DomainError("CorrelationMatrix: off-diagonal entries must lie in (-1, 1)");
      }
    }
    factor_ = cholesky(matrix_);
  }

  static CorrelationMatrix identity(std::size_t m) { return CorrelationMatrix(Matrix::identity(m)); }

  /// Builds R from its strict upper triangle listed row-wise: rho_12, rho_13, ..., rho_23, ...
  static CorrelationMatrix from_upper(std::size_t m, std::span<const double> upper) {
    if (upper.size() != m * (m - 1) / 2) throw DimensionMismatch("CorrelationMatrix::from_upper: wrong entry count");
    Matrix r = Matrix::identity(m);
    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        r(i, j) = upper[k];
        r(j, i) = upper[k];
        ++k;
      }
    return CorrelationMatrix(std::move(r));
  }

  std::size_t dimension() const { return matrix_.rows(); }
  double operator()(std::size_t r, std::size_t q) const { return matrix_(r, q); }
  const Matrix& matrix() const { return matrix_; }
  const LowerTriangularFactor& factor() const { return factor_; }

  std::vector<double> upper() const {
    std::vector<double> out;
    const std::size_t m = dimension();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) out.push_back(matrix_(i, j));
    return out;
  }

  /// Copy with entry (r, q) and (q, r) replaced. Throws DomainError outside
  /// (-1, 1) and NotPositiveDefinite when the result leaves the PD region.
  CorrelationMatrix with_entry(std::size_t r, std::size_t q, double value) const {
    Matrix next = matrix_;
    next(r, q) = value;
    next(q, r) = value;
    return CorrelationMatrix(std::move(next));
  }

  /// The 2x2 correlation of coordinates (a, b).
  CorrelationMatrix pair(std::size_t a, std::size_t b) const {
    Matrix r = Matrix::identity(2);
    r(0, 1) = r(1, 0) = matrix_(a, b);
    return CorrelationMatrix(std::move(r));
  }

  bool operator==(const CorrelationMatrix& other) const { return matrix_ == other.matrix_; }

 private:
  Matrix matrix_;
  LowerTriangularFactor factor_;
};

enum class CopulaFamily { Gaussian, StudentT };

inline std::string to_string(CopulaFamily f) { return f == CopulaFamily::Gaussian ? "gaussian" : "t"; }

inline CopulaFamily parse_family(const std::string& s) {
  if (s == "gaussian" || s == "G" || s == "normal") return CopulaFamily::Gaussian;
  if (s == "t" || s == "T" || s == "student_t") return CopulaFamily::StudentT;
  throw DomainError("unknown copula family '" + s + "' (expected 'gaussian' or 't')");
}

struct CopulaParams {
  CopulaFamily family = CopulaFamily::Gaussian;
  CorrelationMatrix correlation = CorrelationMatrix::identity(2);
  double nu = 0.0;  // degrees of freedom, meaningful only for StudentT

  static CopulaParams gaussian(CorrelationMatrix r) { return {CopulaFamily::Gaussian, std::move(r), 0.0}; }

  static CopulaParams student_t(double nu, CorrelationMatrix r) {
    if (!(std::isfinite(nu) && nu > 2.0)) {
      std::ostringstream os;
      os << "CopulaParams: t copula requires nu > 2, got " << nu;
      throw DomainError(os.str());
    }
    return {CopulaFamily::StudentT, std::move(r), nu};
  }

  std::size_t dimension() const { return correlation.dimension(); }
  bool operator==(const CopulaParams&) const = default;
};

// Log copula densities evaluated at already-transformed scores z.

/// ln c_G from normal scores: -ln|L| - (z' R^{-1} z - z'z) / 2.
inline double gaussian_copula_log_density_scores(std::span<const double> z, const LowerTriangularFactor& factor) {
  double zz = 0.0;
  for (double v : z) zz += v * v;
  return -factor.half_log_det() - 0.5 * (factor.quadratic_form(z) - zz);
}

inline double t_copula_log_density_scores(std::span<const double> z, double nu, const LowerTriangularFactor& factor) {
  double marginal = 0.0;
  for (double v : z) marginal += student_t_log_pdf(v, nu);
  return mvt_log_pdf(z, nu, factor) - marginal;
}

namespace detail {

inline void check_probabilities(std::span<const double> u, std::size_t m, const char* who) {
  if (u.size() != m) throw DimensionMismatch(std::string(who) + ": vector length differs from copula dimension");
  for (double v : u)
    if (!(v > 0.0 && v < 1.0)) throw DomainError(std::string(who) + ": probabilities must lie strictly inside (0, 1)");
}

}  // namespace detail

inline double gaussian_copula_log_density(std::span<const double> u, const CorrelationMatrix& r) {
  detail::check_probabilities(u, r.dimension(), "gaussian_copula_log_density");
  std::vector<double> z(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) z[j] = std_normal_quantile(u[j]);
  return gaussian_copula_log_density_scores(z, r.factor());
}

inline double t_copula_log_density(std::span<const double> u, double nu, const CorrelationMatrix& r) {
  detail::check_probabilities(u, r.dimension(), "t_copula_log_density");
  detail::require(std::isfinite(nu) && nu > 2.0, "t_copula_log_density: nu must exceed 2");
  std::vector<double> z(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) z[j] = student_t_quantile(u[j], nu);
  return t_copula_log_density_scores(z, nu, r.factor());
}

inline double copula_log_density(std::span<const double> u, const CopulaParams& c) {
  return c.family == CopulaFamily::Gaussian ? gaussian_copula_log_density(u, c.correlation)
                                            : t_copula_log_density(u, c.nu, c.correlation);
}

/// One draw on the unit hypercube. Gaussian: u = Phi(L xi). t: the same
/// normal vector scaled by sqrt(nu / chi2_nu), mapped through T(.|nu).
template <class Rng>
std::vector<double> copula_sample(const CopulaParams& c, Rng& rng) {
  const std::size_t m = c.dimension();
  const Matrix& l = c.correlation.factor().lower();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> xi(m);
  for (auto& v : xi) v = normal(rng);
  std::vector<double> z(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k <= i; ++k) z[i] += l(i, k) * xi[k];

  std::vector<double> u(m);
  if (c.family == CopulaFamily::Gaussian) {
    for (std::size_t j = 0; j < m; ++j) u[j] = std_normal_cdf(z[j]);
  } else {
    std::chi_squared_distribution<double> chi2(c.nu);
    const double scale = std::sqrt(c.nu / chi2(rng));
    for (std::size_t j = 0; j < m; ++j) u[j] = student_t_cdf(z[j] * scale, c.nu);
  }
  return u;
}

}  // namespace pgcop
