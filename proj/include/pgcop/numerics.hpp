#pragma once

// Special functions and small dense linear algebra shared by every other
// header. Everything here is a pure function of its arguments.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgcop {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gamma and beta functions
// ---------------------------------------------------------------------------

/// ln Gamma(x) for x > 0 (Lanczos, g = 607/128, 15 terms).
inline double log_gamma_fn(double x) {
  detail::require(std::isfinite(x) && x > 0.0, "log_gamma_fn: x must be positive and finite");
  if (x == 1.0 || x == 2.0) return 0.0;
  if (x < 0.5) return log_gamma_fn(x + 1.0) - std::log(x);

  static constexpr double g = 607.0 / 128.0;
  static constexpr std::array<double, 15> c = {
      0.99999999999999709182,     57.156235665862923517,     -59.597960355475491248,
      14.136097974741747174,      -0.49191381609762019978,   .33994649984811888699e-4,
      .46523628927048575665e-4,   -.98374475304879564677e-4, .15808870322491248884e-3,
      -.21026444172410488319e-3,  .21743961811521264320e-3,  -.16431810653676389022e-3,
      .84418223983852743293e-4,   -.26190838401581408670e-4, .36899182659531622704e-5};

  const double z = x - 1.0;
  double a = c[0];
  for (std::size_t k = 1; k < c.size(); ++k) a += c[k] / (z + static_cast<double>(k));
  const double t = z + g + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(a);
}

inline double log_beta_fn(double a, double b) {
  return log_gamma_fn(a) + log_gamma_fn(b) - log_gamma_fn(a + b);
}

namespace detail {

// Modified Lentz evaluation of the incomplete beta continued fraction.
inline double inc_beta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double dm = m;
    const double m2 = 2.0 * dm;
    double aa = dm * (b - dm) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + dm) * (qab + dm) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double reg_inc_beta(double x, double a, double b) {
  detail::require(std::isfinite(a) && std::isfinite(b) && a > 0.0 && b > 0.0,
                  "reg_inc_beta: shape parameters must be positive");
  detail::require(x >= 0.0 && x <= 1.0, "reg_inc_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta_fn(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * detail::inc_beta_cf(x, a, b) / a;
  }
  return 1.0 - std::exp(log_front) * detail::inc_beta_cf(1.0 - x, b, a) / b;
}

namespace detail {

// Root of I_x(a, b) = p on (0, hi], where p < I_hi(a, b) and hi is the mean.
inline double inc_beta_inv_lower(double p, double a, double b, double hi) {
  const double lbeta = log_beta_fn(a, b);
  double lo = 0.0;
  double x = std::exp((std::log(a * p) + lbeta) / a);
  if (!(x > 0.0 && x < hi)) x = 0.5 * hi;
  for (int it = 0; it < 300; ++it) {
    const double f = reg_inc_beta(x, a, b) - p;
    if (f == 0.0) return x;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double log_pdf = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - lbeta;
    double next = x - f / std::exp(log_pdf);
    if (!(next > lo && next < hi) || !std::isfinite(next)) {
      // Bisect, geometrically when the bracket spans many decades near 0.
      next = (lo > 0.0 && hi / lo > 1e3) ? std::sqrt(lo * hi)
             : (lo == 0.0 && hi < 1e-3)  ? hi * 1e-3
                                         : 0.5 * (lo + hi);
    }
    if (std::fabs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * x ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      return next;
    }
    x = next;
  }
  return x;
}

}  // namespace detail

/// Inverse of I_x(a, b) in x. Roots above the mean are found through
/// 1 - I_x(a, b) = I_{1-x}(b, a) so that the upper tail keeps its precision.
inline double reg_inc_beta_inv(double p, double a, double b) {
  detail::require(std::isfinite(a) && std::isfinite(b) && a > 0.0 && b > 0.0,
                  "reg_inc_beta_inv: shape parameters must be positive");
  detail::require(p >= 0.0 && p <= 1.0, "reg_inc_beta_inv: p must lie in [0, 1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double mean = a / (a + b);
  if (p < reg_inc_beta(mean, a, b)) return detail::inc_beta_inv_lower(p, a, b, mean);
  return 1.0 - detail::inc_beta_inv_lower(1.0 - p, b, a, b / (a + b));
}

// ---------------------------------------------------------------------------
// Normal and Student t
// ---------------------------------------------------------------------------

inline double std_normal_log_pdf(double z) {
  return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double std_normal_cdf(double z) {
  detail::require(!std::isnan(z), "std_normal_cdf: z is NaN");
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// Wichura's AS241 (PPND16), relative accuracy about 1e-16.
inline double std_normal_quantile(double p) {
  detail::require(p > 0.0 && p < 1.0, "std_normal_quantile: p must lie strictly inside (0, 1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

inline double student_t_log_pdf(double x, double nu) {
  detail::require(std::isfinite(nu) && nu > 0.0, "student_t_log_pdf: nu must be positive");
  return log_gamma_fn(0.5 * (nu + 1.0)) - log_gamma_fn(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
         0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

namespace detail {

// P(T > x) for x >= 0.
inline double student_t_upper_tail(double x, double nu) {
  const double x2 = x * x;
  if (x2 < nu) return 0.5 * (1.0 - reg_inc_beta(x2 / (nu + x2), 0.5, 0.5 * nu));
  return 0.5 * reg_inc_beta(nu / (nu + x2), 0.5 * nu, 0.5);
}

// Hill's approximation (CACM algorithm 396) to the positive quantile with
// two-sided tail probability p; valid for nu >= 1.
inline double student_t_hill(double p, double nu) {
  if (nu == 2.0) return std::sqrt(2.0 / (p * (2.0 - p)) - 2.0);
  if (nu == 1.0) {
    const double h = p * 0.5 * std::numbers::pi;
    return std::cos(h) / std::sin(h);
  }
  const double a = 1.0 / (nu - 0.5);
  const double b = 48.0 / (a * a);
  double c = ((20700.0 * a / b - 98.0) * a - 16.0) * a + 96.36;
  const double d = ((94.5 / (b + c) - 3.0) / b + 1.0) * std::sqrt(a * 0.5 * std::numbers::pi) * nu;
  double y = std::pow(d * p, 2.0 / nu);
  if (y > 0.05 + a) {
    const double x = std_normal_quantile(0.5 * p);
    y = x * x;
    if (nu < 5.0) c += 0.3 * (nu - 4.5) * (x + 0.6);
    c = (((0.05 * d * x - 5.0) * x - 7.0) * x - 2.0) * x + b + c;
    y = (((((0.4 * y + 6.3) * y + 36.0) * y + 94.5) / c - y - 3.0) / b + 1.0) * x;
    y = std::expm1(a * y * y);
  } else {
    y = ((1.0 / (((nu + 6.0) / (nu * y) - 0.089 * d - 0.822) * (nu + 2.0) * 3.0) + 0.5 / (nu + 4.0)) * y - 1.0) *
            (nu + 1.0) / (nu + 2.0) +
        1.0 / y;
  }
  return std::sqrt(nu * y);
}

// Positive quantile by inverting the incomplete beta directly.
inline double student_t_quantile_by_beta(double tail, double nu) {
  if (tail > 0.25) {
    // I_w(1/2, nu/2) = 1 - 2 tail with w = x^2 / (nu + x^2).
    const double w = reg_inc_beta_inv(1.0 - 2.0 * tail, 0.5, 0.5 * nu);
    return std::sqrt(nu * w / (1.0 - w));
  }
  const double v = reg_inc_beta_inv(2.0 * tail, 0.5 * nu, 0.5);
  return std::sqrt(nu * (1.0 - v) / v);
}

}  // namespace detail

inline double student_t_cdf(double x, double nu) {
  detail::require(std::isfinite(nu) && nu > 0.0, "student_t_cdf: nu must be positive");
  detail::require(!std::isnan(x), "student_t_cdf: x is NaN");
  if (x == 0.0) return 0.5;
  if (std::isinf(x)) return x > 0.0 ? 1.0 : 0.0;
  const double tail = detail::student_t_upper_tail(std::fabs(x), nu);
  return x > 0.0 ? 1.0 - tail : tail;
}

/// Hill's approximation polished by Newton steps on the tail probability,
/// with the incomplete-beta inverse as a fallback.
inline double student_t_quantile(double p, double nu) {
  detail::require(std::isfinite(nu) && nu > 0.0, "student_t_quantile: nu must be positive");
  detail::require(p > 0.0 && p < 1.0, "student_t_quantile: p must lie strictly inside (0, 1)");
  if (p == 0.5) return 0.0;
  const double tail = p < 0.5 ? p : 1.0 - p;  // P(T > |x|)
  double magnitude = std::numeric_limits<double>::quiet_NaN();
  if (nu >= 1.0) {
    const double log_norm = log_gamma_fn(0.5 * (nu + 1.0)) - log_gamma_fn(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
    double x = detail::student_t_hill(2.0 * tail, nu);
    for (int it = 0; it < 8 && std::isfinite(x) && x > 0.0; ++it) {
      const double pdf = std::exp(log_norm - 0.5 * (nu + 1.0) * std::log1p(x * x / nu));
      double next = x + (detail::student_t_upper_tail(x, nu) - tail) / pdf;
      if (!(next > 0.0)) next = 0.5 * x;
      if (std::fabs(next - x) <= 1e-14 * next) {
        magnitude = next;
        break;
      }
      x = next;
    }
  }
  if (!std::isfinite(magnitude)) magnitude = detail::student_t_quantile_by_beta(tail, nu);
  return p < 0.5 ? -magnitude : magnitude;
}

// ---------------------------------------------------------------------------
// Dense matrices
// ---------------------------------------------------------------------------

/// Row-major dense matrix, sized for the handful of dimensions a copula needs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      if (rows[i].size() != c) throw DimensionMismatch("Matrix::from_rows: ragged rows");
      for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw DimensionMismatch("Matrix product: inner dimensions differ");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Cholesky factor L of a symmetric positive-definite matrix (A = L L^T).
class LowerTriangularFactor {
 public:
  std::size_t dimension() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }
  double operator()(std::size_t i, std::size_t j) const { return lower_(i, j); }

  /// sum_i ln L_ii = ln sqrt(det A)
  double half_log_det() const { return half_log_det_; }

  /// Squared Mahalanobis norm z^T A^{-1} z by forward substitution.
  double quadratic_form(std::span<const double> z) const {
    const std::size_t n = dimension();
    if (z.size() != n) throw DimensionMismatch("quadratic_form: vector length differs from factor dimension");
    // Dimensions here are tiny; a fixed stack buffer avoids a heap hit per call.
    std::array<double, 16> small{};
    std::vector<double> large;
    double* w = small.data();
    if (n > small.size()) {
      large.resize(n);
      w = large.data();
    }
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = z[i];
      for (std::size_t k = 0; k < i; ++k) s -= lower_(i, k) * w[k];
      w[i] = s / lower_(i, i);
      q += w[i] * w[i];
    }
    return q;
  }

  Matrix reconstruct() const { return lower_ * lower_.transpose(); }

  friend LowerTriangularFactor cholesky(const Matrix& a);

 private:
  Matrix lower_;
  double half_log_det_ = 0.0;
};

/// Throws NotPositiveDefinite when a pivot is not strictly positive.
inline LowerTriangularFactor cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw DimensionMismatch("cholesky: matrix is not square");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double scale = std::max({1.0, std::fabs(a(i, j)), std::fabs(a(j, i))});
      if (std::fabs(a(i, j) - a(j, i)) > 1e-12 * scale) throw DomainError("cholesky: matrix is not symmetric");
    }
  LowerTriangularFactor f;
  f.lower_ = Matrix(n, n);
  Matrix& l = f.lower_;
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefinite("cholesky: matrix is not positive definite");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    f.half_log_det_ += std::log(ljj);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return f;
}

/// log phi_m(z | R) for a zero-mean normal with the factored covariance.
inline double mvn_log_pdf(std::span<const double> z, const LowerTriangularFactor& factor) {
  const double m = static_cast<double>(factor.dimension());
  return -0.5 * m * std::log(2.0 * std::numbers::pi) - factor.half_log_det() - 0.5 * factor.quadratic_form(z);
}

/// log t_m(z | nu, R): location 0, scale matrix R.
inline double mvt_log_pdf(std::span<const double> z, double nu, const LowerTriangularFactor& factor) {
  detail::require(std::isfinite(nu) && nu > 0.0, "mvt_log_pdf: nu must be positive");
  const double m = static_cast<double>(factor.dimension());
  const double q = factor.quadratic_form(z);
  return log_gamma_fn(0.5 * (nu + m)) - log_gamma_fn(0.5 * nu) - 0.5 * m * std::log(nu * std::numbers::pi) -
         factor.half_log_det() - 0.5 * (nu + m) * std::log1p(q / nu);
}

/// Stable ln(sum exp(v)).
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

}  // namespace pgcop
