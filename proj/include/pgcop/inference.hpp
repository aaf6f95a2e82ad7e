#pragma once

// Priors, the two conditional posterior targets and the two-stage sampler.
//
// Stage 1 samples the marginal parameters from the posterior that ignores the
// copula factor. Stage 2 then updates the copula parameters conditioned on
// each retained stage-1 draw, so the output pairs follow
// p(omega_Theta | D) p(omega_C | omega_Theta, D).

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pgcop/copula.hpp"
#include "pgcop/joint_model.hpp"
#include "pgcop/numerics.hpp"
#include "pgcop/projected_gamma.hpp"

namespace pgcop {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Priors
// ---------------------------------------------------------------------------

/// Ga(x | shape, rate); mean shape / rate.
struct GammaPrior {
  double shape = 1.0;
  double rate = 0.2;

  double log_density(double x) const {
    detail::require(std::isfinite(x) && x > 0.0, "GammaPrior: argument outside the support (0, inf)");
    return shape * std::log(rate) - log_gamma_fn(shape) + (shape - 1.0) * std::log(x) - rate * x;
  }

  bool valid() const { return std::isfinite(shape) && std::isfinite(rate) && shape > 0.0 && rate > 0.0; }
  bool operator==(const GammaPrior&) const = default;
};

struct MarginalPrior {
  GammaPrior alpha1;
  GammaPrior alpha2;
  GammaPrior beta;
  bool operator==(const MarginalPrior&) const = default;
};

/// Gamma priors per marginal, uniform correlations on the PD region, and a
/// gamma prior on nu - 2 for the t family. A single marginal entry is shared
/// by every coordinate.
struct PriorSpec {
  std::vector<MarginalPrior> marginals{MarginalPrior{}};
  GammaPrior nu_minus_two{1.0, 0.2};

  const MarginalPrior& marginal(std::size_t j) const { return marginals.size() == 1 ? marginals.front() : marginals.at(j); }

  void validate(std::size_t m) const {
    if (marginals.empty() || (marginals.size() != 1 && marginals.size() != m))
      throw ConfigError("PriorSpec: give one marginal prior or one per coordinate");
    for (const auto& mp : marginals)
      if (!mp.alpha1.valid() || !mp.alpha2.valid() || !mp.beta.valid())
        throw ConfigError("PriorSpec: gamma hyperparameters must be positive");
    if (!nu_minus_two.valid()) throw ConfigError("PriorSpec: nu prior hyperparameters must be positive");
  }
};

inline double log_prior_marginals(std::span<const MarginalParams> omega, const PriorSpec& prior) {
  if (prior.marginals.size() != 1 && prior.marginals.size() != omega.size())
    throw DimensionMismatch("log_prior_marginals: prior count differs from marginal count");
  double total = 0.0;
  for (std::size_t j = 0; j < omega.size(); ++j) {
    const MarginalPrior& p = prior.marginal(j);
    total += p.alpha1.log_density(omega[j].alpha1) + p.alpha2.log_density(omega[j].alpha2) +
             p.beta.log_density(omega[j].beta);
  }
  return total;
}

inline double log_prior_copula(const CopulaParams& copula, const PriorSpec& prior) {
  const std::size_t m = copula.dimension();
  // Positive definiteness is a constructor invariant of CorrelationMatrix.
  double total = static_cast<double>(m * (m - 1) / 2) * std::log(0.5);
  if (copula.family == CopulaFamily::StudentT) {
    if (!(copula.nu > 2.0)) throw DomainError("log_prior_copula: nu must exceed 2");
    total += prior.nu_minus_two.log_density(copula.nu - 2.0);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

/// Marginal-only posterior: sum of PG log densities over every cell plus the
/// marginal prior. The copula factor is deliberately absent.
inline double stage1_target(std::span<const MarginalParams> omega, const Dataset& data, const PriorSpec& prior) {
  if (omega.size() != data.dimension()) throw DimensionMismatch("stage1_target: marginal count differs from data");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data.dimension(); ++j) total += pg_log_pdf(data(i, j), omega[j]);
  return total + log_prior_marginals(omega, prior);
}

/// Copula log-likelihood of a dataset under fixed marginals. The clamped CDF
/// values are computed once; transformed scores are cached for the two most
/// recent (family, nu) keys so an accept/reject pair costs one transform.
class CopulaLikelihood {
 public:
  CopulaLikelihood(const Dataset& data, std::span<const MarginalParams> omega)
      : n_(data.size()), m_(data.dimension()), u_(data.size(), data.dimension()) {
    if (omega.size() != m_) throw DimensionMismatch("CopulaLikelihood: marginal count differs from data");
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < m_; ++j) u_(i, j) = clamp_probability(pg_cdf(data(i, j), omega[j]));
  }

  std::size_t size() const { return n_; }
  const Matrix& probabilities() const { return u_; }

  double log_likelihood(const CopulaParams& copula) {
    if (copula.dimension() != m_) throw DimensionMismatch("CopulaLikelihood: copula dimension differs from data");
    const Scores& s = scores_for(copula.family, copula.nu);
    const LowerTriangularFactor& factor = copula.correlation.factor();
    const double m = static_cast<double>(m_);
    double total = 0.0;
    if (copula.family == CopulaFamily::Gaussian) {
      for (std::size_t i = 0; i < n_; ++i) total += -0.5 * (factor.quadratic_form(s.z.row(i)) - s.row_term[i]);
      return total - static_cast<double>(n_) * factor.half_log_det();
    }
    const double nu = copula.nu;
    const double constant = log_gamma_fn(0.5 * (nu + m)) - log_gamma_fn(0.5 * nu) - 0.5 * m * std::log(nu * std::numbers::pi) -
                            factor.half_log_det();
    for (std::size_t i = 0; i < n_; ++i)
      total += -0.5 * (nu + m) * std::log1p(factor.quadratic_form(s.z.row(i)) / nu) - s.row_term[i];
    return total + static_cast<double>(n_) * constant;
  }

 private:
  struct Scores {
    bool filled = false;
    CopulaFamily family = CopulaFamily::Gaussian;
    double nu = 0.0;
    Matrix z;
    // Gaussian: z'z per row. t: sum_j ln t(z_ij | nu) per row.
    std::vector<double> row_term;
    std::uint64_t last_used = 0;
  };

  const Scores& scores_for(CopulaFamily family, double nu) {
    ++clock_;
    for (auto& s : slots_) {
      if (s.filled && s.family == family && (family == CopulaFamily::Gaussian || s.nu == nu)) {
        s.last_used = clock_;
        return s;
      }
    }
    Scores& s = slots_[0].last_used <= slots_[1].last_used ? slots_[0] : slots_[1];
    s.filled = true;
    s.family = family;
    s.nu = nu;
    s.last_used = clock_;
    s.z = Matrix(n_, m_);
    s.row_term.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double term = 0.0;
      for (std::size_t j = 0; j < m_; ++j) {
        if (family == CopulaFamily::Gaussian) {
          const double z = std_normal_quantile(u_(i, j));
          s.z(i, j) = z;
          term += z * z;
        } else {
          const double z = student_t_quantile(u_(i, j), nu);
          s.z(i, j) = z;
          term += student_t_log_pdf(z, nu);
        }
      }
      s.row_term[i] = term;
    }
    return s;
  }

  std::size_t n_;
  std::size_t m_;
  Matrix u_;
  std::array<Scores, 2> slots_{};
  std::uint64_t clock_ = 0;
};

/// Copula-only conditional posterior given fixed marginals.
inline double stage2_target(const CopulaParams& copula, std::span<const MarginalParams> omega, const Dataset& data,
                            const PriorSpec& prior) {
  CopulaLikelihood lik(data, omega);
  return lik.log_likelihood(copula) + log_prior_copula(copula, prior);
}

// ---------------------------------------------------------------------------
// Parameter naming and flattening
// ---------------------------------------------------------------------------

inline std::vector<std::string> parameter_names(std::size_t m, CopulaFamily family) {
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= m; ++j) {
    names.push_back("alpha_" + std::to_string(j) + "_1");
    names.push_back("alpha_" + std::to_string(j) + "_2");
    names.push_back("beta_" + std::to_string(j));
  }
  for (std::size_t r = 1; r <= m; ++r)
    for (std::size_t q = r + 1; q <= m; ++q) names.push_back("rho_" + std::to_string(r) + "_" + std::to_string(q));
  if (family == CopulaFamily::StudentT) names.push_back("nu");
  return names;
}

/// Values in parameter_names() order.
inline std::vector<double> flatten(const ModelParams& p) {
  std::vector<double> v;
  for (const auto& mp : p.marginals) {
    v.push_back(mp.alpha1);
    v.push_back(mp.alpha2);
    v.push_back(mp.beta);
  }
  for (double rho : p.copula.correlation.upper()) v.push_back(rho);
  if (p.copula.family == CopulaFamily::StudentT) v.push_back(p.copula.nu);
  return v;
}

inline ModelParams unflatten(std::span<const double> v, std::size_t m, CopulaFamily family) {
  const std::size_t expected = 3 * m + m * (m - 1) / 2 + (family == CopulaFamily::StudentT ? 1 : 0);
  if (v.size() != expected) throw DimensionMismatch("unflatten: wrong number of values");
  std::vector<MarginalParams> marginals;
  for (std::size_t j = 0; j < m; ++j) marginals.emplace_back(v[3 * j], v[3 * j + 1], v[3 * j + 2]);
  const auto upper = v.subspan(3 * m, m * (m - 1) / 2);
  CorrelationMatrix r = CorrelationMatrix::from_upper(m, upper);
  CopulaParams c = family == CopulaFamily::Gaussian ? CopulaParams::gaussian(std::move(r))
                                                    : CopulaParams::student_t(v.back(), std::move(r));
  return ModelParams(std::move(marginals), std::move(c));
}

// ---------------------------------------------------------------------------
// Sampler
// ---------------------------------------------------------------------------

/// Defaults mirror the 120,000 / 70,000 / 50 schedule of the simulated
/// bivariate example.
struct McmcConfig {
  std::size_t iterations = 120000;
  std::size_t burn_in = 70000;
  std::size_t thin = 50;
  std::uint64_t seed = 1;
  double initial_step = 0.1;       // stage 1, log-parameter scale
  double rho_step = 0.05;          // stage 2, per correlation
  double nu_step = 0.3;            // stage 2, on ln(nu - 2)
  double initial_nu = 5.0;
  std::size_t adapt_window = 500;  // stage-1 covariance refresh period during burn-in
  std::size_t stage2_burn_in = 500;
  std::size_t stage2_sweeps = 5;   // stage-2 sweeps per retained stage-1 draw
  double target_acceptance = 0.3;

  void validate() const {
    if (iterations == 0) throw ConfigError("McmcConfig: iterations must be positive");
    if (burn_in >= iterations) throw ConfigError("McmcConfig: burn_in must be smaller than iterations");
    if (thin < 1) throw ConfigError("McmcConfig: thin must be at least 1");
    if ((iterations - burn_in) / thin < 1) throw ConfigError("McmcConfig: schedule retains no draws");
    if (!(initial_step > 0.0 && rho_step > 0.0 && nu_step > 0.0)) throw ConfigError("McmcConfig: step sizes must be positive");
    if (!(initial_nu > 2.0)) throw ConfigError("McmcConfig: initial_nu must exceed 2");
    if (adapt_window < 1) throw ConfigError("McmcConfig: adapt_window must be at least 1");
    if (stage2_sweeps < 1) throw ConfigError("McmcConfig: stage2_sweeps must be at least 1");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
      throw ConfigError("McmcConfig: target_acceptance must lie in (0, 1)");
  }

  std::size_t retained() const { return (iterations - burn_in) / thin; }
};

/// Proposal scales of every block: stage-1 entries are the flattened
/// lower-triangular proposal factors, stage-2 entries the per-component steps.
struct StepSnapshot {
  std::vector<double> stage1;
  std::vector<double> stage2;
  bool operator==(const StepSnapshot&) const = default;
};

struct Chain {
  CopulaFamily family = CopulaFamily::Gaussian;
  std::size_t dimension = 0;
  std::vector<ModelParams> draws;
  std::vector<std::size_t> iterations;  // stage-1 iteration index of each draw
  std::vector<std::pair<std::string, double>> acceptance;
  McmcConfig config;
  std::string stage = "combined";
  StepSnapshot steps_after_burn_in;
  StepSnapshot steps_final;

  std::size_t size() const { return draws.size(); }
};

namespace detail {

inline std::string describe(std::span<const MarginalParams> omega) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t j = 0; j < omega.size(); ++j)
    os << (j ? "; " : "") << "omega_" << j + 1 << "=(" << omega[j].alpha1 << ", " << omega[j].alpha2 << ", "
       << omega[j].beta << ")";
  return os.str();
}

inline std::string describe(const CopulaParams& c) {
  std::ostringstream os;
  os.precision(17);
  os << "family=" << to_string(c.family) << " rho=(";
  const auto up = c.correlation.upper();
  for (std::size_t k = 0; k < up.size(); ++k) os << (k ? ", " : "") << up[k];
  os << ")";
  if (c.family == CopulaFamily::StudentT) os << " nu=" << c.nu;
  return os.str();
}

// Adaptive random-walk block on (ln alpha1, ln alpha2, ln beta) of one marginal.
class MarginalBlock {
 public:
  MarginalBlock(const PgColumn& column, const MarginalPrior& prior, double initial_step)
      : column_(&column), prior_(&prior) {
    for (std::size_t i = 0; i < 3; ++i) factor_[i * 3 + i] = initial_step;
    eta_ = {0.0, 0.0, 0.0};
    log_target_ = evaluate(eta_);
  }

  const std::array<double, 3>& eta() const { return eta_; }
  MarginalParams params() const { return {std::exp(eta_[0]), std::exp(eta_[1]), std::exp(eta_[2])}; }

  template <class Rng>
  bool step(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::array<double, 3> xi = {normal(rng), normal(rng), normal(rng)};
    const double scale = std::exp(log_scale_);
    std::array<double, 3> prop = eta_;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k <= i; ++k) prop[i] += scale * factor_[i * 3 + k] * xi[k];
    const double lt = evaluate(prop);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const bool accept = std::log(unif(rng)) < lt - log_target_;
    if (accept) {
      eta_ = prop;
      log_target_ = lt;
    }
    return accept;
  }

  // Robbins-Monro scaling plus a periodic refresh of the proposal shape from
  // the covariance of the recent burn-in path.
  void adapt(std::size_t t, bool accepted, double target, std::size_t window) {
    log_scale_ += std::pow(static_cast<double>(t), -0.6) * ((accepted ? 1.0 : 0.0) - target);
    log_scale_ = std::clamp(log_scale_, -10.0, 5.0);
    ++count_;
    std::array<double, 3> delta{};
    for (std::size_t i = 0; i < 3; ++i) {
      delta[i] = eta_[i] - mean_[i];
      mean_[i] += delta[i] / static_cast<double>(count_);
    }
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 3; ++k) comoment_[i * 3 + k] += delta[i] * (eta_[k] - mean_[k]);

    if (t % window == 0 && count_ > 50) {
      Matrix cov(3, 3);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 3; ++k)
          cov(i, k) = comoment_[i * 3 + k] / static_cast<double>(count_ - 1) + (i == k ? 1e-8 : 0.0);
      try {
        const LowerTriangularFactor f = cholesky(cov);
        for (std::size_t i = 0; i < 3; ++i)
          for (std::size_t k = 0; k < 3; ++k) factor_[i * 3 + k] = f(i, k);
        if (!shaped_) {
          log_scale_ = std::log(2.38 / std::sqrt(3.0));
          shaped_ = true;
        }
      } catch (const NotPositiveDefinite&) {
        // keep the previous shape
      }
    }
    // Restart the moments on a doubling schedule so the start-up transient
    // drops out of the shape estimate.
    if (next_reset_ == 0) next_reset_ = window;
    if (t == next_reset_) {
      count_ = 0;
      mean_ = {};
      comoment_ = {};
      next_reset_ *= 2;
    }
  }

  std::vector<double> snapshot() const {
    std::vector<double> v;
    const double scale = std::exp(log_scale_);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k <= i; ++k) v.push_back(scale * factor_[i * 3 + k]);
    return v;
  }

 private:
  double evaluate(const std::array<double, 3>& eta) const {
    const MarginalParams p{std::exp(eta[0]), std::exp(eta[1]), std::exp(eta[2])};
    if (!p.valid()) return -std::numeric_limits<double>::infinity();
    // Jacobian of the log transform: + sum eta.
    return column_->log_likelihood(p) + prior_->alpha1.log_density(p.alpha1) + prior_->alpha2.log_density(p.alpha2) +
           prior_->beta.log_density(p.beta) + eta[0] + eta[1] + eta[2];
  }

  const PgColumn* column_;
  const MarginalPrior* prior_;
  std::array<double, 3> eta_{};
  double log_target_ = 0.0;
  std::array<double, 9> factor_{};
  double log_scale_ = 0.0;
  bool shaped_ = false;
  std::size_t count_ = 0;
  std::size_t next_reset_ = 0;
  std::array<double, 3> mean_{};
  std::array<double, 9> comoment_{};
};

}  // namespace detail

struct Stage1Result {
  std::vector<std::vector<MarginalParams>> draws;
  std::vector<std::size_t> iterations;
  std::vector<double> acceptance;  // post burn-in, per marginal
  StepSnapshot steps_after_burn_in;
  StepSnapshot steps_final;
};

/// Metropolis-within-Gibbs over the marginal blocks; adaptation during
/// burn-in only.
template <class Rng>
Stage1Result run_stage1(const Dataset& data, const PriorSpec& prior, const McmcConfig& config, Rng& rng) {
  const std::size_t m = data.dimension();
  std::vector<PgColumn> columns;
  columns.reserve(m);
  for (std::size_t j = 0; j < m; ++j) columns.emplace_back(data.column(j));
  std::vector<detail::MarginalBlock> blocks;
  blocks.reserve(m);
  for (std::size_t j = 0; j < m; ++j) blocks.emplace_back(columns[j], prior.marginal(j), config.initial_step);

  auto snapshot = [&] {
    StepSnapshot s;
    for (const auto& b : blocks) {
      const auto v = b.snapshot();
      s.stage1.insert(s.stage1.end(), v.begin(), v.end());
    }
    return s;
  };

  Stage1Result out;
  out.acceptance.assign(m, 0.0);
  std::vector<std::size_t> accepted(m, 0);
  for (std::size_t t = 1; t <= config.iterations; ++t) {
    const bool burning = t <= config.burn_in;
    for (std::size_t j = 0; j < m; ++j) {
      const bool acc = blocks[j].step(rng);
      if (burning) {
        blocks[j].adapt(t, acc, config.target_acceptance, config.adapt_window);
      } else if (acc) {
        ++accepted[j];
      }
    }
    if (t == config.burn_in) out.steps_after_burn_in = snapshot();
    if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) {
      std::vector<MarginalParams> draw;
      for (const auto& b : blocks) draw.push_back(b.params());
      out.draws.push_back(std::move(draw));
      out.iterations.push_back(t);
    }
  }
  if (config.burn_in == 0) out.steps_after_burn_in = snapshot();
  out.steps_final = snapshot();
  const double post = static_cast<double>(config.iterations - config.burn_in);
  for (std::size_t j = 0; j < m; ++j) out.acceptance[j] = static_cast<double>(accepted[j]) / post;
  return out;
}

namespace detail {

// Componentwise random-walk updates of the copula parameters.
class CopulaUpdater {
 public:
  CopulaUpdater(CopulaParams start, const PriorSpec& prior, const McmcConfig& config)
      : state_(std::move(start)), prior_(&prior), target_acceptance_(config.target_acceptance) {
    const std::size_t m = state_.dimension();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t q = r + 1; q < m; ++q) pairs_.emplace_back(r, q);
    log_steps_.assign(pairs_.size(), std::log(config.rho_step));
    if (state_.family == CopulaFamily::StudentT) log_steps_.push_back(std::log(config.nu_step));
    accepted_.assign(log_steps_.size(), 0);
    proposed_.assign(log_steps_.size(), 0);
  }

  const CopulaParams& state() const { return state_; }

  void bind(CopulaLikelihood& lik, std::span<const MarginalParams> omega) {
    lik_ = &lik;
    omega_ = omega;
    log_target_ = lik_->log_likelihood(state_) + log_prior_copula(state_, *prior_);
    check(log_target_, state_);
  }

  template <class Rng>
  void sweep(Rng& rng, bool adapt) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ++sweeps_;
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [r, q] = pairs_[k];
      const double prop = state_.correlation(r, q) + std::exp(log_steps_[k]) * normal(rng);
      bool acc = false;
      if (prop > -1.0 && prop < 1.0) {
        try {
          CopulaParams next = state_;
          next.correlation = state_.correlation.with_entry(r, q, prop);
          const double lt = lik_->log_likelihood(next) + log_prior_copula(next, *prior_);
          check(lt, next);
          if (std::log(unif(rng)) < lt - log_target_) {
            state_ = std::move(next);
            log_target_ = lt;
            acc = true;
          }
        } catch (const NotPositiveDefinite&) {
          // outside the PD region: zero prior mass
        }
      }
      record(k, acc, adapt);
    }
    if (state_.family == CopulaFamily::StudentT) {
      const std::size_t k = pairs_.size();
      const double eta = std::log(state_.nu - 2.0);
      const double eta_prop = eta + std::exp(log_steps_[k]) * normal(rng);
      CopulaParams next = state_;
      next.nu = 2.0 + std::exp(eta_prop);
      bool acc = false;
      if (std::isfinite(next.nu) && next.nu > 2.0) {
        const double lt = lik_->log_likelihood(next) + log_prior_copula(next, *prior_);
        check(lt, next);
        // Jacobian of nu = 2 + exp(eta).
        if (std::log(unif(rng)) < (lt + eta_prop) - (log_target_ + eta)) {
          state_ = std::move(next);
          log_target_ = lt;
          acc = true;
        }
      }
      record(k, acc, adapt);
    }
  }

  std::vector<double> steps() const {
    std::vector<double> v;
    for (double l : log_steps_) v.push_back(std::exp(l));
    return v;
  }

  void reset_counts() {
    std::fill(accepted_.begin(), accepted_.end(), 0);
    std::fill(proposed_.begin(), proposed_.end(), 0);
  }

  std::vector<double> acceptance() const {
    std::vector<double> v;
    for (std::size_t k = 0; k < accepted_.size(); ++k)
      v.push_back(proposed_[k] ? static_cast<double>(accepted_[k]) / static_cast<double>(proposed_[k]) : 0.0);
    return v;
  }

 private:
  void record(std::size_t k, bool acc, bool adapt) {
    ++proposed_[k];
    if (acc) ++accepted_[k];
    if (adapt) {
      log_steps_[k] += std::pow(static_cast<double>(sweeps_), -0.6) * ((acc ? 1.0 : 0.0) - target_acceptance_);
      log_steps_[k] = std::clamp(log_steps_[k], -12.0, 3.0);
    }
  }

  void check(double value, const CopulaParams& at) const {
    if (std::isnan(value) || value == std::numeric_limits<double>::infinity()) {
      throw NumericalError("stage-2 target is not finite at " + describe(at) + " given " + describe(omega_));
    }
  }

  CopulaParams state_;
  const PriorSpec* prior_;
  double target_acceptance_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<double> log_steps_;
  std::vector<std::size_t> accepted_;
  std::vector<std::size_t> proposed_;
  std::size_t sweeps_ = 0;
  CopulaLikelihood* lik_ = nullptr;
  std::span<const MarginalParams> omega_;
  double log_target_ = 0.0;
};

}  // namespace detail

/// Stage 2 over a fixed sequence of stage-1 draws, warm-started draw to draw.
template <class Rng>
Chain run_stage2(const Dataset& data, CopulaFamily family, const Stage1Result& stage1, const PriorSpec& prior,
                 const McmcConfig& config, Rng& rng) {
  const std::size_t m = data.dimension();
  if (stage1.draws.empty()) throw ConfigError("run_stage2: no stage-1 draws");
  CorrelationMatrix start_r = CorrelationMatrix::identity(m);
  CopulaParams start = family == CopulaFamily::Gaussian ? CopulaParams::gaussian(start_r)
                                                        : CopulaParams::student_t(config.initial_nu, start_r);
  detail::CopulaUpdater updater(std::move(start), prior, config);

  Chain chain;
  chain.family = family;
  chain.dimension = m;
  chain.config = config;
  chain.iterations = stage1.iterations;
  chain.steps_after_burn_in = stage1.steps_after_burn_in;
  chain.steps_final = stage1.steps_final;

  {
    CopulaLikelihood lik(data, stage1.draws.front());
    updater.bind(lik, stage1.draws.front());
    for (std::size_t s = 0; s < config.stage2_burn_in; ++s) updater.sweep(rng, true);
  }
  chain.steps_after_burn_in.stage2 = updater.steps();
  updater.reset_counts();

  chain.draws.reserve(stage1.draws.size());
  for (const auto& omega : stage1.draws) {
    CopulaLikelihood lik(data, omega);
    updater.bind(lik, omega);
    for (std::size_t s = 0; s < config.stage2_sweeps; ++s) updater.sweep(rng, false);
    chain.draws.emplace_back(omega, updater.state());
  }
  chain.steps_final.stage2 = updater.steps();

  for (std::size_t j = 0; j < m; ++j)
    chain.acceptance.emplace_back("omega_" + std::to_string(j + 1), stage1.acceptance[j]);
  const auto acc2 = updater.acceptance();
  std::size_t k = 0;
  for (std::size_t r = 1; r <= m; ++r)
    for (std::size_t q = r + 1; q <= m; ++q)
      chain.acceptance.emplace_back("rho_" + std::to_string(r) + "_" + std::to_string(q), acc2[k++]);
  if (family == CopulaFamily::StudentT) chain.acceptance.emplace_back("nu", acc2[k]);
  return chain;
}

/// The full conditional two-stage sampler. Deterministic in (data, config).
inline Chain run_two_stage(const Dataset& data, CopulaFamily family, const PriorSpec& prior, const McmcConfig& config) {
  if (data.dimension() < 2) throw ConfigError("run_two_stage: at least two angle columns are required");
  config.validate();
  prior.validate(data.dimension());
  std::mt19937_64 rng(config.seed);
  const Stage1Result stage1 = run_stage1(data, prior, config, rng);
  return run_stage2(data, family, stage1, prior, config, rng);
}

}  // namespace pgcop
