#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "pgcop/diagnostics.hpp"

using namespace pgcop;

namespace {

CorrelationMatrix rho2(double r) { return CorrelationMatrix::from_upper(2, std::vector<double>{r}); }

Chain chain_of(std::vector<ModelParams> draws) {
  Chain c;
  c.family = draws.front().copula.family;
  c.dimension = draws.front().dimension();
  c.draws = std::move(draws);
  for (std::size_t k = 0; k < c.draws.size(); ++k) c.iterations.push_back(k + 1);
  return c;
}

// A small chain of plausible draws around a reference model.
Chain jittered_chain(const ModelParams& centre, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<ModelParams> draws;
  for (std::size_t k = 0; k < size; ++k) {
    std::vector<MarginalParams> w;
    for (const auto& m : centre.marginals)
      w.emplace_back(m.alpha1 * std::exp(0.05 * n01(rng)), m.alpha2 * std::exp(0.05 * n01(rng)),
                     m.beta * std::exp(0.05 * n01(rng)));
    auto up = centre.copula.correlation.upper();
    for (auto& v : up) v = std::clamp(v + 0.02 * n01(rng), -0.95, 0.95);
    const auto r = CorrelationMatrix::from_upper(centre.dimension(), up);
    CopulaParams c = centre.copula.family == CopulaFamily::Gaussian
                         ? CopulaParams::gaussian(r)
                         : CopulaParams::student_t(centre.copula.nu * std::exp(0.05 * n01(rng)), r);
    draws.emplace_back(std::move(w), std::move(c));
  }
  return chain_of(std::move(draws));
}

}  // namespace

TEST(CredibleInterval, OrderStatisticExample) {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  const Interval iv = credible_interval(x, 0.95);
  EXPECT_NEAR(iv.lower, 3.475, 1e-12);
  EXPECT_NEAR(iv.upper, 97.525, 1e-12);
  EXPECT_FALSE(iv.degenerate);
}

TEST(CredibleInterval, ConstantIsDegenerate) {
  const std::vector<double> x(30, 4.2);
  const Interval iv = credible_interval(x, 0.95);
  EXPECT_EQ(iv.lower, 4.2);
  EXPECT_EQ(iv.upper, 4.2);
  EXPECT_TRUE(iv.degenerate);
}

TEST(CredibleInterval, SymmetricDraws) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  std::vector<double> x(20000);
  for (auto& v : x) v = n01(rng);
  const Interval iv = credible_interval(x, 0.9);
  EXPECT_NEAR(iv.lower, -iv.upper, 0.05);
  EXPECT_THROW(credible_interval(std::vector<double>{1.0}, 0.9), DomainError);
  EXPECT_THROW(credible_interval(x, 1.0), DomainError);
}

TEST(EffectiveSampleSize, IidNormal) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  std::vector<double> x(10000);
  for (auto& v : x) v = n01(rng);
  const double ess = effective_sample_size(x);
  EXPECT_GT(ess, 0.8 * 10000);
  EXPECT_LT(ess, 1.2 * 10000);
}

TEST(EffectiveSampleSize, Ar1) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  const double phi = 0.9;
  std::vector<double> x(50000);
  double v = n01(rng) / std::sqrt(1 - phi * phi);
  for (auto& e : x) {
    v = phi * v + n01(rng);
    e = v;
  }
  const double expected = 50000.0 * (1 - phi) / (1 + phi);
  EXPECT_NEAR(effective_sample_size(x) / expected, 1.0, 0.3);
}

TEST(EffectiveSampleSize, Errors) {
  EXPECT_THROW(effective_sample_size(std::vector<double>(100, 1.0)), DomainError);
  EXPECT_THROW(effective_sample_size(std::vector<double>(49, 1.0)), DomainError);
}

TEST(Geweke, StationaryVersusDrifting) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  std::vector<double> x(5000), y(5000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = n01(rng);
    y[i] = n01(rng) + (i < 1000 ? 3.0 : 0.0);
  }
  EXPECT_LT(std::fabs(geweke_z(x)), 4.0);
  EXPECT_GT(std::fabs(geweke_z(y)), 10.0);
  EXPECT_THROW(geweke_z(std::vector<double>(10, 0.5)), DomainError);
}

TEST(Summarize, FieldsAndDegenerateTrace) {
  const ModelParams p({{2, 2, 1}, {0.5, 0.5, 1}}, CopulaParams::gaussian(rho2(0.7)));
  Chain c = jittered_chain(p, 200, 5);
  // Freeze one parameter to check the degenerate path.
  for (auto& d : c.draws) d.marginals[0].beta = 1.0;
  const Summary s = summarize(c, 0.9);
  EXPECT_EQ(s.parameters.size(), 7u);
  EXPECT_EQ(s.draws, 200u);
  const auto& b = s.at("beta_1");
  EXPECT_TRUE(b.interval.degenerate);
  EXPECT_FALSE(b.ess.has_value());
  const auto& r = s.at("rho_1_2");
  EXPECT_LT(r.interval.lower, r.interval.upper);
  EXPECT_TRUE(r.ess.has_value());
  EXPECT_TRUE(r.geweke.has_value());
  EXPECT_NEAR(r.mean, 0.7, 0.01);
  EXPECT_THROW(s.at("nu"), std::out_of_range);
}

TEST(Lpml, SingleDrawIsLogLikelihood) {
  std::mt19937_64 rng(6);
  const ModelParams p({{2, 2, 1}, {0.5, 0.5, 1}}, CopulaParams::gaussian(rho2(0.7)));
  const Dataset d = simulate_dataset(p, 100, rng);
  const Chain c = chain_of({p});
  EXPECT_NEAR(lpml(d, c), log_likelihood(d, p), 1e-9);
}

TEST(Lpml, InvariantToOrderAndDuplication) {
  std::mt19937_64 rng(7);
  const ModelParams p({{2, 2, 1}, {0.8, 1.5, 2}}, CopulaParams::student_t(4.0, rho2(-0.4)));
  const Dataset d = simulate_dataset(p, 80, rng);
  const Chain c = jittered_chain(p, 40, 8);
  const double base = lpml(d, c);

  Chain reversed = c;
  std::reverse(reversed.draws.begin(), reversed.draws.end());
  EXPECT_NEAR(lpml(d, reversed), base, 1e-9);

  Chain doubled = c;
  for (const auto& draw : c.draws) doubled.draws.push_back(draw);
  EXPECT_NEAR(lpml(d, doubled), base, 1e-9);
}

TEST(Lpml, HarmonicMeanByDirectSum) {
  std::mt19937_64 rng(9);
  const ModelParams p({{1.5, 2, 1}, {2, 1.2, 0.7}}, CopulaParams::gaussian(rho2(0.3)));
  const Dataset d = simulate_dataset(p, 10, rng);
  const Chain c = jittered_chain(p, 5, 10);
  double ref = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double s = 0.0;
    for (const auto& draw : c.draws) s += 1.0 / std::exp(joint_log_pdf(d.row(i), draw));
    ref += -std::log(s / c.size());
  }
  EXPECT_NEAR(lpml(d, c), ref, 1e-10 * std::fabs(ref));
}

TEST(Lpml, DimensionMismatch) {
  std::mt19937_64 rng(11);
  const ModelParams p({{2, 2, 1}, {2, 2, 1}}, CopulaParams::gaussian(rho2(0.1)));
  const Dataset d3(Matrix::from_rows({{0.3, 0.4, 0.5}}));
  EXPECT_THROW(lpml(d3, chain_of({p})), DimensionMismatch);
}

TEST(PredictiveGrid, SingleIdentityDrawIsProductOfMarginals) {
  const ModelParams p({{2, 3, 1.5}, {1.5, 2, 0.8}}, CopulaParams::gaussian(CorrelationMatrix::identity(2)));
  const PredictiveGrid g = predictive_grid(chain_of({p}), 0, 1, 20);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) {
      const double ref = std::exp(pg_log_pdf(g.nodes[i], p.marginals[0]) + pg_log_pdf(g.nodes[j], p.marginals[1]));
      EXPECT_NEAR(g.density(i, j), ref, 1e-12 * ref);
    }
}

TEST(PredictiveGrid, MatchesJointDensityAverage) {
  const ModelParams p({{2, 3, 1.5}, {1.5, 2, 0.8}}, CopulaParams::student_t(5.0, rho2(0.5)));
  const Chain c = jittered_chain(p, 6, 12);
  const PredictiveGrid g = predictive_grid(c, 1, 0, 7);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      double ref = 0.0;
      for (const auto& d : c.draws) {
        const std::vector<double> x = {g.nodes[j], g.nodes[i]};  // axis_a is column 1
        ref += std::exp(joint_log_pdf(x, d));
      }
      ref /= c.size();
      EXPECT_NEAR(g.density(i, j), ref, 1e-10 * ref);
    }
}

TEST(PredictiveGrid, MassNearOneAndNonNegative) {
  const ModelParams p({{2, 3, 1.5}, {1.5, 2, 0.8}}, CopulaParams::student_t(4.0, rho2(0.6)));
  const PredictiveGrid g = predictive_grid(jittered_chain(p, 20, 13), 0, 1, 200);
  const double mass = grid_mass(g);
  EXPECT_GE(mass, 0.99);
  EXPECT_LE(mass, 1.01);
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t j = 0; j < 200; ++j) {
      EXPECT_TRUE(std::isfinite(g.density(i, j)));
      EXPECT_GE(g.density(i, j), 0.0);
    }
}

TEST(PredictiveGrid, SymmetricModelIsSymmetric) {
  const auto r = CorrelationMatrix::from_upper(3, std::vector<double>{0.4, 0.4, 0.4});
  const ModelParams p({{2, 2, 1.3}, {2, 2, 1.3}, {2, 2, 1.3}}, CopulaParams::student_t(6.0, r));
  const PredictiveGrid g = predictive_grid(chain_of({p}), 0, 2, 30);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 30; ++j) EXPECT_NEAR(g.density(i, j), g.density(j, i), 1e-10 * g.density(i, j));
}

TEST(PredictiveGrid, Errors) {
  const ModelParams p({{2, 2, 1}, {2, 2, 1}}, CopulaParams::gaussian(rho2(0.1)));
  EXPECT_THROW(predictive_grid(chain_of({p}), 0, 2, 10), DomainError);
  EXPECT_THROW(predictive_grid(chain_of({p}), 1, 1, 10), DomainError);
  EXPECT_THROW(predictive_grid(chain_of({p}), 0, 1, 1), DomainError);
  const PredictiveGrid g = predictive_grid(chain_of({p}), 0, 1, 2);
  EXPECT_EQ(g.nodes.size(), 2u);
  EXPECT_NEAR(g.nodes[0], half_pi / 4, 1e-15);
}
