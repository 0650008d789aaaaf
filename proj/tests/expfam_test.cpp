#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <gtest/gtest.h>

#include "mixmem/expfam.hpp"

using mixmem::ConjugatePrior;
using mixmem::PoissonGamma;
using Value = PoissonGamma::Value;

namespace {

double poisson_log_pmf(std::int64_t x, double theta) {
  return -theta + static_cast<double>(x) * std::log(theta) - std::lgamma(static_cast<double>(x) + 1.0);
}

}  // namespace

TEST(LogDensity, PoissonExamples) {
  EXPECT_DOUBLE_EQ(mixmem::log_density<PoissonGamma>(0, 1.0), -1.0);
  EXPECT_NEAR(mixmem::log_density<PoissonGamma>(2, 1.0), -1.6931471805599453, 1e-12);
  EXPECT_NEAR(mixmem::log_density<PoissonGamma>(3, 2.0), -1.7123179275482191, 1e-12);
}

TEST(LogDensity, DomainErrors) {
  EXPECT_THROW(mixmem::log_density<PoissonGamma>(-1, 1.0), mixmem::DomainError);
  EXPECT_THROW(mixmem::log_density<PoissonGamma>(1, 0.0), mixmem::DomainError);
  EXPECT_THROW(mixmem::log_density<PoissonGamma>(1, -2.0), mixmem::DomainError);
}

TEST(LogDensity, NormalizesOverSupport) {
  for (double theta : {0.5, 1.0, 5.0, 20.0}) {
    double total = 0.0;
    for (Value x = 0; x <= 2000; ++x) total += std::exp(mixmem::log_density<PoissonGamma>(x, theta));
    EXPECT_GE(total, 1.0 - 1e-10) << theta;
    EXPECT_LE(total, 1.0 + 1e-12) << theta;
  }
}

TEST(LogDensity, LargeCountsDoNotOverflow) {
  const double v = mixmem::log_density<PoissonGamma>(100000, 100000.0);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, poisson_log_pmf(100000, 100000.0), 1e-8);
}

TEST(ExpectedLogDensity, Examples) {
  const ConjugatePrior<1> gamma11{1.0, {0.0}};
  EXPECT_DOUBLE_EQ(mixmem::expected_log_density<PoissonGamma>(0, gamma11), -1.0);

  // x = 3 under Gamma(shape 2, rate 1): -E[theta] + 3 E[log theta].
  const ConjugatePrior<1> post{1.0, {1.0}};
  const double oracle = -2.0 + 3.0 * static_cast<double>(boost::math::digamma(2.0L));
  EXPECT_NEAR(mixmem::expected_log_density<PoissonGamma>(3, post), oracle, 1e-12);
  EXPECT_NEAR(mixmem::expected_log_density<PoissonGamma>(3, post), -0.7316469947045986, 1e-12);

  const double with_base = mixmem::expected_log_density<PoissonGamma>(3, post, true);
  EXPECT_NEAR(with_base, oracle - std::log(6.0), 1e-12);

  EXPECT_EQ(mixmem::expected_log_density<PoissonGamma>(7, post),
            mixmem::expected_log_density<PoissonGamma>(7, ConjugatePrior<1>{1.0, {1.0}}));
}

TEST(ExpectedLogDensity, RejectsInvalidHyperparameters) {
  EXPECT_THROW(mixmem::expected_log_density<PoissonGamma>(1, ConjugatePrior<1>{0.0, {1.0}}), mixmem::DomainError);
  EXPECT_THROW(mixmem::expected_log_density<PoissonGamma>(1, ConjugatePrior<1>{1.0, {-1.0}}), mixmem::DomainError);
}

TEST(ExpectedLogDensity, ConvergesToPointMass) {
  // Gamma with mean mu and shape t*mu: concentrates on mu as t grows.
  const double t = 1e6;
  for (double mu : {0.7, 3.0, 12.0}) {
    const ConjugatePrior<1> post{t, {t * mu - 1.0}};
    for (Value x : {0, 1, 4, 20}) {
      const double full = mixmem::expected_log_density<PoissonGamma>(x, post, true);
      EXPECT_NEAR(full, mixmem::log_density<PoissonGamma>(x, mu), 1e-4) << mu << " " << x;
    }
  }
}

TEST(PosteriorUpdate, Examples) {
  const std::vector<double> zero{0.0, 0.0};
  const std::vector<Value> data{2, 4};
  auto out = mixmem::posterior_update<PoissonGamma>(PoissonGamma::from_gamma(1.0, 0.01), zero, data);
  EXPECT_DOUBLE_EQ(out.eta, 0.01);
  EXPECT_DOUBLE_EQ(out.nu[0], 0.0);

  const std::vector<double> ones{1.0, 1.0};
  out = mixmem::posterior_update<PoissonGamma>(PoissonGamma::from_gamma(1.0, 1.0), ones, data);
  EXPECT_DOUBLE_EQ(out.eta, 3.0);
  EXPECT_DOUBLE_EQ(out.nu[0], 6.0);

  const std::vector<double> half{0.5, 0.5};
  out = mixmem::posterior_update<PoissonGamma>(PoissonGamma::from_gamma(0.01, 0.01), half, data);
  EXPECT_NEAR(out.eta, 1.01, 1e-15);
  EXPECT_NEAR(out.nu[0], 2.01, 1e-14);
}

TEST(PosteriorUpdate, LengthMismatch) {
  const std::vector<double> w{1.0};
  const std::vector<Value> data{1, 2};
  EXPECT_THROW(mixmem::posterior_update<PoissonGamma>(PoissonGamma::vague(), w, data), mixmem::DomainError);
}

TEST(PosteriorUpdate, StaysInConjugateFamily) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::poisson_distribution<Value> pois(4.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(10);
    std::vector<Value> x(10);
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = unif(rng);
      x[i] = pois(rng);
    }
    const auto prior = PoissonGamma::from_gamma(0.01 + 3.0 * unif(rng), 0.01 + 3.0 * unif(rng));
    EXPECT_TRUE(PoissonGamma::valid_prior(mixmem::posterior_update<PoissonGamma>(prior, w, x)));
  }
}

TEST(MleFromWeightedStats, Examples) {
  EXPECT_DOUBLE_EQ(mixmem::mle_from_weighted_stats<PoissonGamma>(std::vector<double>{1, 1, 1},
                                                                 std::vector<Value>{1, 2, 3}),
                   2.0);
  EXPECT_DOUBLE_EQ(mixmem::mle_from_weighted_stats<PoissonGamma>(std::vector<double>{1, 0},
                                                                 std::vector<Value>{5, 100}),
                   5.0);
  EXPECT_DOUBLE_EQ(mixmem::mle_from_weighted_stats<PoissonGamma>(std::vector<double>{0.25, 0.75},
                                                                 std::vector<Value>{0, 4}),
                   3.0);
}

TEST(MleFromWeightedStats, DegenerateWeights) {
  EXPECT_THROW(mixmem::mle_from_weighted_stats<PoissonGamma>(std::vector<double>{0.0, 1e-14},
                                                             std::vector<Value>{1, 2}),
               mixmem::DegenerateWeightsError);
}

TEST(MleFromWeightedStats, ConsistentForTrueRate) {
  const double truth = 6.5;
  std::mt19937_64 rng(99);
  std::poisson_distribution<Value> pois(truth);
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    std::vector<Value> x(n);
    for (auto& v : x) v = pois(rng);
    const std::vector<double> w(n, 1.0);
    const double est = mixmem::mle_from_weighted_stats<PoissonGamma>(w, x);
    EXPECT_NEAR(est, truth, 3.0 * std::sqrt(truth / static_cast<double>(n))) << n;
  }
}

TEST(PoissonGamma, PriorMapping) {
  const auto p = PoissonGamma::from_gamma(2.5, 0.5);
  EXPECT_DOUBLE_EQ(p.eta, 0.5);
  EXPECT_DOUBLE_EQ(p.nu[0], 1.5);
  EXPECT_THROW(PoissonGamma::from_gamma(0.0, 1.0), mixmem::DomainError);
  // log h(eta, nu) normalizes the Gamma density: integrate numerically.
  double integral = 0.0;
  const double step = 1e-4;
  for (double theta = step / 2; theta < 60.0; theta += step) {
    integral += std::exp(PoissonGamma::log_prior_normalizer(p) + p.eta * PoissonGamma::log_k(theta) +
                         PoissonGamma::natural(theta)[0] * p.nu[0]) *
                step;
  }
  EXPECT_NEAR(integral, 1.0, 1e-6);
}
