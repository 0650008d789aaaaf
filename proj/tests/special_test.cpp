#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <gtest/gtest.h>

#include "digamma_table.inc"
#include "mixmem/special.hpp"

using mixmem::special::digamma;

TEST(Digamma, KnownValues) {
  EXPECT_NEAR(digamma(1.0), -0.5772156649015329, 1e-12);
  EXPECT_NEAR(digamma(2.0), 0.42278433509846714, 1e-12);
}

TEST(Digamma, MatchesHighPrecisionTable) {
  for (const auto& ref : kDigammaTable) {
    EXPECT_NEAR(digamma(ref.x), ref.value, 1e-10) << "x = " << ref.x;
  }
}

TEST(Digamma, MatchesBoostOnDenseGrid) {
  double worst = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double x = std::pow(10.0, -3.0 + 9.0 * i / 20000.0);
    const long double ref = boost::math::digamma(static_cast<long double>(x));
    worst = std::max(worst, static_cast<double>(std::abs(digamma(x) - ref)));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(Digamma, Recurrence) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(1e-6, 100.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = unif(rng);
    EXPECT_NEAR(digamma(x + 1.0) - digamma(x), 1.0 / x, 1e-10 * std::max(1.0, 1.0 / x)) << x;
  }
}

TEST(Digamma, RejectsNonPositive) {
  EXPECT_THROW(digamma(0.0), mixmem::DomainError);
  EXPECT_THROW(digamma(-1.5), mixmem::DomainError);
  EXPECT_THROW(digamma(std::numeric_limits<double>::quiet_NaN()), mixmem::DomainError);
}

TEST(LogSumExp, StableForLargeMagnitudes) {
  const std::vector<double> v{-1000.0, -1000.0};
  EXPECT_NEAR(mixmem::special::log_sum_exp(v), -1000.0 + std::log(2.0), 1e-12);
  const std::vector<double> inf{-std::numeric_limits<double>::infinity()};
  EXPECT_EQ(mixmem::special::log_sum_exp(inf), -std::numeric_limits<double>::infinity());
}

TEST(NormalizeLogWeights, ProducesSimplex) {
  std::vector<double> w{-1.0, -5.0, -std::numeric_limits<double>::infinity()};
  const double norm = mixmem::special::normalize_log_weights(w);
  EXPECT_NEAR(w[0], 1.0 / (1.0 + std::exp(-4.0)), 1e-15);
  EXPECT_EQ(w[2], 0.0);
  EXPECT_NEAR(norm, std::log(std::exp(-1.0) + std::exp(-5.0)), 1e-15);
  std::vector<double> bad{std::numeric_limits<double>::quiet_NaN(), 0.0};
  EXPECT_THROW(mixmem::special::normalize_log_weights(bad), mixmem::DomainError);
}

TEST(LogFactorial, LargeCountsStayFinite) {
  EXPECT_NEAR(mixmem::special::log_factorial(3.0), std::log(6.0), 1e-13);
  EXPECT_TRUE(std::isfinite(mixmem::special::log_factorial(1e9)));
}
