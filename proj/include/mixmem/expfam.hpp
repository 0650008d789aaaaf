#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "mixmem/special.hpp"

namespace mixmem {

/// Weighted-statistics estimates are undefined when the total weight falls
/// below this floor.
inline constexpr double kDegenerateWeightFloor = 1e-12;

/// Point estimates of rates are clamped to at least this value before any
/// logarithm is taken.
inline constexpr double kRateFloor = 1e-10;

class DegenerateWeightsError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Hyperparameters (eta, nu) of the conjugate prior
///   p(theta | eta, nu) = h(eta, nu) k(theta)^eta exp{r(theta) . nu}.
/// The same shape carries the variational posterior (eta', nu').
template <std::size_t Dim>
struct ConjugatePrior {
  double eta = 0.0;
  std::array<double, Dim> nu{};

  friend bool operator==(const ConjugatePrior&, const ConjugatePrior&) = default;
};

/// A one-parameter exponential family with density
///   p(x | theta) = h(x) k(theta) exp{r(theta) . s(x)}
/// and its conjugate prior. Implementations are stateless; every member is a
/// pure static function.
template <class F>
concept ExponentialFamily = requires(typename F::Value x, double theta,
                                     const ConjugatePrior<F::stat_dim>& prior,
                                     const typename F::Stats& stats,
                                     std::mt19937_64& rng) {
  typename F::Value;
  { F::stat_dim } -> std::convertible_to<std::size_t>;
  requires std::same_as<typename F::Stats, std::array<double, F::stat_dim>>;
  { F::in_support(x) } -> std::same_as<bool>;
  { F::valid_param(theta) } -> std::same_as<bool>;
  { F::valid_prior(prior) } -> std::same_as<bool>;
  { F::log_base_measure(x) } -> std::same_as<double>;
  { F::log_k(theta) } -> std::same_as<double>;
  { F::natural(theta) } -> std::same_as<typename F::Stats>;
  { F::sufficient(x) } -> std::same_as<typename F::Stats>;
  { F::expected_log_k(prior) } -> std::same_as<double>;
  { F::expected_natural(prior) } -> std::same_as<typename F::Stats>;
  { F::log_prior_normalizer(prior) } -> std::same_as<double>;
  { F::posterior_mean(prior) } -> std::same_as<double>;
  { F::mle_from_mean_stats(stats) } -> std::same_as<double>;
  { F::sample(theta, rng) } -> std::same_as<typename F::Value>;
};

/// Poisson likelihood with its Gamma(alpha, beta) conjugate prior:
/// h(x) = 1/x!, k(theta) = exp(-theta), s(x) = x, r(theta) = log theta,
/// and (eta, nu) = (beta, alpha - 1).
struct PoissonGamma {
  using Value = std::int64_t;
  static constexpr std::size_t stat_dim = 1;
  using Stats = std::array<double, 1>;
  using Prior = ConjugatePrior<1>;

  static constexpr double kDefaultAlpha = 0.01;
  static constexpr double kDefaultBeta = 0.01;

  static Prior from_gamma(double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) {
      throw DomainError("Gamma prior needs alpha > 0 and beta > 0");
    }
    return Prior{beta, {alpha - 1.0}};
  }
  static Prior vague() { return from_gamma(kDefaultAlpha, kDefaultBeta); }

  static bool in_support(Value x) { return x >= 0; }
  static bool valid_param(double theta) { return theta > 0.0 && std::isfinite(theta); }
  static bool valid_prior(const Prior& p) {
    return p.eta > 0.0 && p.nu[0] > -1.0 && std::isfinite(p.eta) && std::isfinite(p.nu[0]);
  }

  static double log_base_measure(Value x) { return -special::log_factorial(static_cast<double>(x)); }
  static double log_k(double theta) { return -theta; }
  static Stats natural(double theta) { return {std::log(theta)}; }
  static Stats sufficient(Value x) { return {static_cast<double>(x)}; }

  /// E[-theta] under Gamma(nu + 1, eta).
  static double expected_log_k(const Prior& p) { return -(p.nu[0] + 1.0) / p.eta; }
  /// E[log theta] under Gamma(nu + 1, eta).
  static Stats expected_natural(const Prior& p) {
    return {special::digamma(p.nu[0] + 1.0) - std::log(p.eta)};
  }
  /// log h(eta, nu) = (nu + 1) log eta - log Gamma(nu + 1).
  static double log_prior_normalizer(const Prior& p) {
    return (p.nu[0] + 1.0) * std::log(p.eta) - special::log_gamma(p.nu[0] + 1.0);
  }
  /// E[theta] under Gamma(nu + 1, eta).
  static double posterior_mean(const Prior& p) { return (p.nu[0] + 1.0) / p.eta; }
  /// Inverse of the mean map E[s(x)] = theta.
  static double mle_from_mean_stats(const Stats& mean) { return mean[0]; }

  static Value sample(double theta, std::mt19937_64& rng) {
    std::poisson_distribution<Value> draw(theta);
    return draw(rng);
  }
};

static_assert(ExponentialFamily<PoissonGamma>);

template <std::size_t Dim>
double dot(const std::array<double, Dim>& a, const std::array<double, Dim>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < Dim; ++i) acc += a[i] * b[i];
  return acc;
}

/// log p(x | theta) = log h(x) + log k(theta) + r(theta) . s(x).
template <ExponentialFamily F>
double log_density(typename F::Value x, double theta) {
  if (!F::in_support(x)) throw DomainError("log_density: value outside support");
  if (!F::valid_param(theta)) throw DomainError("log_density: parameter outside parameter space");
  return F::log_base_measure(x) + F::log_k(theta) + dot(F::natural(theta), F::sufficient(x));
}

/// E_q[log p(x | theta)] for theta ~ q(eta', nu'). With include_base = false
/// the log h(x) term, which does not depend on theta, is left out.
template <ExponentialFamily F>
double expected_log_density(typename F::Value x, const ConjugatePrior<F::stat_dim>& posterior,
                            bool include_base = false) {
  if (!F::in_support(x)) throw DomainError("expected_log_density: value outside support");
  if (!F::valid_prior(posterior)) throw DomainError("expected_log_density: invalid hyperparameters");
  double value = F::expected_log_k(posterior) + dot(F::expected_natural(posterior), F::sufficient(x));
  if (include_base) value += F::log_base_measure(x);
  return value;
}

/// Conjugate update eta' = sum(w) + eta, nu' = sum(w s(x)) + nu.
template <ExponentialFamily F>
ConjugatePrior<F::stat_dim> posterior_update(const ConjugatePrior<F::stat_dim>& prior,
                                              std::span<const double> weights,
                                              std::span<const typename F::Value> data) {
  if (weights.size() != data.size()) {
    throw DomainError("posterior_update: " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(data.size()) + " observations");
  }
  ConjugatePrior<F::stat_dim> out = prior;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!F::in_support(data[i])) throw DomainError("posterior_update: value outside support");
    out.eta += weights[i];
    const auto s = F::sufficient(data[i]);
    for (std::size_t d = 0; d < F::stat_dim; ++d) out.nu[d] += weights[i] * s[d];
  }
  return out;
}

/// Maximum likelihood estimate from weighted data, solving
/// E_theta[s(x)] = sum(w s(x)) / sum(w). Throws DegenerateWeightsError when
/// sum(w) < kDegenerateWeightFloor.
template <ExponentialFamily F>
double mle_from_weighted_stats(std::span<const double> weights,
                               std::span<const typename F::Value> data) {
  if (weights.size() != data.size()) {
    throw DomainError("mle_from_weighted_stats: length mismatch");
  }
  double total = 0.0;
  typename F::Stats acc{};
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += weights[i];
    const auto s = F::sufficient(data[i]);
    for (std::size_t d = 0; d < F::stat_dim; ++d) acc[d] += weights[i] * s[d];
  }
  if (!(total >= kDegenerateWeightFloor)) {
    throw DegenerateWeightsError("mle_from_weighted_stats: total weight " + std::to_string(total) +
                                 " below floor");
  }
  for (auto& a : acc) a /= total;
  return F::mle_from_mean_stats(acc);
}

}  // namespace mixmem
