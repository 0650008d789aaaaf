#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mixmem/special.hpp"

namespace mixmem {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent restart seeds from a
/// master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t restart_seed(std::uint64_t master, std::size_t restart) {
  return mix_seed(master ^ mix_seed(static_cast<std::uint64_t>(restart) + 1));
}

/// Log of a Gamma(shape, 1) draw, stable for shapes far below 1 where the
/// draw itself underflows: G(a) = G(a + 1) U^(1/a).
inline double sample_log_gamma(double shape, Rng& rng) {
  std::gamma_distribution<double> gamma(shape + 1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double g = gamma(rng);
  const double u = 1.0 - unif(rng);  // (0, 1]
  return std::log(g) + std::log(u) / shape;
}

/// Dirichlet(alpha) draw, normalized in log space.
inline std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> logs(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0)) throw DomainError("sample_dirichlet: concentration must be positive");
    logs[i] = sample_log_gamma(alpha[i], rng);
  }
  special::normalize_log_weights(logs);
  return logs;
}

inline std::vector<double> sample_symmetric_dirichlet(std::size_t dim, double alpha, Rng& rng) {
  const std::vector<double> a(dim, alpha);
  return sample_dirichlet(a, rng);
}

/// Categorical draw from a probability vector.
inline std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding left u beyond the cumulative sum: take the last positive entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

}  // namespace mixmem
