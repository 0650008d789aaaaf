#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mixmem/data.hpp"
#include "mixmem/vb.hpp"

namespace mixmem::testing {

inline CountMatrix make_counts(std::initializer_list<std::initializer_list<std::int64_t>> rows) {
  Grid<std::int64_t> v(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (auto x : row) v(r, c++) = x;
    ++r;
  }
  return CountMatrix(v);
}

/// Counts drawn from a few random Poisson rates per column.
inline CountMatrix random_counts(std::size_t n, std::size_t m, std::mt19937_64& rng, double max_rate = 12.0) {
  std::uniform_real_distribution<double> unif(0.2, max_rate);
  std::vector<double> rates{unif(rng), unif(rng), unif(rng)};
  std::uniform_int_distribution<std::size_t> pick(0, rates.size() - 1);
  Grid<std::int64_t> v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      std::poisson_distribution<std::int64_t> pois(rates[pick(rng)]);
      v(i, j) = pois(rng);
    }
  }
  return CountMatrix(v);
}

/// Rates base_g * (1 + U(-variation, variation)) per attribute.
inline RealGrid varied_rates(const std::vector<double>& base, std::size_t m, double variation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-variation, variation);
  RealGrid theta(static_cast<Eigen::Index>(base.size()), static_cast<Eigen::Index>(m));
  for (std::size_t g = 0; g < base.size(); ++g) {
    for (std::size_t j = 0; j < m; ++j) {
      theta(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(j)) = base[g] * (1.0 + unif(rng));
    }
  }
  return theta;
}

}  // namespace mixmem::testing
