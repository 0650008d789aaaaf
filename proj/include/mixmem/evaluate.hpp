#pragma once

// Post-fit summaries. Profile and group indices are 0-based in this API;
// report writers add 1 when printing.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mixmem/data.hpp"
#include "mixmem/expfam.hpp"
#include "mixmem/mixture.hpp"
#include "mixmem/vb.hpp"

namespace mixmem {

using ProfileSet = std::vector<std::size_t>;

namespace detail {

inline void check_simplex(std::span<const double> p, const char* what, double tol = 1e-8) {
  if (p.empty()) throw DomainError(std::string(what) + ": empty probability vector");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= -tol) || !std::isfinite(v)) throw DomainError(std::string(what) + ": entries must be non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > tol) throw DomainError(std::string(what) + ": entries must sum to 1");
}

}  // namespace detail

/// Extent of membership exp(-sum tau log tau), with 0 log 0 = 0.
inline double eom(std::span<const double> tau) {
  detail::check_simplex(tau, "eom");
  double entropy = 0.0;
  for (double t : tau) {
    if (t > 0.0) entropy -= t * std::log(t);
  }
  return std::exp(entropy);
}

/// argmax; the lowest index wins ties.
inline std::size_t map_assign(std::span<const double> probs) {
  if (probs.empty()) throw DomainError("map_assign: empty probability vector");
  std::size_t best = 0;
  for (std::size_t g = 1; g < probs.size(); ++g) {
    if (probs[g] > probs[best]) best = g;
  }
  return best;
}

/// 1 - max_g p_g.
inline double uncertainty(std::span<const double> probs) {
  if (probs.empty()) throw DomainError("uncertainty: empty probability vector");
  return 1.0 - *std::max_element(probs.begin(), probs.end());
}

/// Sorted distinct profiles appearing in one row of MAP assignments.
inline ProfileSet profile_set(std::span<const std::size_t> row) {
  ProfileSet out(row.begin(), row.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// "{1,3}" with 1-based labels.
inline std::string format_profile_set(const ProfileSet& set) {
  std::string out = "{";
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(set[i] + 1);
  }
  return out + "}";
}

struct ProfileAssignment {
  Grid<std::int32_t> map_z;  ///< N x M
  std::vector<ProfileSet> profile_sets;
  RealGrid uncertainty;  ///< N x M, in [0, 1 - 1/G]
};

inline ProfileAssignment assign_profiles(const PhiTensor& phi) {
  const std::size_t n_obs = phi.observations(), n_attr = phi.attributes();
  ProfileAssignment out;
  out.map_z.resize(static_cast<Eigen::Index>(n_obs), static_cast<Eigen::Index>(n_attr));
  out.uncertainty.resize(static_cast<Eigen::Index>(n_obs), static_cast<Eigen::Index>(n_attr));
  out.profile_sets.reserve(n_obs);
  std::vector<std::size_t> row(n_attr);
  for (std::size_t n = 0; n < n_obs; ++n) {
    for (std::size_t m = 0; m < n_attr; ++m) {
      const auto cell = phi.cell(n, m);
      row[m] = map_assign(cell);
      out.map_z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) = static_cast<std::int32_t>(row[m]);
      out.uncertainty(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) = uncertainty(cell);
    }
    out.profile_sets.push_back(profile_set(row));
  }
  return out;
}

inline std::vector<double> eom_values(const RealGrid& tau_hat) {
  std::vector<double> out(static_cast<std::size_t>(tau_hat.rows()));
  std::vector<double> row(static_cast<std::size_t>(tau_hat.cols()));
  for (Eigen::Index n = 0; n < tau_hat.rows(); ++n) {
    for (Eigen::Index g = 0; g < tau_hat.cols(); ++g) row[static_cast<std::size_t>(g)] = tau_hat(n, g);
    out[static_cast<std::size_t>(n)] = eom(row);
  }
  return out;
}

struct MixtureAssignment {
  std::vector<std::size_t> groups;  ///< Zhat^mix, one per observation
  std::vector<double> uncertainty;  ///< U^mix, one per observation
};

inline MixtureAssignment mixture_map_and_uncertainty(const RealGrid& resp) {
  MixtureAssignment out;
  std::vector<double> row(static_cast<std::size_t>(resp.cols()));
  for (Eigen::Index n = 0; n < resp.rows(); ++n) {
    for (Eigen::Index g = 0; g < resp.cols(); ++g) row[static_cast<std::size_t>(g)] = resp(n, g);
    out.groups.push_back(map_assign(row));
    out.uncertainty.push_back(uncertainty(row));
  }
  return out;
}

struct CrossTab {
  std::size_t groups = 0;
  std::vector<ProfileSet> columns;                 ///< descending count, then lexicographic
  std::vector<std::vector<std::size_t>> counts;    ///< [group][column]

  std::size_t total() const {
    std::size_t acc = 0;
    for (const auto& row : counts) acc += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return acc;
  }
};

/// Contingency table of mixture groups against mapped profile sets. Every
/// group 0..groups-1 gets a row; columns are the profile sets that occur.
inline CrossTab cross_tab(std::span<const std::size_t> mix_assign, std::span<const ProfileSet> sets,
                          std::size_t groups = 0) {
  if (mix_assign.size() != sets.size()) throw DomainError("cross_tab: assignment lengths differ");
  for (std::size_t g : mix_assign) groups = std::max(groups, g + 1);
  std::map<ProfileSet, std::size_t> column_totals;
  for (const auto& s : sets) ++column_totals[s];

  CrossTab tab;
  tab.groups = groups;
  for (const auto& [set, count] : column_totals) tab.columns.push_back(set);
  std::stable_sort(tab.columns.begin(), tab.columns.end(), [&](const ProfileSet& a, const ProfileSet& b) {
    return column_totals.at(a) > column_totals.at(b);
  });
  std::map<ProfileSet, std::size_t> column_index;
  for (std::size_t c = 0; c < tab.columns.size(); ++c) column_index[tab.columns[c]] = c;
  tab.counts.assign(groups, std::vector<std::size_t>(tab.columns.size(), 0));
  for (std::size_t n = 0; n < sets.size(); ++n) ++tab.counts[mix_assign[n]][column_index.at(sets[n])];
  return tab;
}

/// Permutation `perm` with estimated row perm[g] matched to true row g,
/// minimizing sum |theta_est[perm[g]] - theta_true[g]| by exhaustive search.
inline std::vector<std::size_t> align_labels(const RealGrid& theta_est, const RealGrid& theta_true) {
  if (theta_est.rows() != theta_true.rows() || theta_est.cols() != theta_true.cols()) {
    throw DomainError("align_labels: shapes differ");
  }
  const auto g_count = static_cast<std::size_t>(theta_true.rows());
  if (g_count > 8) throw DomainError("align_labels: exhaustive search limited to G <= 8");
  RealGrid cost(theta_true.rows(), theta_true.rows());
  for (Eigen::Index a = 0; a < theta_true.rows(); ++a) {
    for (Eigen::Index b = 0; b < theta_true.rows(); ++b) {
      cost(a, b) = (theta_est.row(a) - theta_true.row(b)).cwiseAbs().sum();
    }
  }
  std::vector<std::size_t> perm(g_count), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t g = 0; g < g_count; ++g) {
      c += cost(static_cast<Eigen::Index>(perm[g]), static_cast<Eigen::Index>(g));
    }
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct TernaryPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Renormalizes (v1, v2, v3) and maps it onto the unit-edge triangle with
/// vertices (0, 0), (1, 0), (1/2, sqrt(3)/2).
inline TernaryPoint ternary_point(double v1, double v2, double v3) {
  const double total = v1 + v2 + v3;
  if (!(total > 0.0)) throw DomainError("ternary_point: masses must have a positive sum");
  v2 /= total;
  v3 /= total;
  return {v2 + v3 / 2.0, v3 * std::sqrt(3.0) / 2.0};
}

struct TernaryFace {
  std::array<std::size_t, 3> profiles{};
  std::vector<TernaryPoint> points;
};

/// One face per requested profile triple; every triple when `faces` is empty.
inline std::vector<TernaryFace> ternary_coords(const RealGrid& tau_hat,
                                               std::vector<std::array<std::size_t, 3>> faces = {}) {
  const auto g_count = static_cast<std::size_t>(tau_hat.cols());
  if (faces.empty()) {
    for (std::size_t a = 0; a < g_count; ++a)
      for (std::size_t b = a + 1; b < g_count; ++b)
        for (std::size_t c = b + 1; c < g_count; ++c) faces.push_back({a, b, c});
  }
  std::vector<TernaryFace> out;
  for (const auto& face : faces) {
    for (std::size_t p : face) {
      if (p >= g_count) throw DomainError("ternary_coords: profile index out of range");
    }
    TernaryFace f{face, {}};
    for (Eigen::Index n = 0; n < tau_hat.rows(); ++n) {
      f.points.push_back(ternary_point(tau_hat(n, static_cast<Eigen::Index>(face[0])),
                                       tau_hat(n, static_cast<Eigen::Index>(face[1])),
                                       tau_hat(n, static_cast<Eigen::Index>(face[2]))));
    }
    out.push_back(std::move(f));
  }
  return out;
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins on [lo, hi]; values at hi land in the last bin and
/// values outside the range are clamped to the end bins.
inline std::vector<HistogramBin> histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  if (bins < 1 || !(hi > lo)) throw DomainError("histogram: need bins >= 1 and hi > lo");
  std::vector<HistogramBin> out(bins);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = lo + width * static_cast<double>(b);
    out[b].hi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double v : values) {
    auto b = static_cast<std::ptrdiff_t>(std::floor((v - lo) / width));
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++out[static_cast<std::size_t>(b)].count;
  }
  return out;
}

}  // namespace mixmem
