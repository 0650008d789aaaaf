#pragma once

// Finite mixture of product-form profile distributions fitted by
// maximum-likelihood EM: every observation belongs to exactly one group.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mixmem/data.hpp"
#include "mixmem/expfam.hpp"
#include "mixmem/random.hpp"
#include "mixmem/special.hpp"

namespace mixmem {

struct MixtureModel {
  std::vector<double> weights;  ///< length G, sums to 1
  RealGrid rates;               ///< G x M

  std::size_t groups() const { return weights.size(); }
};

/// Posterior group probabilities, one row per observation, together with
/// the per-row log normalizers log sum_g tau_g prod_m p(x_nm | theta_gm).
struct Responsibilities {
  RealGrid probs;
  std::vector<double> log_normalizers;
};

struct EMConfig {
  std::size_t max_iterations = 2000;
  double loglik_rel_tolerance = 1e-8;
  std::size_t restarts = 10;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const {
    if (max_iterations < 1) throw std::invalid_argument("EMConfig: max_iterations must be positive");
    if (!(loglik_rel_tolerance > 0.0)) throw std::invalid_argument("EMConfig: tolerance must be positive");
    if (restarts < 1) throw std::invalid_argument("EMConfig: restarts must be at least 1");
    if (threads < 1) throw std::invalid_argument("EMConfig: threads must be at least 1");
  }
};

struct EMResult {
  MixtureModel model;
  Responsibilities resp;
  std::vector<double> loglik_trace;
  bool converged = false;
  std::size_t iterations_used = 0;
  std::size_t best_restart = 0;
  double bic = 0.0;

  double final_loglik() const { return loglik_trace.back(); }
};

/// Free parameters of a G-group mixture over M attributes: (G - 1) weights
/// plus G * M rates.
inline std::size_t mixture_parameter_count(std::size_t groups, std::size_t attributes) {
  return (groups - 1) + groups * attributes;
}

/// BIC = -2 loglik + kappa log N; lower is better.
inline double bic(double loglik, std::size_t groups, std::size_t n_obs, std::size_t attributes) {
  if (n_obs < 1) throw DomainError("bic: need at least one observation");
  if (groups < 1) throw DomainError("bic: need at least one group");
  return -2.0 * loglik +
         static_cast<double>(mixture_parameter_count(groups, attributes)) * std::log(static_cast<double>(n_obs));
}

namespace detail {

inline void check_mixture(const MixtureModel& model, const CountMatrix& x) {
  if (model.groups() < 1) throw DomainError("mixture: need at least one group");
  if (static_cast<std::size_t>(model.rates.rows()) != model.groups() ||
      static_cast<std::size_t>(model.rates.cols()) != x.cols()) {
    throw DomainError("mixture: rates must be G x M");
  }
  for (double w : model.weights) {
    if (!(w >= 0.0)) throw DomainError("mixture: weights must be non-negative");
  }
}

}  // namespace detail

/// r_ng proportional to tau_g prod_m p(x_nm | theta_gm), computed in log space.
template <ExponentialFamily F = PoissonGamma>
Responsibilities e_step(const CountMatrix& x, const MixtureModel& model) {
  detail::check_mixture(model, x);
  const std::size_t n_obs = x.rows(), n_attr = x.cols(), g_count = model.groups();
  Responsibilities out;
  out.probs.resize(static_cast<Eigen::Index>(n_obs), static_cast<Eigen::Index>(g_count));
  out.log_normalizers.resize(n_obs);

  std::vector<double> log_w(g_count);
  std::vector<double> log_k(g_count * n_attr);
  std::vector<typename F::Stats> natural(g_count * n_attr);
  for (std::size_t g = 0; g < g_count; ++g) {
    log_w[g] = model.weights[g] > 0.0 ? std::log(model.weights[g]) : -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < n_attr; ++m) {
      const double theta = model.rates(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(m));
      if (!F::valid_param(theta)) throw DomainError("e_step: rate outside parameter space");
      log_k[g * n_attr + m] = F::log_k(theta);
      natural[g * n_attr + m] = F::natural(theta);
    }
  }

  std::vector<double> row(g_count);
  for (std::size_t n = 0; n < n_obs; ++n) {
    double base = 0.0;
    for (std::size_t m = 0; m < n_attr; ++m) base += F::log_base_measure(x(n, m));
    for (std::size_t g = 0; g < g_count; ++g) {
      double acc = log_w[g] + base;
      for (std::size_t m = 0; m < n_attr; ++m) {
        acc += log_k[g * n_attr + m] + dot(natural[g * n_attr + m], F::sufficient(x(n, m)));
      }
      row[g] = acc;
    }
    try {
      out.log_normalizers[n] = special::normalize_log_weights(row);
    } catch (const DomainError&) {
      throw DomainError("e_step: every group has zero density for observation " + std::to_string(n + 1));
    }
    for (std::size_t g = 0; g < g_count; ++g) {
      out.probs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(g)) = row[g];
    }
  }
  return out;
}

/// tau_g = mean_n r_ng; theta_gm = sum_n r_ng x_nm / sum_n r_ng, with the
/// column-mean fallback for empty groups and the rate floor.
template <ExponentialFamily F = PoissonGamma>
MixtureModel m_step(const CountMatrix& x, const RealGrid& resp) {
  const std::size_t n_obs = x.rows(), n_attr = x.cols();
  if (static_cast<std::size_t>(resp.rows()) != n_obs || resp.cols() < 1) {
    throw DomainError("m_step: responsibilities must have one row per observation");
  }
  const auto g_count = static_cast<std::size_t>(resp.cols());
  MixtureModel model;
  model.weights.resize(g_count);
  model.rates.resize(static_cast<Eigen::Index>(g_count), static_cast<Eigen::Index>(n_attr));
  std::vector<double> weights(n_obs);
  for (std::size_t g = 0; g < g_count; ++g) {
    double total = 0.0;
    for (std::size_t n = 0; n < n_obs; ++n) {
      total += weights[n] = resp(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(g));
    }
    model.weights[g] = total / static_cast<double>(n_obs);
    for (std::size_t m = 0; m < n_attr; ++m) {
      const auto column = x.column(m);
      const double estimate =
          total < kDegenerateWeightFloor ? x.column_mean(m) : mle_from_weighted_stats<F>(weights, column);
      model.rates(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(m)) = std::max(estimate, kRateFloor);
    }
  }
  return model;
}

/// log prod_n sum_g tau_g prod_m p(x_nm | theta_gm).
template <ExponentialFamily F = PoissonGamma>
double log_likelihood(const CountMatrix& x, const MixtureModel& model) {
  const auto resp = e_step<F>(x, model);
  double total = 0.0;
  for (double v : resp.log_normalizers) total += v;
  return total;
}

/// EM from one responsibility matrix until the relative log-likelihood
/// change falls below the tolerance.
template <ExponentialFamily F = PoissonGamma>
EMResult fit_em_from(const CountMatrix& x, const RealGrid& initial_resp, const EMConfig& config) {
  EMResult result;
  MixtureModel model = m_step<F>(x, initial_resp);
  double previous = 0.0;
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    auto resp = e_step<F>(x, model);
    double ll = 0.0;
    for (double v : resp.log_normalizers) ll += v;
    result.loglik_trace.push_back(ll);
    result.model = model;
    result.resp = std::move(resp);
    result.iterations_used = it + 1;
    if (it > 0) {
      const double change = std::abs(ll - previous);
      if (change == 0.0 || change < config.loglik_rel_tolerance * std::abs(ll)) {
        result.converged = true;
        break;
      }
    }
    previous = ll;
    model = m_step<F>(x, result.resp.probs);
  }
  result.bic = bic(result.final_loglik(), result.model.groups(), x.rows(), x.cols());
  return result;
}

/// Best of `config.restarts` EM runs, each from random Dirichlet(1)
/// responsibility rows.
template <ExponentialFamily F = PoissonGamma>
EMResult fit_em(const CountMatrix& x, std::size_t groups, const EMConfig& config) {
  config.validate();
  if (groups < 1) throw DomainError("fit_em: need at least one group");
  auto run = [&](std::size_t r) {
    Rng rng(restart_seed(config.seed, r));
    RealGrid resp(static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(groups));
    for (std::size_t n = 0; n < x.rows(); ++n) {
      const auto draw = sample_symmetric_dirichlet(groups, 1.0, rng);
      for (std::size_t g = 0; g < groups; ++g) {
        resp(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(g)) = draw[g];
      }
    }
    auto result = fit_em_from<F>(x, resp, config);
    result.best_restart = r;
    return result;
  };
  std::vector<EMResult> results(config.restarts);
  if (config.threads <= 1) {
    for (std::size_t r = 0; r < config.restarts; ++r) results[r] = run(r);
  } else {
    for (std::size_t start = 0; start < config.restarts; start += config.threads) {
      const std::size_t stop = std::min(config.restarts, start + config.threads);
      std::vector<std::future<EMResult>> pending;
      for (std::size_t r = start; r < stop; ++r) pending.push_back(std::async(std::launch::async, run, r));
      for (std::size_t r = start; r < stop; ++r) results[r] = pending[r - start].get();
    }
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r) {
    if (results[r].final_loglik() > results[best].final_loglik()) best = r;
  }
  return std::move(results[best]);
}

}  // namespace mixmem
