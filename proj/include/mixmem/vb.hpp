#pragma once

// Coordinate-ascent variational Bayes for mixed membership models with
// conjugate exponential-family profile distributions.
//
// Notation follows the usual LDA-style layout:
//   gamma  N x G      Dirichlet parameters of q(tau_n)
//   phi    N x M x G  multinomial parameters of q(Z_nm)
//   theta  G x M      either a conjugate posterior q(theta_gm) (Bayes mode)
//                     or a point estimate (nuisance mode).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mixmem/data.hpp"
#include "mixmem/expfam.hpp"
#include "mixmem/random.hpp"
#include "mixmem/special.hpp"

namespace mixmem {

enum class InferenceMode { kBayes, kNuisance };

inline const char* to_string(InferenceMode mode) {
  return mode == InferenceMode::kBayes ? "bayes" : "nuisance";
}

/// Dense N x M x G array of per-cell profile probabilities.
class PhiTensor {
 public:
  PhiTensor() = default;
  PhiTensor(std::size_t n, std::size_t m, std::size_t g, double fill = 0.0)
      : n_(n), m_(m), g_(g), data_(n * m * g, fill) {}

  std::size_t observations() const { return n_; }
  std::size_t attributes() const { return m_; }
  std::size_t profiles() const { return g_; }

  double& operator()(std::size_t n, std::size_t m, std::size_t g) { return data_[(n * m_ + m) * g_ + g]; }
  double operator()(std::size_t n, std::size_t m, std::size_t g) const {
    return data_[(n * m_ + m) * g_ + g];
  }
  std::span<double> cell(std::size_t n, std::size_t m) { return {data_.data() + (n * m_ + m) * g_, g_}; }
  std::span<const double> cell(std::size_t n, std::size_t m) const {
    return {data_.data() + (n * m_ + m) * g_, g_};
  }
  const std::vector<double>& raw() const { return data_; }

 private:
  std::size_t n_ = 0, m_ = 0, g_ = 0;
  std::vector<double> data_;
};

template <ExponentialFamily F = PoissonGamma>
struct MMModel {
  using Family = F;
  using Prior = ConjugatePrior<F::stat_dim>;

  std::size_t profiles = 1;
  std::vector<double> delta;
  /// One shared prior, or G*M priors indexed g * M + m.
  std::vector<Prior> priors;
  InferenceMode mode = InferenceMode::kNuisance;

  /// delta_g = 1/G and a single shared prior.
  static MMModel standard(std::size_t g, InferenceMode mode, Prior prior) {
    if (g < 1) throw DomainError("MMModel: need at least one profile");
    MMModel model;
    model.profiles = g;
    model.delta.assign(g, 1.0 / static_cast<double>(g));
    model.priors = {prior};
    model.mode = mode;
    return model;
  }

  const Prior& prior(std::size_t g, std::size_t m, std::size_t attributes) const {
    return priors.size() == 1 ? priors.front() : priors[g * attributes + m];
  }

  double delta_sum() const {
    double s = 0.0;
    for (double d : delta) s += d;
    return s;
  }

  void validate(std::size_t attributes) const {
    if (profiles < 1) throw DomainError("MMModel: need at least one profile");
    if (delta.size() != profiles) throw DomainError("MMModel: delta must have one entry per profile");
    for (double d : delta) {
      if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("MMModel: delta entries must be positive");
    }
    if (priors.size() != 1 && priors.size() != profiles * attributes) {
      throw DomainError("MMModel: need one shared prior or one per (profile, attribute)");
    }
    for (const auto& p : priors) {
      if (!F::valid_prior(p)) throw DomainError("MMModel: prior hyperparameters outside valid region");
    }
  }
};

template <ExponentialFamily F = PoissonGamma>
struct VariationalState {
  using Prior = ConjugatePrior<F::stat_dim>;

  RealGrid gamma;
  PhiTensor phi;
  std::optional<std::vector<Prior>> theta_post;  ///< G*M, index g * M + m
  std::optional<RealGrid> theta_hat;             ///< G x M

  std::size_t observations() const { return phi.observations(); }
  std::size_t attributes() const { return phi.attributes(); }
  std::size_t profiles() const { return phi.profiles(); }
};

struct FitConfig {
  std::size_t max_iterations = 1000;
  double elbo_rel_tolerance = 1e-7;
  std::size_t restarts = 10;
  std::uint64_t seed = 1;
  /// "dirichlet-row": one Dirichlet(1) draw per observation, shared by all of
  /// its attributes. "dirichlet-phi": an independent draw for every cell.
  std::string init_scheme = "dirichlet-row";
  std::size_t threads = 1;

  void validate() const {
    if (max_iterations < 1) throw std::invalid_argument("FitConfig: max_iterations must be positive");
    if (!(elbo_rel_tolerance > 0.0)) throw std::invalid_argument("FitConfig: tolerance must be positive");
    if (restarts < 1) throw std::invalid_argument("FitConfig: restarts must be at least 1");
    if (init_scheme != "dirichlet-row" && init_scheme != "dirichlet-phi") {
      throw std::invalid_argument("FitConfig: unknown init scheme '" + init_scheme + "'");
    }
    if (threads < 1) throw std::invalid_argument("FitConfig: threads must be at least 1");
  }
};

template <ExponentialFamily F = PoissonGamma>
struct FitResult {
  VariationalState<F> state;
  std::vector<double> elbo_trace;  ///< element 0 is the initial state
  bool converged = false;
  std::size_t iterations_used = 0;
  std::size_t best_restart = 0;
  MMModel<F> model;
  RealGrid tau_hat;  ///< N x G, gamma rows normalized

  double final_elbo() const { return elbo_trace.back(); }
  /// Posterior-mean (Bayes) or point-estimate (nuisance) rates, G x M.
  RealGrid rates() const;
};

namespace detail {

template <ExponentialFamily F>
void require_count_family() {
  static_assert(std::is_same_v<typename F::Value, CountMatrix::Value>,
                "the engine consumes CountMatrix data; the family must use the same value type");
}

inline void check_phi_shape(const PhiTensor& phi, const CountMatrix& x) {
  if (phi.observations() != x.rows() || phi.attributes() != x.cols()) {
    throw DomainError("phi shape does not match data");
  }
}

inline void check_gamma_shape(const RealGrid& gamma, std::size_t n, std::size_t g) {
  if (static_cast<std::size_t>(gamma.rows()) != n || static_cast<std::size_t>(gamma.cols()) != g) {
    throw DomainError("gamma shape does not match");
  }
}

/// Psi(gamma_ng) - Psi(sum_h gamma_nh), the variational E[log tau_ng].
inline RealGrid expected_log_tau(const RealGrid& gamma) {
  RealGrid out(gamma.rows(), gamma.cols());
  for (Eigen::Index n = 0; n < gamma.rows(); ++n) {
    const double total = special::digamma(gamma.row(n).sum());
    for (Eigen::Index g = 0; g < gamma.cols(); ++g) out(n, g) = special::digamma(gamma(n, g)) - total;
  }
  return out;
}

/// Fills phi(n, m, .) from per-(g, m) coefficients: log-weight
/// = log_k[g, m] + natural[g, m] . s(x_nm) + psi_gamma(n, g).
template <ExponentialFamily F>
PhiTensor phi_from_coefficients(const RealGrid& gamma, const std::vector<double>& log_k,
                                const std::vector<typename F::Stats>& natural, const CountMatrix& x) {
  const std::size_t n_obs = x.rows(), n_attr = x.cols();
  const std::size_t g_count = static_cast<std::size_t>(gamma.cols());
  check_gamma_shape(gamma, n_obs, g_count);
  PhiTensor phi(n_obs, n_attr, g_count);
  std::vector<double> psi(g_count);
  for (std::size_t n = 0; n < n_obs; ++n) {
    for (std::size_t g = 0; g < g_count; ++g) {
      psi[g] = special::digamma(gamma(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(g)));
    }
    for (std::size_t m = 0; m < n_attr; ++m) {
      const auto s = F::sufficient(x(n, m));
      auto cell = phi.cell(n, m);
      for (std::size_t g = 0; g < g_count; ++g) {
        cell[g] = log_k[g * n_attr + m] + dot(natural[g * n_attr + m], s) + psi[g];
      }
      special::normalize_log_weights(cell);
    }
  }
  return phi;
}

}  // namespace detail

/// gamma_ng = sum_m phi_nmg + delta_g.
inline RealGrid update_gamma(const PhiTensor& phi, std::span<const double> delta) {
  if (delta.size() != phi.profiles()) throw DomainError("update_gamma: delta length does not match phi");
  RealGrid gamma(static_cast<Eigen::Index>(phi.observations()), static_cast<Eigen::Index>(phi.profiles()));
  for (std::size_t n = 0; n < phi.observations(); ++n) {
    for (std::size_t g = 0; g < phi.profiles(); ++g) {
      double acc = 0.0;
      for (std::size_t m = 0; m < phi.attributes(); ++m) acc += phi(n, m, g);
      gamma(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(g)) = acc + delta[g];
    }
  }
  return gamma;
}

/// phi_nmg proportional to exp{E[log k(theta_gm)] + E[r(theta_gm)] . s(x_nm) + Psi(gamma_ng)}.
template <ExponentialFamily F = PoissonGamma>
PhiTensor update_phi_bayes(const RealGrid& gamma, const std::vector<ConjugatePrior<F::stat_dim>>& theta_post,
                           const CountMatrix& x) {
  detail::require_count_family<F>();
  const std::size_t g_count = static_cast<std::size_t>(gamma.cols());
  if (theta_post.size() != g_count * x.cols()) throw DomainError("update_phi_bayes: posterior shape mismatch");
  std::vector<double> log_k(theta_post.size());
  std::vector<typename F::Stats> natural(theta_post.size());
  for (std::size_t i = 0; i < theta_post.size(); ++i) {
    if (!F::valid_prior(theta_post[i])) throw DomainError("update_phi_bayes: invalid posterior hyperparameters");
    log_k[i] = F::expected_log_k(theta_post[i]);
    natural[i] = F::expected_natural(theta_post[i]);
  }
  return detail::phi_from_coefficients<F>(gamma, log_k, natural, x);
}

/// phi_nmg proportional to p(x_nm | theta_gm) exp{Psi(gamma_ng)}.
template <ExponentialFamily F = PoissonGamma>
PhiTensor update_phi_nuisance(const RealGrid& gamma, const RealGrid& theta_hat, const CountMatrix& x) {
  detail::require_count_family<F>();
  const std::size_t g_count = static_cast<std::size_t>(gamma.cols());
  if (static_cast<std::size_t>(theta_hat.rows()) != g_count ||
      static_cast<std::size_t>(theta_hat.cols()) != x.cols()) {
    throw DomainError("update_phi_nuisance: theta_hat shape mismatch");
  }
  std::vector<double> log_k(g_count * x.cols());
  std::vector<typename F::Stats> natural(g_count * x.cols());
  for (std::size_t g = 0; g < g_count; ++g) {
    for (std::size_t m = 0; m < x.cols(); ++m) {
      const double theta = theta_hat(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(m));
      if (!F::valid_param(theta)) throw DomainError("update_phi_nuisance: theta_hat outside parameter space");
      log_k[g * x.cols() + m] = F::log_k(theta);
      natural[g * x.cols() + m] = F::natural(theta);
    }
  }
  // log h(x) is common to every profile and drops out of the normalization.
  return detail::phi_from_coefficients<F>(gamma, log_k, natural, x);
}

/// eta'_gm = sum_n phi_nmg + eta_gm, nu'_gm = sum_n phi_nmg s(x_nm) + nu_gm.
template <ExponentialFamily F = PoissonGamma>
std::vector<ConjugatePrior<F::stat_dim>> update_theta_bayes(const PhiTensor& phi, const CountMatrix& x,
                                                            const MMModel<F>& model) {
  detail::require_count_family<F>();
  detail::check_phi_shape(phi, x);
  const std::size_t n_obs = x.rows(), n_attr = x.cols(), g_count = phi.profiles();
  std::vector<ConjugatePrior<F::stat_dim>> out;
  out.reserve(g_count * n_attr);
  std::vector<double> weights(n_obs);
  for (std::size_t g = 0; g < g_count; ++g) {
    for (std::size_t m = 0; m < n_attr; ++m) {
      for (std::size_t n = 0; n < n_obs; ++n) weights[n] = phi(n, m, g);
      const auto column = x.column(m);
      out.push_back(posterior_update<F>(model.prior(g, m, n_attr), weights, column));
    }
  }
  return out;
}

/// theta_hat_gm from the phi-weighted sufficient statistics. Profiles with
/// total weight below kDegenerateWeightFloor fall back to the column mean;
/// every estimate is floored at kRateFloor.
template <ExponentialFamily F = PoissonGamma>
RealGrid update_theta_nuisance(const PhiTensor& phi, const CountMatrix& x) {
  detail::require_count_family<F>();
  detail::check_phi_shape(phi, x);
  const std::size_t n_obs = x.rows(), n_attr = x.cols(), g_count = phi.profiles();
  RealGrid theta(static_cast<Eigen::Index>(g_count), static_cast<Eigen::Index>(n_attr));
  std::vector<double> weights(n_obs);
  for (std::size_t m = 0; m < n_attr; ++m) {
    const auto column = x.column(m);
    const double fallback = x.column_mean(m);
    for (std::size_t g = 0; g < g_count; ++g) {
      double total = 0.0;
      for (std::size_t n = 0; n < n_obs; ++n) total += weights[n] = phi(n, m, g);
      const double estimate =
          total < kDegenerateWeightFloor ? fallback : mle_from_weighted_stats<F>(weights, column);
      theta(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(m)) = std::max(estimate, kRateFloor);
    }
  }
  return theta;
}

/// Evidence lower bound E_q[log p] - E_q[log q]. In nuisance mode the theta
/// prior and q(theta) terms are absent and theta_hat enters the data term
/// directly, so the value bounds log p(x | delta, theta_hat).
template <ExponentialFamily F = PoissonGamma>
double elbo(const VariationalState<F>& state, const CountMatrix& x, const MMModel<F>& model) {
  detail::require_count_family<F>();
  detail::check_phi_shape(state.phi, x);
  const std::size_t n_obs = x.rows(), n_attr = x.cols(), g_count = state.profiles();
  detail::check_gamma_shape(state.gamma, n_obs, g_count);
  if (model.delta.size() != g_count) throw DomainError("elbo: delta length mismatch");

  const bool bayes = model.mode == InferenceMode::kBayes;
  if (bayes != state.theta_post.has_value() || bayes == state.theta_hat.has_value()) {
    throw DomainError("elbo: state does not match the model's inference mode");
  }

  std::vector<double> log_k(g_count * n_attr);
  std::vector<typename F::Stats> natural(g_count * n_attr);
  double value = 0.0;
  for (std::size_t g = 0; g < g_count; ++g) {
    for (std::size_t m = 0; m < n_attr; ++m) {
      const std::size_t i = g * n_attr + m;
      if (bayes) {
        const auto& post = (*state.theta_post)[i];
        const auto& prior = model.prior(g, m, n_attr);
        log_k[i] = F::expected_log_k(post);
        natural[i] = F::expected_natural(post);
        // E[log p(theta)] - E[log q(theta)]
        value += F::log_prior_normalizer(prior) + prior.eta * log_k[i] + dot(natural[i], prior.nu);
        value -= F::log_prior_normalizer(post) + post.eta * log_k[i] + dot(natural[i], post.nu);
      } else {
        const double theta = (*state.theta_hat)(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(m));
        log_k[i] = F::log_k(theta);
        natural[i] = F::natural(theta);
      }
    }
  }

  const RealGrid elog_tau = detail::expected_log_tau(state.gamma);
  const double delta_sum = model.delta_sum();
  double log_dirichlet_norm = special::log_gamma(delta_sum);
  for (double d : model.delta) log_dirichlet_norm -= special::log_gamma(d);

  for (std::size_t n = 0; n < n_obs; ++n) {
    const auto ni = static_cast<Eigen::Index>(n);
    for (std::size_t m = 0; m < n_attr; ++m) {
      const auto xv = x(n, m);
      const auto s = F::sufficient(xv);
      const double base = F::log_base_measure(xv);
      const auto cell = state.phi.cell(n, m);
      for (std::size_t g = 0; g < g_count; ++g) {
        const double p = cell[g];
        if (p <= 0.0) continue;
        const std::size_t i = g * n_attr + m;
        value += p * (base + log_k[i] + dot(natural[i], s) + elog_tau(ni, static_cast<Eigen::Index>(g)));
        value -= p * std::log(p);
      }
    }
    // E[log p(tau_n | delta)] - E[log q(tau_n | gamma_n)]
    value += log_dirichlet_norm - special::log_gamma(state.gamma.row(ni).sum());
    for (std::size_t g = 0; g < g_count; ++g) {
      const auto gi = static_cast<Eigen::Index>(g);
      value += special::log_gamma(state.gamma(ni, gi));
      value += (model.delta[g] - state.gamma(ni, gi)) * elog_tau(ni, gi);
    }
  }
  if (!std::isfinite(value)) throw DomainError("elbo: non-finite value; state invariants violated");
  return value;
}

/// Builds a full state from phi: gamma and theta are derived from it.
template <ExponentialFamily F = PoissonGamma>
VariationalState<F> state_from_phi(PhiTensor phi, const CountMatrix& x, const MMModel<F>& model) {
  VariationalState<F> state;
  state.gamma = update_gamma(phi, model.delta);
  if (model.mode == InferenceMode::kBayes) {
    state.theta_post = update_theta_bayes<F>(phi, x, model);
  } else {
    state.theta_hat = update_theta_nuisance<F>(phi, x);
  }
  state.phi = std::move(phi);
  return state;
}

/// phi drawn cell by cell from a symmetric Dirichlet(1).
inline PhiTensor random_phi(std::size_t n_obs, std::size_t n_attr, std::size_t g_count, Rng& rng) {
  PhiTensor phi(n_obs, n_attr, g_count);
  for (std::size_t n = 0; n < n_obs; ++n) {
    for (std::size_t m = 0; m < n_attr; ++m) {
      const auto draw = sample_symmetric_dirichlet(g_count, 1.0, rng);
      std::copy(draw.begin(), draw.end(), phi.cell(n, m).begin());
    }
  }
  return phi;
}

/// phi drawn once per observation from a symmetric Dirichlet(1) and copied
/// to every attribute. Profile orderings then agree across columns; with
/// independent per-cell draws each column breaks the label symmetry on its
/// own, and coordinate ascent often stalls with profiles swapped between
/// columns.
inline PhiTensor random_phi_rows(std::size_t n_obs, std::size_t n_attr, std::size_t g_count, Rng& rng) {
  PhiTensor phi(n_obs, n_attr, g_count);
  for (std::size_t n = 0; n < n_obs; ++n) {
    const auto draw = sample_symmetric_dirichlet(g_count, 1.0, rng);
    for (std::size_t m = 0; m < n_attr; ++m) std::copy(draw.begin(), draw.end(), phi.cell(n, m).begin());
  }
  return phi;
}

/// One full coordinate-ascent cycle phi -> gamma -> theta.
template <ExponentialFamily F = PoissonGamma>
void update_cycle(VariationalState<F>& state, const CountMatrix& x, const MMModel<F>& model) {
  if (model.mode == InferenceMode::kBayes) {
    state.phi = update_phi_bayes<F>(state.gamma, *state.theta_post, x);
    state.gamma = update_gamma(state.phi, model.delta);
    state.theta_post = update_theta_bayes<F>(state.phi, x, model);
  } else {
    state.phi = update_phi_nuisance<F>(state.gamma, *state.theta_hat, x);
    state.gamma = update_gamma(state.phi, model.delta);
    state.theta_hat = update_theta_nuisance<F>(state.phi, x);
  }
}

inline RealGrid normalize_rows(const RealGrid& gamma) {
  RealGrid tau = gamma;
  for (Eigen::Index n = 0; n < tau.rows(); ++n) tau.row(n) /= tau.row(n).sum();
  return tau;
}

template <ExponentialFamily F>
RealGrid FitResult<F>::rates() const {
  if (state.theta_hat) return *state.theta_hat;
  const std::size_t g_count = state.profiles(), n_attr = state.attributes();
  RealGrid out(static_cast<Eigen::Index>(g_count), static_cast<Eigen::Index>(n_attr));
  for (std::size_t g = 0; g < g_count; ++g) {
    for (std::size_t m = 0; m < n_attr; ++m) {
      const auto& post = (*state.theta_post)[g * n_attr + m];
      out(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(m)) = -F::expected_log_k(post);
    }
  }
  return out;
}

/// Runs coordinate ascent from a given state until the relative ELBO change
/// drops below the tolerance or the iteration cap is hit.
template <ExponentialFamily F = PoissonGamma>
FitResult<F> fit_from_state(VariationalState<F> state, const CountMatrix& x, const MMModel<F>& model,
                            const FitConfig& config) {
  FitResult<F> result;
  result.model = model;
  double previous = elbo(state, x, model);
  result.elbo_trace.push_back(previous);
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    update_cycle(state, x, model);
    const double current = elbo(state, x, model);
    result.elbo_trace.push_back(current);
    result.iterations_used = it + 1;
    const double change = std::abs(current - previous);
    previous = current;
    if (change == 0.0 || change < config.elbo_rel_tolerance * std::abs(current)) {
      result.converged = true;
      break;
    }
  }
  result.tau_hat = normalize_rows(state.gamma);
  result.state = std::move(state);
  return result;
}

/// Fits the model from `config.restarts` seeded random initializations and
/// keeps the run with the highest final ELBO (lowest restart index on ties).
template <ExponentialFamily F = PoissonGamma>
FitResult<F> fit(const CountMatrix& x, const MMModel<F>& model, const FitConfig& config) {
  config.validate();
  model.validate(x.cols());
  auto run = [&](std::size_t r) {
    Rng rng(restart_seed(config.seed, r));
    auto phi = config.init_scheme == "dirichlet-phi" ? random_phi(x.rows(), x.cols(), model.profiles, rng)
                                                     : random_phi_rows(x.rows(), x.cols(), model.profiles, rng);
    auto state = state_from_phi<F>(std::move(phi), x, model);
    auto result = fit_from_state<F>(std::move(state), x, model, config);
    result.best_restart = r;
    return result;
  };

  std::vector<FitResult<F>> results(config.restarts);
  if (config.threads <= 1) {
    for (std::size_t r = 0; r < config.restarts; ++r) results[r] = run(r);
  } else {
    for (std::size_t start = 0; start < config.restarts; start += config.threads) {
      const std::size_t stop = std::min(config.restarts, start + config.threads);
      std::vector<std::future<FitResult<F>>> pending;
      for (std::size_t r = start; r < stop; ++r) pending.push_back(std::async(std::launch::async, run, r));
      for (std::size_t r = start; r < stop; ++r) results[r] = pending[r - start].get();
    }
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r) {
    if (results[r].final_elbo() > results[best].final_elbo()) best = r;
  }
  return std::move(results[best]);
}

/// Draws from the generative process of the model with fixed rates.
struct Simulation {
  CountMatrix data;
  RealGrid tau;                    ///< N x G true memberships
  Grid<std::int32_t> assignments;  ///< N x M true profile index (0-based)
};

template <ExponentialFamily F = PoissonGamma>
Simulation generate(std::size_t n_obs, std::size_t n_attr, const MMModel<F>& model, const RealGrid& theta,
                    std::uint64_t seed) {
  detail::require_count_family<F>();
  if (static_cast<std::size_t>(theta.rows()) != model.profiles || static_cast<std::size_t>(theta.cols()) != n_attr) {
    throw DomainError("generate: theta must be G x M");
  }
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!F::valid_param(theta.data()[i])) throw DomainError("generate: theta outside parameter space");
  }
  if (n_obs < 1 || n_attr < 1) throw DomainError("generate: need N >= 1 and M >= 1");
  model.validate(n_attr);

  Rng rng(seed);
  const auto g_count = static_cast<Eigen::Index>(model.profiles);
  Simulation sim;
  sim.tau.resize(static_cast<Eigen::Index>(n_obs), g_count);
  sim.assignments.resize(static_cast<Eigen::Index>(n_obs), static_cast<Eigen::Index>(n_attr));
  Grid<CountMatrix::Value> values(static_cast<Eigen::Index>(n_obs), static_cast<Eigen::Index>(n_attr));
  for (std::size_t n = 0; n < n_obs; ++n) {
    const auto ni = static_cast<Eigen::Index>(n);
    const auto tau = sample_dirichlet(model.delta, rng);
    for (Eigen::Index g = 0; g < g_count; ++g) sim.tau(ni, g) = tau[static_cast<std::size_t>(g)];
    for (std::size_t m = 0; m < n_attr; ++m) {
      const auto mi = static_cast<Eigen::Index>(m);
      const std::size_t z = sample_categorical(tau, rng);
      sim.assignments(ni, mi) = static_cast<std::int32_t>(z);
      values(ni, mi) = F::sample(theta(static_cast<Eigen::Index>(z), mi), rng);
    }
  }
  sim.data = CountMatrix(std::move(values));
  return sim;
}

}  // namespace mixmem
