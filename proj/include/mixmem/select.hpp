#pragma once

// Model selection across candidate profile counts: the mixed membership
// marginal likelihood with tau and Z integrated out (Monte Carlo and exact
// enumeration) and BIC for the mixture baseline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixmem/data.hpp"
#include "mixmem/expfam.hpp"
#include "mixmem/mixture.hpp"
#include "mixmem/random.hpp"
#include "mixmem/special.hpp"
#include "mixmem/vb.hpp"

namespace mixmem {

struct MCConfig {
  std::size_t draws = 100000;  ///< T
  std::uint64_t seed = 1;
  /// Fraction of rows held out for evaluation; 0 evaluates on the fitted data.
  double holdout_fraction = 0.0;

  void validate() const {
    if (draws < 1) throw std::invalid_argument("MCConfig: need at least one draw");
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
      throw std::invalid_argument("MCConfig: holdout fraction must lie in [0, 1)");
    }
  }
};

/// Largest G'^M the exact enumerator accepts.
inline constexpr double kEnumerationLimit = 1e6;

class EnumerationLimitError : public DomainError {
 public:
  using DomainError::DomainError;
};

namespace detail {

/// log p(x_nm | theta_gm) laid out [n][m][g].
template <ExponentialFamily F>
std::vector<double> cell_log_densities(const CountMatrix& x, const RealGrid& theta) {
  const std::size_t n_obs = x.rows(), n_attr = x.cols();
  const auto g_count = static_cast<std::size_t>(theta.rows());
  if (static_cast<std::size_t>(theta.cols()) != n_attr) throw DomainError("theta must be G x M");
  std::vector<double> out(n_obs * n_attr * g_count);
  for (std::size_t n = 0; n < n_obs; ++n) {
    for (std::size_t m = 0; m < n_attr; ++m) {
      for (std::size_t g = 0; g < g_count; ++g) {
        out[(n * n_attr + m) * g_count + g] =
            log_density<F>(x(n, m), theta(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(m)));
      }
    }
  }
  return out;
}

inline void check_delta(std::span<const double> delta, std::size_t g_count) {
  if (delta.size() != g_count) throw DomainError("delta length must equal the number of profiles");
  for (double d : delta) {
    if (!(d > 0.0)) throw DomainError("delta entries must be positive");
  }
}

}  // namespace detail

/// Per-observation Monte Carlo estimates of
///   log int prod_m sum_g tau_g p(x_nm | theta_gm) Dirichlet(tau | delta) dtau
/// using one shared set of T prior draws for every observation.
template <ExponentialFamily F = PoissonGamma>
std::vector<double> holdout_loglik_mc_terms(const CountMatrix& x, const RealGrid& theta,
                                            std::span<const double> delta, const MCConfig& config) {
  config.validate();
  const std::size_t n_obs = x.rows(), n_attr = x.cols();
  const auto g_count = static_cast<std::size_t>(theta.rows());
  detail::check_delta(delta, g_count);
  const auto logp = detail::cell_log_densities<F>(x, theta);

  // Scale each cell by its largest density so products stay representable.
  std::vector<double> scaled(logp.size());
  std::vector<double> cell_peak(n_obs * n_attr);
  for (std::size_t c = 0; c < n_obs * n_attr; ++c) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < g_count; ++g) peak = std::max(peak, logp[c * g_count + g]);
    cell_peak[c] = peak;
    for (std::size_t g = 0; g < g_count; ++g) scaled[c * g_count + g] = std::exp(logp[c * g_count + g] - peak);
  }

  Rng rng(config.seed);
  const std::size_t draws = config.draws;
  std::vector<double> tau(draws * g_count);
  for (std::size_t t = 0; t < draws; ++t) {
    const auto draw = sample_dirichlet(delta, rng);
    std::copy(draw.begin(), draw.end(), tau.begin() + static_cast<std::ptrdiff_t>(t * g_count));
  }

  constexpr double kRescale = 1e-280;
  const double log_draws = std::log(static_cast<double>(draws));
  std::vector<double> per_draw(draws);
  std::vector<double> out(n_obs);
  for (std::size_t n = 0; n < n_obs; ++n) {
    double offset = 0.0;
    for (std::size_t m = 0; m < n_attr; ++m) offset += cell_peak[n * n_attr + m];
    const double* row = scaled.data() + n * n_attr * g_count;
    for (std::size_t t = 0; t < draws; ++t) {
      const double* w = tau.data() + t * g_count;
      double product = 1.0, log_acc = 0.0;
      for (std::size_t m = 0; m < n_attr && product > 0.0; ++m) {
        const double* p = row + m * g_count;
        double mix = 0.0;
        for (std::size_t g = 0; g < g_count; ++g) mix += w[g] * p[g];
        product *= mix;
        if (product < kRescale && product > 0.0) {
          log_acc += std::log(product);
          product = 1.0;
        }
      }
      per_draw[t] = product > 0.0 ? log_acc + std::log(product) : -std::numeric_limits<double>::infinity();
    }
    const double value = special::log_sum_exp(per_draw) - log_draws + offset;
    if (!std::isfinite(value)) {
      throw DomainError("holdout_loglik_mc: non-finite estimate for observation " + std::to_string(n + 1));
    }
    out[n] = value;
  }
  return out;
}

template <ExponentialFamily F = PoissonGamma>
double holdout_loglik_mc(const CountMatrix& x, const RealGrid& theta, std::span<const double> delta,
                         const MCConfig& config) {
  const auto terms = holdout_loglik_mc_terms<F>(x, theta, delta, config);
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

/// Exact per-observation values of the same integral, summing over every
/// assignment z in {1..G'}^M with the Dirichlet-multinomial weight
///   Gamma(sum delta) / prod Gamma(delta_g) * prod Gamma(delta_g + c_g(z)) / Gamma(sum delta + M).
template <ExponentialFamily F = PoissonGamma>
std::vector<double> holdout_loglik_exact_terms(const CountMatrix& x, const RealGrid& theta,
                                               std::span<const double> delta) {
  const std::size_t n_obs = x.rows(), n_attr = x.cols();
  const auto g_count = static_cast<std::size_t>(theta.rows());
  detail::check_delta(delta, g_count);
  if (std::pow(static_cast<double>(g_count), static_cast<double>(n_attr)) > kEnumerationLimit) {
    throw EnumerationLimitError("holdout_loglik_exact: G'^M exceeds the enumeration limit");
  }
  const auto logp = detail::cell_log_densities<F>(x, theta);
  const double delta_sum = std::accumulate(delta.begin(), delta.end(), 0.0);
  double log_norm = special::log_gamma(delta_sum) - special::log_gamma(delta_sum + static_cast<double>(n_attr));
  for (double d : delta) log_norm -= special::log_gamma(d);

  std::vector<double> out(n_obs);
  std::vector<std::size_t> z(n_attr);
  std::vector<std::size_t> counts(g_count);
  for (std::size_t n = 0; n < n_obs; ++n) {
    std::fill(z.begin(), z.end(), 0);
    double running = -std::numeric_limits<double>::infinity();
    while (true) {
      std::fill(counts.begin(), counts.end(), 0);
      double term = log_norm;
      for (std::size_t m = 0; m < n_attr; ++m) {
        term += logp[(n * n_attr + m) * g_count + z[m]];
        ++counts[z[m]];
      }
      for (std::size_t g = 0; g < g_count; ++g) {
        term += special::log_gamma(delta[g] + static_cast<double>(counts[g]));
      }
      const double hi = std::max(running, term);
      running = hi + std::log(std::exp(running - hi) + std::exp(term - hi));

      std::size_t pos = 0;
      while (pos < n_attr && ++z[pos] == g_count) z[pos++] = 0;
      if (pos == n_attr) break;
    }
    out[n] = running;
  }
  return out;
}

template <ExponentialFamily F = PoissonGamma>
double holdout_loglik_exact(const CountMatrix& x, const RealGrid& theta, std::span<const double> delta) {
  const auto terms = holdout_loglik_exact_terms<F>(x, theta, delta);
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

struct SweepConfig {
  std::size_t g_min = 1;
  std::size_t g_max = 6;
  InferenceMode mode = InferenceMode::kNuisance;
  PoissonGamma::Prior prior = PoissonGamma::vague();
  /// Explicit delta applied at every G'; empty means delta_g = 1/G'.
  std::optional<double> delta_value;
  FitConfig vb;
  EMConfig em;
  MCConfig mc;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool run_mixture = true;
  bool run_mixed_membership = true;
};

struct SweepRow {
  std::size_t g = 0;
  std::string criterion;  ///< "bic" (lower is better) or "holdout_loglik" (higher is better)
  double value = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string message;
  bool converged = false;
  std::size_t iterations = 0;
  double fit_objective = std::numeric_limits<double>::quiet_NaN();  ///< final loglik or ELBO
  std::uint64_t seed = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t train_rows = 0;
  std::size_t eval_rows = 0;

  /// G' with the best value of a criterion among successful rows (lowest G'
  /// on ties), or nullopt when no row succeeded.
  std::optional<std::size_t> best(const std::string& criterion) const {
    const bool minimize = criterion == "bic";
    std::optional<std::size_t> best_g;
    double best_value = 0.0;
    for (const auto& row : rows) {
      if (row.criterion != criterion || !row.ok) continue;
      const bool better = !best_g || (minimize ? row.value < best_value : row.value > best_value);
      if (better) {
        best_g = row.g;
        best_value = row.value;
      }
    }
    return best_g;
  }
};

/// Train / evaluation row split. With fraction 0 both sets are every row.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(std::size_t n_obs, double fraction,
                                                                                std::uint64_t seed) {
  std::vector<std::size_t> idx(n_obs);
  std::iota(idx.begin(), idx.end(), 0);
  if (fraction <= 0.0) return {idx, idx};
  Rng rng(mix_seed(seed));
  std::shuffle(idx.begin(), idx.end(), rng);
  auto held = static_cast<std::size_t>(std::round(fraction * static_cast<double>(n_obs)));
  held = std::clamp<std::size_t>(held, 1, n_obs - 1);
  std::vector<std::size_t> eval(idx.end() - static_cast<std::ptrdiff_t>(held), idx.end());
  std::vector<std::size_t> train(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(held));
  std::sort(train.begin(), train.end());
  std::sort(eval.begin(), eval.end());
  return {train, eval};
}

/// Fits both model families at every G' in [g_min, g_max]. Row i of the
/// grid uses seed (config.seed XOR i); failures are recorded, not thrown.
inline SweepResult sweep(const CountMatrix& x, const SweepConfig& config) {
  if (config.g_min < 1 || config.g_max < config.g_min) throw std::invalid_argument("sweep: invalid G range");
  config.mc.validate();
  const auto [train_idx, eval_idx] = split_rows(x.rows(), config.mc.holdout_fraction, config.seed);
  const CountMatrix train = config.mc.holdout_fraction > 0.0 ? x.select_rows(train_idx) : x;
  const CountMatrix eval = config.mc.holdout_fraction > 0.0 ? x.select_rows(eval_idx) : x;

  auto mixture_row = [&](std::size_t g, std::uint64_t seed) {
    SweepRow row{.g = g, .criterion = "bic", .seed = seed};
    try {
      EMConfig em = config.em;
      em.seed = seed;
      const auto fitted = fit_em(train, g, em);
      row.value = fitted.bic;
      row.ok = true;
      row.converged = fitted.converged;
      row.iterations = fitted.iterations_used;
      row.fit_objective = fitted.final_loglik();
    } catch (const std::exception& e) {
      row.message = e.what();
    }
    return row;
  };
  auto mm_row = [&](std::size_t g, std::uint64_t seed) {
    SweepRow row{.g = g, .criterion = "holdout_loglik", .seed = seed};
    try {
      auto model = MMModel<PoissonGamma>::standard(g, config.mode, config.prior);
      if (config.delta_value) model.delta.assign(g, *config.delta_value);
      FitConfig vb = config.vb;
      vb.seed = seed;
      const auto fitted = fit(train, model, vb);
      MCConfig mc = config.mc;
      mc.seed = mix_seed(seed);
      row.value = holdout_loglik_mc(eval, fitted.rates(), model.delta, mc);
      row.ok = true;
      row.converged = fitted.converged;
      row.iterations = fitted.iterations_used;
      row.fit_objective = fitted.final_elbo();
    } catch (const std::exception& e) {
      row.message = e.what();
    }
    return row;
  };

  struct Job {
    std::size_t g;
    bool mixture;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::size_t index = 0;
  for (std::size_t g = config.g_min; g <= config.g_max; ++g) {
    if (config.run_mixture) jobs.push_back({g, true, config.seed ^ index++});
    if (config.run_mixed_membership) jobs.push_back({g, false, config.seed ^ index++});
  }
  auto run = [&](const Job& job) { return job.mixture ? mixture_row(job.g, job.seed) : mm_row(job.g, job.seed); };

  SweepResult result;
  result.train_rows = train.rows();
  result.eval_rows = eval.rows();
  result.rows.resize(jobs.size());
  const std::size_t threads = std::max<std::size_t>(1, config.threads);
  for (std::size_t start = 0; start < jobs.size(); start += threads) {
    const std::size_t stop = std::min(jobs.size(), start + threads);
    if (threads == 1) {
      result.rows[start] = run(jobs[start]);
      continue;
    }
    std::vector<std::future<SweepRow>> pending;
    for (std::size_t j = start; j < stop; ++j) pending.push_back(std::async(std::launch::async, run, jobs[j]));
    for (std::size_t j = start; j < stop; ++j) result.rows[j] = pending[j - start].get();
  }
  return result;
}

}  // namespace mixmem
