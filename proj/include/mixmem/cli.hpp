#pragma once

// Command-line front end. Subcommands:
//   fit-mm       fit the mixed membership model, write mm_result.json + plot data
//   fit-mixture  fit the Poisson mixture by EM, write mixture_result.json + plot data
//   sweep        both families over a range of G', write sweep.json + sweep.csv
//   simulate     draw a dataset from the generative process, with truth files
//   evaluate     recompute membership statistics from a saved mm_result.json
//   report       cross-tabulate a saved mixture fit against a saved mm fit
//
// Profile, group and attribute indices are 1-based in every file written here.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixmem/data.hpp"
#include "mixmem/evaluate.hpp"
#include "mixmem/expfam.hpp"
#include "mixmem/io.hpp"
#include "mixmem/mixture.hpp"
#include "mixmem/select.hpp"
#include "mixmem/vb.hpp"

namespace mixmem::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every flag any subcommand accepts. Zero for max_iter / tol means "the
/// engine default for this command".
struct Settings {
  std::string data;
  std::string out;
  std::string truth;
  std::string fit_path;
  std::string mm_path;
  std::string mixture_path;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t g = 0;
  std::string mode = "nuisance";
  std::string delta = "1/G";
  std::string init = "dirichlet-row";
  double alpha = 0.01;
  double beta = 0.01;
  double tol = 0.0;
  std::size_t max_iter = 0;
  std::size_t restarts = 10;
  std::size_t bins = 20;
  std::size_t g_min = 1;
  std::size_t g_max = 6;
  std::size_t draws = 100000;
  double holdout_fraction = 0.0;
  std::size_t n = 300;
  std::size_t m = 24;
  std::string base_rates;
  double variation = 0.2;
  bool skip_mixture = false;
  bool skip_mm = false;
};

namespace detail {

inline Json grid_json(const RealGrid& g) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < g.cols(); ++c) row.push_back(g(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

template <class T>
Json one_based_grid_json(const Grid<T>& g) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < g.cols(); ++c) row.push_back(static_cast<long long>(g(r, c)) + 1);
    out.push_back(std::move(row));
  }
  return out;
}

inline RealGrid grid_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw std::runtime_error(std::string(what) + ": expected a matrix");
  RealGrid out(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size()) throw std::runtime_error(std::string(what) + ": ragged matrix");
    for (std::size_t c = 0; c < j[r].size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return out;
}

inline std::string num(double v) { return io::format_double(v); }

inline InferenceMode parse_mode(const std::string& mode) {
  if (mode == "bayes") return InferenceMode::kBayes;
  if (mode == "nuisance") return InferenceMode::kNuisance;
  throw UsageError("--mode must be 'bayes' or 'nuisance', got '" + mode + "'");
}

inline std::vector<double> parse_number_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  for (auto field : io::split_fields(text)) {
    const std::string cell(io::trim(field));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (cell.empty() || used != cell.size()) {
      throw UsageError(std::string(flag) + ": '" + cell + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

/// "1/G", one number applied to every profile, or G comma-separated numbers.
inline std::vector<double> resolve_delta(const std::string& spec, std::size_t g) {
  if (spec == "1/G") return std::vector<double>(g, 1.0 / static_cast<double>(g));
  auto values = parse_number_list(spec, "--delta");
  if (values.size() == 1) values.assign(g, values[0]);
  if (values.size() != g) throw UsageError("--delta needs 1 or G = " + std::to_string(g) + " values");
  for (double d : values) {
    if (!(d > 0.0)) throw UsageError("--delta entries must be positive");
  }
  return values;
}

inline std::vector<double> resolve_base_rates(const std::string& spec, std::size_t g) {
  if (spec.empty()) {
    std::vector<double> out;
    double rate = 2.0;
    for (std::size_t k = 0; k < g; ++k, rate *= 3.0) out.push_back(rate);
    return out;
  }
  auto values = parse_number_list(spec, "--base-rates");
  if (values.size() != g) throw UsageError("--base-rates needs G = " + std::to_string(g) + " values");
  return values;
}

inline std::string output_dir(const Settings& s) {
  std::string dir = s.out;
  if (dir.empty()) {
    const char* env = std::getenv("MIXMEM_OUTPUT_DIR");
    dir = env && *env ? env : ".";
  }
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

/// Shared header block for a result document.
inline Json document(const char* kind, const Json& config) {
  Json doc;
  doc["kind"] = kind;
  doc["format_version"] = kFormatVersion;
  doc["seed"] = config.at("seed");
  doc["config_hash"] = fnv1a_hex(config.dump());
  doc["config"] = config;
  return doc;
}

inline PlotFile plot(const Json& doc, std::vector<std::pair<std::string, std::string>> extra = {}) {
  PlotFile f;
  f.meta = {{"command", doc["config"]["command"].get<std::string>()},
            {"seed", std::to_string(doc["seed"].get<std::uint64_t>())},
            {"config_hash", doc["config_hash"].get<std::string>()}};
  for (auto& kv : extra) f.meta.push_back(std::move(kv));
  return f;
}

inline void write_json(const std::string& path, const Json& doc) { io::write_file(path, doc.dump(2) + "\n"); }

inline Json read_json(const std::string& path) {
  try {
    return Json::parse(io::read_file(path));
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path + ": not valid JSON (" + e.what() + ")");
  }
}

inline void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

inline void require_g(const Settings& s) {
  if (s.g < 1) throw UsageError("--G must be at least 1");
}

inline Json data_json(const CountMatrix& x, const std::string& path) {
  return Json{{"path", path},
              {"content_hash", fnv1a_hex(format_dataset(x))},
              {"N", x.rows()},
              {"M", x.cols()},
              {"id_header", x.id_header()},
              {"row_ids", x.row_ids()},
              {"col_ids", x.col_ids()}};
}

inline std::vector<std::string> profile_columns(std::size_t g, const char* prefix) {
  std::vector<std::string> out;
  for (std::size_t k = 1; k <= g; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

/// Rates per attribute, one column per profile or group.
inline void write_rate_curves(const std::string& path, const Json& doc, const RealGrid& rates,
                              const std::vector<std::string>& col_ids, const char* prefix) {
  auto f = plot(doc, {{"content", "expected count per attribute for each component"}});
  f.columns = {"attribute", "attribute_index"};
  for (auto& c : profile_columns(static_cast<std::size_t>(rates.rows()), prefix)) f.columns.push_back(c);
  for (Eigen::Index m = 0; m < rates.cols(); ++m) {
    std::vector<std::string> row{col_ids[static_cast<std::size_t>(m)], std::to_string(m + 1)};
    for (Eigen::Index g = 0; g < rates.rows(); ++g) row.push_back(num(rates(g, m)));
    f.rows.push_back(std::move(row));
  }
  f.write(path);
}

inline void write_histogram(const std::string& path, const Json& doc, const std::string& what,
                            std::span<const double> values, double lo, double hi, std::size_t bins) {
  auto f = plot(doc, {{"content", "histogram of " + what}, {"range", num(lo) + " to " + num(hi)}});
  f.columns = {"bin_lo", "bin_hi", "count"};
  for (const auto& b : histogram(values, lo, hi, bins)) f.rows.push_back({num(b.lo), num(b.hi), std::to_string(b.count)});
  f.write(path);
}

/// Per-observation statistics and the associated plot files.
struct MembershipSummary {
  ProfileAssignment assign;
  std::vector<double> eom;
};

inline MembershipSummary summarize(const PhiTensor& phi, const RealGrid& tau_hat) {
  return {assign_profiles(phi), eom_values(tau_hat)};
}

inline void add_membership_fields(Json& doc, const MembershipSummary& s) {
  doc["map_z"] = one_based_grid_json(s.assign.map_z);
  Json sets = Json::array();
  for (const auto& set : s.assign.profile_sets) sets.push_back(format_profile_set(set));
  doc["profile_sets"] = std::move(sets);
  doc["eom"] = s.eom;
  doc["uncertainty"] = grid_json(s.assign.uncertainty);
}

inline void write_membership_plots(const std::string& dir, const Json& doc, const MembershipSummary& s,
                                   const RealGrid& tau_hat, const std::vector<std::string>& row_ids,
                                   std::size_t bins) {
  const auto g = static_cast<std::size_t>(tau_hat.cols());
  write_histogram(join(dir, "eom_hist.csv"), doc, "extent of membership", s.eom, 1.0,
                  std::max(2.0, static_cast<double>(g)), bins);
  const std::vector<double> u(s.assign.uncertainty.data(), s.assign.uncertainty.data() + s.assign.uncertainty.size());
  write_histogram(join(dir, "uncertainty_hist.csv"), doc, "per-cell classification uncertainty", u, 0.0,
                  g > 1 ? 1.0 - 1.0 / static_cast<double>(g) : 1.0, bins);

  auto sets = plot(doc, {{"content", "distinct MAP profiles per observation"}});
  sets.columns = {"id", "profile_set", "set_size", "eom"};
  for (std::size_t n = 0; n < row_ids.size(); ++n) {
    sets.rows.push_back({row_ids[n], format_profile_set(s.assign.profile_sets[n]),
                         std::to_string(s.assign.profile_sets[n].size()), num(s.eom[n])});
  }
  sets.write(join(dir, "profile_sets.csv"));

  auto tern = plot(doc, {{"content", "ternary plot coordinates of renormalized membership triples"},
                         {"vertices", "first (0,0); second (1,0); third (0.5,0.8660254037844386)"}});
  tern.columns = {"face", "id", "x", "y"};
  for (const auto& face : ternary_coords(tau_hat)) {
    const std::string label = std::to_string(face.profiles[0] + 1) + "-" + std::to_string(face.profiles[1] + 1) +
                              "-" + std::to_string(face.profiles[2] + 1);
    for (std::size_t n = 0; n < face.points.size(); ++n) {
      tern.rows.push_back({label, row_ids[n], num(face.points[n].x), num(face.points[n].y)});
    }
  }
  tern.write(join(dir, "ternary_coords.csv"));
}

inline Json recovery(const std::string& dir, const Json& doc, const std::string& truth_dir, const RealGrid& rates,
                     const RealGrid& tau_hat) {
  const RealGrid theta = load_real_grid(join(truth_dir, "truth_theta.csv"), true);
  const RealGrid tau = load_real_grid(join(truth_dir, "truth_tau.csv"), true);
  if (theta.rows() != rates.rows() || theta.cols() != rates.cols() || tau.rows() != tau_hat.rows()) {
    throw std::runtime_error("--truth: truth files do not match the fitted G, M or N");
  }
  const auto perm = align_labels(rates, theta);
  double rate_err = 0.0, tau_err = 0.0;
  auto f = plot(doc, {{"content", "recovery of simulated parameters after label alignment"}});
  f.columns = {"true_profile", "fitted_profile", "mean_rel_rate_error", "mean_abs_tau_error"};
  Json per = Json::array();
  for (std::size_t g = 0; g < perm.size(); ++g) {
    const auto gi = static_cast<Eigen::Index>(g), ei = static_cast<Eigen::Index>(perm[g]);
    double r = 0.0, t = 0.0;
    for (Eigen::Index m = 0; m < theta.cols(); ++m) r += std::abs(rates(ei, m) - theta(gi, m)) / theta(gi, m);
    for (Eigen::Index n = 0; n < tau.rows(); ++n) t += std::abs(tau_hat(n, ei) - tau(n, gi));
    rate_err += r;
    tau_err += t;
    r /= static_cast<double>(theta.cols());
    t /= static_cast<double>(tau.rows());
    f.rows.push_back({std::to_string(g + 1), std::to_string(perm[g] + 1), num(r), num(t)});
    per.push_back({{"true_profile", g + 1}, {"fitted_profile", perm[g] + 1}, {"mean_rel_rate_error", r},
                   {"mean_abs_tau_error", t}});
  }
  f.write(join(dir, "recovery.csv"));
  return Json{{"truth_dir", truth_dir},
              {"mean_rel_rate_error", rate_err / static_cast<double>(theta.size())},
              {"mean_abs_tau_error", tau_err / static_cast<double>(tau.size())},
              {"profiles", per}};
}

}  // namespace detail

inline int cmd_fit_mm(const Settings& s, std::ostream& out) {
  detail::require(s.data, "--data");
  detail::require_g(s);
  const auto x = load_dataset(s.data);
  const auto mode = detail::parse_mode(s.mode);
  auto model = MMModel<PoissonGamma>::standard(s.g, mode, PoissonGamma::from_gamma(s.alpha, s.beta));
  model.delta = detail::resolve_delta(s.delta, s.g);
  FitConfig fc;
  fc.seed = s.seed;
  fc.threads = s.threads;
  fc.restarts = s.restarts;
  fc.init_scheme = s.init;
  if (s.max_iter) fc.max_iterations = s.max_iter;
  if (s.tol > 0.0) fc.elbo_rel_tolerance = s.tol;

  const Json config{{"command", "fit-mm"},
                    {"data", s.data},
                    {"G", s.g},
                    {"mode", to_string(mode)},
                    {"delta_spec", s.delta},
                    {"delta", model.delta},
                    {"prior", {{"alpha", s.alpha}, {"beta", s.beta}}},
                    {"tolerance", fc.elbo_rel_tolerance},
                    {"max_iterations", fc.max_iterations},
                    {"restarts", fc.restarts},
                    {"init_scheme", fc.init_scheme},
                    {"seed", fc.seed},
                    {"threads", fc.threads},
                    {"bins", s.bins},
                    {"truth", s.truth}};
  const auto result = fit(x, model, fc);
  const auto summary = detail::summarize(result.state.phi, result.tau_hat);
  const RealGrid rates = result.rates();

  Json doc = detail::document("mm_fit", config);
  doc["data"] = detail::data_json(x, s.data);
  doc["fit"] = {{"converged", result.converged},
                {"iterations", result.iterations_used},
                {"best_restart", result.best_restart + 1},
                {"final_elbo", result.final_elbo()},
                {"elbo_note", mode == InferenceMode::kBayes
                                  ? "lower bound on the log evidence"
                                  : "lower bound on log p(x | delta, theta_hat) at the final point estimate"},
                {"elbo_trace", result.elbo_trace}};
  doc["rates"] = detail::grid_json(rates);
  if (result.state.theta_post) {
    RealGrid shape(rates.rows(), rates.cols()), rate(rates.rows(), rates.cols());
    for (Eigen::Index g = 0; g < rates.rows(); ++g) {
      for (Eigen::Index m = 0; m < rates.cols(); ++m) {
        const auto& p = (*result.state.theta_post)[static_cast<std::size_t>(g * rates.cols() + m)];
        shape(g, m) = p.nu[0] + 1.0;
        rate(g, m) = p.eta;
      }
    }
    doc["theta_posterior"] = {{"shape", detail::grid_json(shape)}, {"rate", detail::grid_json(rate)}};
  } else {
    doc["theta_posterior"] = nullptr;
  }
  doc["gamma"] = detail::grid_json(result.state.gamma);
  doc["tau_hat"] = detail::grid_json(result.tau_hat);
  Json phi = Json::array();
  for (std::size_t n = 0; n < x.rows(); ++n) {
    Json row = Json::array();
    for (std::size_t m = 0; m < x.cols(); ++m) {
      const auto cell = result.state.phi.cell(n, m);
      row.push_back(std::vector<double>(cell.begin(), cell.end()));
    }
    phi.push_back(std::move(row));
  }
  doc["phi"] = std::move(phi);
  detail::add_membership_fields(doc, summary);

  const auto dir = detail::output_dir(s);
  detail::write_rate_curves(detail::join(dir, "theta_curves.csv"), doc, rates, x.col_ids(), "profile_");
  detail::write_membership_plots(dir, doc, summary, result.tau_hat, x.row_ids(), s.bins);
  if (!s.truth.empty()) doc["recovery"] = detail::recovery(dir, doc, s.truth, rates, result.tau_hat);
  detail::write_json(detail::join(dir, "mm_result.json"), doc);

  out << "fit-mm: G=" << s.g << " mode=" << to_string(mode) << " elbo=" << detail::num(result.final_elbo())
      << (result.converged ? " converged" : " NOT converged") << " after " << result.iterations_used
      << " iterations; wrote " << detail::join(dir, "mm_result.json") << "\n";
  if (doc.contains("recovery")) {
    out << "recovery: mean relative rate error " << detail::num(doc["recovery"]["mean_rel_rate_error"].get<double>())
        << ", mean absolute tau error " << detail::num(doc["recovery"]["mean_abs_tau_error"].get<double>()) << "\n";
  }
  return 0;
}

inline int cmd_fit_mixture(const Settings& s, std::ostream& out) {
  detail::require(s.data, "--data");
  detail::require_g(s);
  const auto x = load_dataset(s.data);
  EMConfig ec;
  ec.seed = s.seed;
  ec.threads = s.threads;
  ec.restarts = s.restarts;
  if (s.max_iter) ec.max_iterations = s.max_iter;
  if (s.tol > 0.0) ec.loglik_rel_tolerance = s.tol;
  const Json config{{"command", "fit-mixture"},  {"data", s.data},
                    {"G", s.g},                  {"tolerance", ec.loglik_rel_tolerance},
                    {"max_iterations", ec.max_iterations}, {"restarts", ec.restarts},
                    {"init_scheme", "dirichlet-responsibilities"},
                    {"seed", ec.seed},           {"threads", ec.threads},
                    {"bins", s.bins}};
  const auto result = fit_em(x, s.g, ec);
  const auto assign = mixture_map_and_uncertainty(result.resp.probs);

  Json doc = detail::document("mixture_fit", config);
  doc["data"] = detail::data_json(x, s.data);
  doc["fit"] = {{"converged", result.converged},
                {"iterations", result.iterations_used},
                {"best_restart", result.best_restart + 1},
                {"final_loglik", result.final_loglik()},
                {"bic", result.bic},
                {"parameter_count", mixture_parameter_count(s.g, x.cols())},
                {"bic_note", "BIC = -2 loglik + parameter_count log N; lower is better"},
                {"loglik_trace", result.loglik_trace}};
  doc["weights"] = result.model.weights;
  doc["rates"] = detail::grid_json(result.model.rates);
  doc["responsibilities"] = detail::grid_json(result.resp.probs);
  Json groups = Json::array();
  for (auto g : assign.groups) groups.push_back(g + 1);
  doc["map_group"] = std::move(groups);
  doc["uncertainty"] = assign.uncertainty;

  const auto dir = detail::output_dir(s);
  detail::write_rate_curves(detail::join(dir, "mixture_theta_curves.csv"), doc, result.model.rates, x.col_ids(),
                            "group_");
  detail::write_histogram(detail::join(dir, "mixture_uncertainty_hist.csv"), doc, "per-observation classification uncertainty",
                          assign.uncertainty, 0.0, s.g > 1 ? 1.0 - 1.0 / static_cast<double>(s.g) : 1.0, s.bins);
  auto f = detail::plot(doc, {{"content", "MAP group and uncertainty per observation"}});
  f.columns = {"id", "group", "uncertainty"};
  for (std::size_t n = 0; n < x.rows(); ++n) {
    f.rows.push_back({x.row_ids()[n], std::to_string(assign.groups[n] + 1), detail::num(assign.uncertainty[n])});
  }
  f.write(detail::join(dir, "mixture_assignments.csv"));
  detail::write_json(detail::join(dir, "mixture_result.json"), doc);

  out << "fit-mixture: G=" << s.g << " loglik=" << detail::num(result.final_loglik())
      << " bic=" << detail::num(result.bic) << (result.converged ? " converged" : " NOT converged") << "; wrote "
      << detail::join(dir, "mixture_result.json") << "\n";
  return 0;
}

inline int cmd_sweep(const Settings& s, std::ostream& out) {
  detail::require(s.data, "--data");
  const auto x = load_dataset(s.data);
  if (s.g_min < 1 || s.g_max < s.g_min) throw UsageError("need 1 <= --g-min <= --g-max");
  SweepConfig sc;
  sc.g_min = s.g_min;
  sc.g_max = s.g_max;
  sc.mode = detail::parse_mode(s.mode);
  sc.prior = PoissonGamma::from_gamma(s.alpha, s.beta);
  if (s.delta != "1/G") {
    const auto values = detail::parse_number_list(s.delta, "--delta");
    if (values.size() != 1 || !(values[0] > 0.0)) throw UsageError("sweep: --delta must be '1/G' or one positive number");
    sc.delta_value = values[0];
  }
  sc.seed = s.seed;
  sc.threads = s.threads;
  sc.vb.restarts = sc.em.restarts = s.restarts;
  sc.vb.init_scheme = s.init;
  if (s.max_iter) sc.vb.max_iterations = sc.em.max_iterations = s.max_iter;
  if (s.tol > 0.0) sc.vb.elbo_rel_tolerance = s.tol;
  sc.mc.draws = s.draws;
  sc.mc.holdout_fraction = s.holdout_fraction;
  sc.run_mixture = !s.skip_mixture;
  sc.run_mixed_membership = !s.skip_mm;

  const Json config{{"command", "sweep"},
                    {"data", s.data},
                    {"g_min", sc.g_min},
                    {"g_max", sc.g_max},
                    {"mode", to_string(sc.mode)},
                    {"delta_spec", s.delta},
                    {"prior", {{"alpha", s.alpha}, {"beta", s.beta}}},
                    {"vb_tolerance", sc.vb.elbo_rel_tolerance},
                    {"em_tolerance", sc.em.loglik_rel_tolerance},
                    {"vb_max_iterations", sc.vb.max_iterations},
                    {"em_max_iterations", sc.em.max_iterations},
                    {"restarts", s.restarts},
                    {"init_scheme", sc.vb.init_scheme},
                    {"draws", sc.mc.draws},
                    {"holdout_fraction", sc.mc.holdout_fraction},
                    {"run_mixture", sc.run_mixture},
                    {"run_mixed_membership", sc.run_mixed_membership},
                    {"row_seed_rule", "seed XOR row index"},
                    {"seed", sc.seed},
                    {"threads", sc.threads}};
  const auto result = sweep(x, sc);

  Json doc = detail::document("sweep", config);
  doc["data"] = detail::data_json(x, s.data);
  doc["train_rows"] = result.train_rows;
  doc["eval_rows"] = result.eval_rows;
  doc["orientation"] = {{"bic", "lower is better"}, {"holdout_loglik", "higher is better"}};
  Json rows = Json::array();
  auto f = detail::plot(doc, {{"orientation", "bic: lower is better, plot_value = -bic so that higher is better on "
                                              "every axis; holdout_loglik: higher is better, plot_value = value"}});
  f.columns = {"G", "criterion", "value", "plot_value", "ok", "converged", "iterations", "fit_objective", "seed",
               "message"};
  for (const auto& r : result.rows) {
    const double plot_value = r.criterion == "bic" ? -r.value : r.value;
    rows.push_back({{"G", r.g},
                    {"criterion", r.criterion},
                    {"value", r.ok ? Json(r.value) : Json(nullptr)},
                    {"ok", r.ok},
                    {"message", r.message},
                    {"converged", r.converged},
                    {"iterations", r.iterations},
                    {"fit_objective", r.ok ? Json(r.fit_objective) : Json(nullptr)},
                    {"seed", r.seed}});
    f.rows.push_back({std::to_string(r.g), r.criterion, r.ok ? detail::num(r.value) : "", r.ok ? detail::num(plot_value) : "",
                      r.ok ? "1" : "0", r.converged ? "1" : "0", std::to_string(r.iterations),
                      r.ok ? detail::num(r.fit_objective) : "", std::to_string(r.seed), r.message});
  }
  doc["rows"] = std::move(rows);
  Json best;
  for (const char* c : {"bic", "holdout_loglik"}) {
    const auto b = result.best(c);
    best[c] = b ? Json(*b) : Json(nullptr);
  }
  doc["best"] = best;

  const auto dir = detail::output_dir(s);
  f.write(detail::join(dir, "sweep.csv"));
  detail::write_json(detail::join(dir, "sweep.json"), doc);
  out << "sweep: G' in [" << sc.g_min << ", " << sc.g_max << "]";
  for (const char* c : {"bic", "holdout_loglik"}) {
    out << "; best " << c << " G'=" << (best[c].is_null() ? std::string("none") : std::to_string(best[c].get<std::size_t>()));
  }
  out << "; wrote " << detail::join(dir, "sweep.json") << "\n";
  return 0;
}

inline int cmd_simulate(const Settings& s, std::ostream& out) {
  detail::require_g(s);
  if (s.n < 1 || s.m < 1) throw UsageError("--N and --M must be at least 1");
  if (!(s.variation >= 0.0 && s.variation < 1.0)) throw UsageError("--variation must lie in [0, 1)");
  const auto base = detail::resolve_base_rates(s.base_rates, s.g);
  auto model = MMModel<PoissonGamma>::standard(s.g, InferenceMode::kNuisance, PoissonGamma::vague());
  model.delta = detail::resolve_delta(s.delta, s.g);

  // Rates base_g * (1 + U(-v, v)) per attribute, from a stream separate from the data draws.
  Rng rate_rng(mix_seed(s.seed ^ 0x5eedULL));
  std::uniform_real_distribution<double> jitter(-s.variation, s.variation);
  RealGrid theta(static_cast<Eigen::Index>(s.g), static_cast<Eigen::Index>(s.m));
  for (Eigen::Index g = 0; g < theta.rows(); ++g) {
    for (Eigen::Index m = 0; m < theta.cols(); ++m) theta(g, m) = base[static_cast<std::size_t>(g)] * (1.0 + jitter(rate_rng));
  }
  const auto sim = generate(s.n, s.m, model, theta, s.seed);

  const Json config{{"command", "simulate"}, {"G", s.g},       {"N", s.n},
                    {"M", s.m},              {"delta_spec", s.delta}, {"delta", model.delta},
                    {"base_rates", base},    {"variation", s.variation}, {"seed", s.seed}};
  Json doc = detail::document("simulation", config);
  doc["theta"] = detail::grid_json(theta);
  doc["files"] = {"data.csv", "truth_theta.csv", "truth_tau.csv", "truth_z.csv"};

  const auto dir = detail::output_dir(s);
  save_dataset(sim.data, detail::join(dir, "data.csv"));
  auto th = detail::plot(doc, {{"content", "true rates, one row per profile"}});
  th.columns = {"profile"};
  for (const auto& c : sim.data.col_ids()) th.columns.push_back(c);
  for (Eigen::Index g = 0; g < theta.rows(); ++g) {
    std::vector<std::string> row{std::to_string(g + 1)};
    for (Eigen::Index m = 0; m < theta.cols(); ++m) row.push_back(detail::num(theta(g, m)));
    th.rows.push_back(std::move(row));
  }
  th.write(detail::join(dir, "truth_theta.csv"));
  auto ta = detail::plot(doc, {{"content", "true membership vectors"}});
  ta.columns = {"id"};
  for (auto& c : detail::profile_columns(s.g, "profile_")) ta.columns.push_back(c);
  auto tz = detail::plot(doc, {{"content", "true profile of each cell"}});
  tz.columns = {"id"};
  for (const auto& c : sim.data.col_ids()) tz.columns.push_back(c);
  for (std::size_t n = 0; n < s.n; ++n) {
    const auto ni = static_cast<Eigen::Index>(n);
    std::vector<std::string> trow{sim.data.row_ids()[n]}, zrow{sim.data.row_ids()[n]};
    for (Eigen::Index g = 0; g < sim.tau.cols(); ++g) trow.push_back(detail::num(sim.tau(ni, g)));
    for (Eigen::Index m = 0; m < sim.assignments.cols(); ++m) zrow.push_back(std::to_string(sim.assignments(ni, m) + 1));
    ta.rows.push_back(std::move(trow));
    tz.rows.push_back(std::move(zrow));
  }
  ta.write(detail::join(dir, "truth_tau.csv"));
  tz.write(detail::join(dir, "truth_z.csv"));
  detail::write_json(detail::join(dir, "simulation.json"), doc);
  out << "simulate: N=" << s.n << " M=" << s.m << " G=" << s.g << "; wrote " << detail::join(dir, "data.csv") << "\n";
  return 0;
}

/// Loads phi (N x M x G) and tau_hat from a saved mm_result.json.
inline std::pair<PhiTensor, RealGrid> load_mm_state(const Json& doc, const std::string& path) {
  if (doc.value("kind", "") != "mm_fit") throw std::runtime_error(path + ": not an mm_fit result document");
  const auto& phi_j = doc.at("phi");
  const std::size_t n = phi_j.size(), m = n ? phi_j[0].size() : 0, g = m ? phi_j[0][0].size() : 0;
  if (!n || !m || !g) throw std::runtime_error(path + ": empty phi");
  PhiTensor phi(n, m, g);
  for (std::size_t i = 0; i < n; ++i) {
    if (phi_j[i].size() != m) throw std::runtime_error(path + ": ragged phi");
    for (std::size_t j = 0; j < m; ++j) {
      if (phi_j[i][j].size() != g) throw std::runtime_error(path + ": ragged phi");
      for (std::size_t k = 0; k < g; ++k) phi(i, j, k) = phi_j[i][j][k].get<double>();
    }
  }
  return {std::move(phi), normalize_rows(detail::grid_from_json(doc.at("gamma"), "gamma"))};
}

inline int cmd_evaluate(const Settings& s, std::ostream& out) {
  detail::require(s.fit_path, "--fit");
  const Json fitted = detail::read_json(s.fit_path);
  const auto [phi, tau_hat] = load_mm_state(fitted, s.fit_path);
  const auto row_ids = fitted.at("data").at("row_ids").get<std::vector<std::string>>();
  const Json config{{"command", "evaluate"},
                    {"fit", s.fit_path},
                    {"fit_config_hash", fitted.at("config_hash")},
                    {"bins", s.bins},
                    {"seed", fitted.at("seed")}};
  const auto summary = detail::summarize(phi, tau_hat);
  Json doc = detail::document("evaluation", config);
  doc["G"] = phi.profiles();
  doc["tau_hat"] = detail::grid_json(tau_hat);
  detail::add_membership_fields(doc, summary);
  std::map<std::string, std::size_t> set_counts;
  std::size_t single = 0;
  for (const auto& set : summary.assign.profile_sets) {
    ++set_counts[format_profile_set(set)];
    single += set.size() == 1;
  }
  Json counts = Json::array();
  for (const auto& [label, c] : set_counts) counts.push_back({{"profile_set", label}, {"count", c}});
  doc["profile_set_counts"] = std::move(counts);
  doc["single_profile_fraction"] = static_cast<double>(single) / static_cast<double>(row_ids.size());

  const auto dir = detail::output_dir(s);
  detail::write_membership_plots(dir, doc, summary, tau_hat, row_ids, s.bins);
  detail::write_json(detail::join(dir, "evaluation.json"), doc);
  out << "evaluate: " << single << " of " << row_ids.size() << " observations map to a single profile; wrote "
      << detail::join(dir, "evaluation.json") << "\n";
  return 0;
}

inline int cmd_report(const Settings& s, std::ostream& out) {
  detail::require(s.mm_path, "--mm");
  detail::require(s.mixture_path, "--mixture");
  const Json mm = detail::read_json(s.mm_path);
  const Json mix = detail::read_json(s.mixture_path);
  if (mix.value("kind", "") != "mixture_fit") throw std::runtime_error(s.mixture_path + ": not a mixture_fit document");
  const auto [phi, tau_hat] = load_mm_state(mm, s.mm_path);
  const auto ids = mm.at("data").at("row_ids").get<std::vector<std::string>>();
  if (mix.at("data").at("row_ids").get<std::vector<std::string>>() != ids) {
    throw std::runtime_error("report: the two fits were made on different observations");
  }
  const auto assign = assign_profiles(phi);
  std::vector<std::size_t> groups;
  for (const auto& g : mix.at("map_group")) groups.push_back(g.get<std::size_t>() - 1);
  const std::size_t g_mix = mix.at("weights").size();
  const auto tab = cross_tab(groups, assign.profile_sets, g_mix);

  const Json config{{"command", "report"},
                    {"mm", s.mm_path},
                    {"mixture", s.mixture_path},
                    {"mm_config_hash", mm.at("config_hash")},
                    {"mixture_config_hash", mix.at("config_hash")},
                    {"seed", mm.at("seed")}};
  Json doc = detail::document("report", config);
  Json columns = Json::array();
  for (const auto& c : tab.columns) columns.push_back(format_profile_set(c));
  doc["groups"] = tab.groups;
  doc["columns"] = columns;
  doc["counts"] = tab.counts;
  doc["total"] = tab.total();

  auto f = detail::plot(doc, {{"content", "mixture groups (rows) against MAP profile sets (columns)"},
                              {"column_order", "descending total count, then lexicographic"}});
  f.columns = {"group"};
  for (const auto& c : columns) f.columns.push_back(c.get<std::string>());
  f.columns.push_back("total");
  for (std::size_t g = 0; g < tab.groups; ++g) {
    std::vector<std::string> row{std::to_string(g + 1)};
    std::size_t total = 0;
    for (auto c : tab.counts[g]) {
      row.push_back(std::to_string(c));
      total += c;
    }
    row.push_back(std::to_string(total));
    f.rows.push_back(std::move(row));
  }
  const auto dir = detail::output_dir(s);
  f.write(detail::join(dir, "crosstab.csv"));
  detail::write_json(detail::join(dir, "report.json"), doc);
  out << "report: " << tab.groups << " groups x " << tab.columns.size() << " profile sets; wrote "
      << detail::join(dir, "crosstab.csv") << "\n";
  return 0;
}

/// Parses `args` (without the program name) and runs one subcommand.
/// Returns the process exit status; diagnostics go to `err`.
inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mixed membership and mixture models for count data", "mixmem"};
  app.require_subcommand(1);
  Settings s;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", s.out, "Output directory (default: $MIXMEM_OUTPUT_DIR or .)");
    sub->add_option("--seed", s.seed, "Master random seed")->capture_default_str();
  };
  auto data = [&](CLI::App* sub) { sub->add_option("--data", s.data, "Dataset file")->required(); };
  auto controls = [&](CLI::App* sub) {
    sub->add_option("--threads", s.threads, "Parallel restarts / sweep rows")->check(CLI::PositiveNumber);
    sub->add_option("--tol", s.tol, "Relative convergence tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", s.max_iter, "Iteration cap per run")->check(CLI::PositiveNumber);
    sub->add_option("--restarts", s.restarts, "Seeded random restarts")->check(CLI::PositiveNumber)->capture_default_str();
  };
  auto mm_flags = [&](CLI::App* sub) {
    sub->add_option("--mode", s.mode, "bayes or nuisance")->check(CLI::IsMember({"bayes", "nuisance"}))->capture_default_str();
    sub->add_option("--delta", s.delta, "'1/G', one value, or G comma-separated values")->capture_default_str();
    sub->add_option("--alpha", s.alpha, "Gamma prior shape")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--beta", s.beta, "Gamma prior rate")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--init", s.init, "dirichlet-row or dirichlet-phi")
        ->check(CLI::IsMember({"dirichlet-row", "dirichlet-phi"}))
        ->capture_default_str();
  };

  auto* fit_mm = app.add_subcommand("fit-mm", "Fit the mixed membership model");
  common(fit_mm);
  data(fit_mm);
  controls(fit_mm);
  mm_flags(fit_mm);
  fit_mm->add_option("--G", s.g, "Number of profiles")->required()->check(CLI::PositiveNumber);
  fit_mm->add_option("--bins", s.bins, "Histogram bins")->check(CLI::PositiveNumber)->capture_default_str();
  fit_mm->add_option("--truth", s.truth, "Directory written by simulate; enables recovery metrics");

  auto* fit_mix = app.add_subcommand("fit-mixture", "Fit the finite Poisson mixture by EM");
  common(fit_mix);
  data(fit_mix);
  controls(fit_mix);
  fit_mix->add_option("--G", s.g, "Number of groups")->required()->check(CLI::PositiveNumber);
  fit_mix->add_option("--bins", s.bins, "Histogram bins")->check(CLI::PositiveNumber)->capture_default_str();

  auto* sw = app.add_subcommand("sweep", "Model selection over a range of G'");
  common(sw);
  data(sw);
  controls(sw);
  mm_flags(sw);
  sw->add_option("--g-min", s.g_min, "Smallest G'")->check(CLI::PositiveNumber)->capture_default_str();
  sw->add_option("--g-max", s.g_max, "Largest G'")->check(CLI::PositiveNumber)->capture_default_str();
  sw->add_option("--draws", s.draws, "Monte Carlo draws T")->check(CLI::PositiveNumber)->capture_default_str();
  sw->add_option("--holdout-fraction", s.holdout_fraction, "Rows held out for evaluation (0 = evaluate on all)")
      ->check(CLI::Range(0.0, 0.99))
      ->capture_default_str();
  sw->add_flag("--no-mixture", s.skip_mixture, "Skip the mixture rows");
  sw->add_flag("--no-mm", s.skip_mm, "Skip the mixed membership rows");

  auto* sim = app.add_subcommand("simulate", "Draw a dataset from the generative process");
  common(sim);
  sim->add_option("--G", s.g, "Number of profiles")->required()->check(CLI::PositiveNumber);
  sim->add_option("--N", s.n, "Observations")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--M", s.m, "Attributes")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--delta", s.delta, "'1/G', one value, or G comma-separated values")->capture_default_str();
  sim->add_option("--base-rates", s.base_rates, "G comma-separated base rates (default 2, 6, 18, ...)");
  sim->add_option("--variation", s.variation, "Relative per-attribute jitter of each base rate")->capture_default_str();

  auto* ev = app.add_subcommand("evaluate", "Recompute membership statistics from a saved fit");
  common(ev);
  ev->add_option("--fit", s.fit_path, "mm_result.json")->required();
  ev->add_option("--bins", s.bins, "Histogram bins")->check(CLI::PositiveNumber)->capture_default_str();

  auto* rep = app.add_subcommand("report", "Cross-tabulate a mixture fit against an mm fit");
  common(rep);
  rep->add_option("--mm", s.mm_path, "mm_result.json")->required();
  rep->add_option("--mixture", s.mixture_path, "mixture_result.json")->required();

  std::vector<std::string> storage{"mixmem"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*fit_mm) return cmd_fit_mm(s, out);
    if (*fit_mix) return cmd_fit_mixture(s, out);
    if (*sw) return cmd_sweep(s, out);
    if (*sim) return cmd_simulate(s, out);
    if (*ev) return cmd_evaluate(s, out);
    if (*rep) return cmd_report(s, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mixmem::cli
