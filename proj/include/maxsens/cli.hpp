// maxsens/cli.hpp -- experiment harness: JSON configuration, deterministic
// replicate execution over every estimator, oracle truth attachment, and
// CSV/JSON emission.
//
// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#ifndef MAXSENS_CLI_HPP
#define MAXSENS_CLI_HPP

#include <Eigen/Dense>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "maxsens/core.hpp"
#include "maxsens/errors.hpp"
#include "maxsens/gauss.hpp"
#include "maxsens/ipa.hpp"
#include "maxsens/lrm.hpp"
#include "maxsens/oracle.hpp"
#include "maxsens/detail/parallel.hpp"
#include "maxsens/simulate.hpp"

namespace maxsens {
namespace cli {

enum class Model { brown_resnick, smith };
enum class Method { lrm, ipa, oracle, fd_check };

inline std::string to_string(Model m) {
  return m == Model::brown_resnick ? "brown_resnick" : "smith";
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::lrm: return "lrm";
    case Method::ipa: return "ipa";
    case Method::oracle: return "oracle";
    case Method::fd_check: return "fd_check";
  }
  return "?";
}

/// Full description of one experiment: model, dependence parameters, sites,
/// margins, estimation method, and execution controls.
struct ExperimentConfig {
  Model model = Model::brown_resnick;
  std::optional<core::BrParams> br;
  std::optional<core::SmithParams> smith;
  std::vector<core::Site> sites;
  std::vector<core::Margins> margins;  ///< one per site
  Method method = Method::oracle;
  std::size_t n_sims = 10000;
  std::size_t n_replicates = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  double truncation_radius = 15.0;
  double fd_step = 1e-3;  ///< absolute step of the fd_check method
  std::string output;     ///< empty writes to stdout

  /// Checks every subcommand needs: parameters, sites, margins, controls.
  void validate_simulation() const {
    if (model == Model::brown_resnick && !br.has_value()) {
      throw config_error("config.params: brown_resnick requires kappa/psi");
    }
    if (model == Model::smith && !smith.has_value()) {
      throw config_error("config.params: smith requires a sigma matrix");
    }
    if (sites.empty()) {
      throw config_error("config.sites: at least one site is required");
    }
    if (margins.size() != sites.size()) {
      throw config_error("config.margins: need exactly one margin per site");
    }
    const int d = sites.front().dim();
    for (const auto& s : sites) {
      if (s.dim() != d) {
        throw config_error("config.sites: sites must share one dimension");
      }
    }
    if (model == Model::smith && smith->dim() != d) {
      throw config_error("config.sites: site dimension must match sigma");
    }
    if (n_sims < 1) throw config_error("config.n_sims: must be positive");
    if (n_replicates < 1) {
      throw config_error("config.n_replicates: must be positive");
    }
    if (threads < 0) throw config_error("config.threads: must be nonnegative");
    if (!(truncation_radius > 0.0)) {
      throw config_error("config.truncation_radius: must be positive");
    }
    if (!(fd_step > 0.0)) {
      throw config_error("config.fd_step: must be positive");
    }
  }

  /// Full validation, including method/model compatibility.
  void validate() const {
    validate_simulation();
    if (method == Method::ipa && model != Model::smith) {
      throw config_error("config.method: ipa requires the smith model");
    }
    if (method == Method::lrm && model != Model::brown_resnick) {
      throw config_error(
          "config.method: lrm (exact score) requires the brown_resnick model");
    }
    if (sites.size() != 2) {
      throw config_error(
          "config.sites: the pairwise methods require exactly 2 sites");
    }
  }
};

/// One emitted result: a parameter estimate from one replicate, with the
/// analytic truth attached when the oracle covers the configuration.
struct ResultRow {
  std::string method;
  std::string model;
  std::string param;
  std::int64_t replicate = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::optional<double> true_value;
  std::optional<double> rel_error;
};

namespace detail_cli {

inline ResultRow make_row(const ExperimentConfig& cfg, const std::string& param,
                          std::int64_t replicate, double estimate,
                          double std_error, std::optional<double> truth) {
  ResultRow row;
  row.method = to_string(cfg.method);
  row.model = to_string(cfg.model);
  row.param = param;
  row.replicate = replicate;
  row.estimate = estimate;
  row.std_error = std_error;
  row.true_value = truth;
  if (truth.has_value() && *truth != 0.0) {
    row.rel_error = (estimate - *truth) / *truth;
  }
  return row;
}

/// Simulation config of one replicate: replicate-indexed derived seed, and
/// within-replicate threading only when there is a single replicate (the
/// replicate loop itself is the parallel axis otherwise).
inline simulate::SimConfig replicate_sim_config(const ExperimentConfig& cfg,
                                                std::size_t replicate) {
  simulate::SimConfig sim;
  sim.n_sims = cfg.n_sims;
  sim.truncation_radius = cfg.truncation_radius;
  sim.seed = gauss::derive_seed(cfg.seed, replicate);
  sim.threads = cfg.n_replicates > 1 ? 1 : cfg.threads;
  return sim;
}

/// Mean and standard error of the per-simulation common-random-number
/// central difference (H_hi - H_lo) / denom, pairing draws by simulation
/// index (identical replicate seeds on both sides).
template <typename Batch>
std::pair<double, double> paired_fd(const Batch& lo, const Batch& hi,
                                    const core::HPerformance& perf,
                                    double denom) {
  const std::size_t n = lo.n_sims();
  double mean = 0.0;
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = (perf.value(hi.value(i, 0), hi.value(i, 1)) -
               perf.value(lo.value(i, 0), lo.value(i, 1))) /
              denom;
    mean += diff[i];
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : diff) ss += (v - mean) * (v - mean);
  const double se =
      n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) /
                        static_cast<double>(n))
            : 0.0;
  return {mean, se};
}

inline Eigen::MatrixXd perturbed_sigma(const Eigen::MatrixXd& sigma, int i,
                                       int j, double delta) {
  Eigen::MatrixXd out = sigma;
  out(i, j) += delta;
  if (i != j) out(j, i) += delta;
  return out;
}

}  // namespace detail_cli

/// Execute the configured experiment: n_replicates independent estimations
/// with replicate-indexed RNG streams, oracle truth attached to every row.
/// Row order is deterministic (replicate-major, fixed parameter order) and
/// independent of the thread count.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const core::Site& x1 = cfg.sites[0];
  const core::Site& x2 = cfg.sites[1];
  const core::Margins& m1 = cfg.margins[0];
  const core::Margins& m2 = cfg.margins[1];
  const oracle::QuadConfig quad;

  std::vector<ResultRow> rows;

  if (cfg.model == Model::brown_resnick) {
    const core::BrParams& dep = *cfg.br;
    const double truth_r = oracle::analytic_correlation(dep, x1, x2, m1, m2, quad);
    const oracle::BrSensitivity truth =
        oracle::analytic_sensitivity(dep, x1, x2, m1, m2, quad);

    if (cfg.method == Method::oracle) {
      rows.push_back(detail_cli::make_row(cfg, "kappa", 0, truth.d_kappa, 0.0,
                                          truth.d_kappa));
      rows.push_back(
          detail_cli::make_row(cfg, "psi", 0, truth.d_psi, 0.0, truth.d_psi));
      rows.push_back(detail_cli::make_row(cfg, "R", 0, truth_r, 0.0, truth_r));
      return rows;
    }

    struct Pair {
      core::SensitivityEstimate kappa, psi;
    };
    std::vector<Pair> per_rep(cfg.n_replicates);
    detail::parallel_for(
        cfg.n_replicates, cfg.n_replicates > 1 ? cfg.threads : 1,
        [&](std::size_t r) {
          const simulate::SimConfig sim = detail_cli::replicate_sim_config(cfg, r);
          if (cfg.method == Method::lrm) {
            const lrm::LrmEstimate est =
                lrm::lrm_estimate(dep, x1, x2, m1, m2, sim);
            per_rep[r] = Pair{est.d_kappa, est.d_psi};
          } else {  // fd_check with common random numbers
            const core::HPerformance perf(m1, m2);
            const double d = cfg.fd_step;
            const auto hi_k = simulate::simulate_brown_resnick(
                core::BrParams(dep.kappa + d, dep.psi), {x1, x2}, sim);
            const auto lo_k = simulate::simulate_brown_resnick(
                core::BrParams(dep.kappa - d, dep.psi), {x1, x2}, sim);
            const auto [ek, sk] = detail_cli::paired_fd(lo_k, hi_k, perf, 2.0 * d);
            const auto hi_p = simulate::simulate_brown_resnick(
                core::BrParams(dep.kappa, dep.psi + d), {x1, x2}, sim);
            const auto lo_p = simulate::simulate_brown_resnick(
                core::BrParams(dep.kappa, dep.psi - d), {x1, x2}, sim);
            const auto [ep, sp] = detail_cli::paired_fd(lo_p, hi_p, perf, 2.0 * d);
            per_rep[r] = Pair{{ek, sk, sim.n_sims, sim.seed},
                              {ep, sp, sim.n_sims, sim.seed}};
          }
        });
    for (std::size_t r = 0; r < cfg.n_replicates; ++r) {
      rows.push_back(detail_cli::make_row(
          cfg, "kappa", static_cast<std::int64_t>(r), per_rep[r].kappa.value,
          per_rep[r].kappa.std_error, truth.d_kappa));
      rows.push_back(detail_cli::make_row(
          cfg, "psi", static_cast<std::int64_t>(r), per_rep[r].psi.value,
          per_rep[r].psi.std_error, truth.d_psi));
    }
    return rows;
  }

  // Smith model.
  const core::SmithParams& dep = *cfg.smith;
  const double truth_r = oracle::analytic_correlation(dep, x1, x2, m1, m2, quad);
  const oracle::SmithSensitivity truth =
      oracle::analytic_sensitivity(dep, x1, x2, m1, m2, quad);
  const int d = dep.dim();
  const auto param_name = [](int i, int j) {
    return "sigma_" + std::to_string(i + 1) + std::to_string(j + 1);
  };

  if (cfg.method == Method::oracle) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        rows.push_back(detail_cli::make_row(cfg, param_name(i, j), 0,
                                            truth.d_sigma(i, j), 0.0,
                                            truth.d_sigma(i, j)));
      }
    }
    rows.push_back(detail_cli::make_row(cfg, "R", 0, truth_r, 0.0, truth_r));
    return rows;
  }

  std::vector<ipa::IpaEstimate> per_rep(cfg.n_replicates);
  detail::parallel_for(
      cfg.n_replicates, cfg.n_replicates > 1 ? cfg.threads : 1,
      [&](std::size_t r) {
        const simulate::SimConfig sim = detail_cli::replicate_sim_config(cfg, r);
        if (cfg.method == Method::ipa) {
          per_rep[r] = ipa::ipa_estimate(dep, x1, x2, m1, m2, sim);
        } else {  // fd_check: symmetric-pair perturbation, halved off-diagonal
          const core::HPerformance perf(m1, m2);
          const double step = cfg.fd_step;
          ipa::IpaEstimate est;
          est.n_sims = sim.n_sims;
          est.seed = sim.seed;
          est.value.resize(d, d);
          est.std_error.resize(d, d);
          for (int i = 0; i < d; ++i) {
            for (int j = i; j < d; ++j) {
              const core::SmithParams hi(
                  detail_cli::perturbed_sigma(dep.sigma(), i, j, step));
              const core::SmithParams lo(
                  detail_cli::perturbed_sigma(dep.sigma(), i, j, -step));
              const auto bhi = simulate::simulate_smith(hi, {x1, x2}, sim);
              const auto blo = simulate::simulate_smith(lo, {x1, x2}, sim);
              const double denom = (i == j) ? 2.0 * step : 4.0 * step;
              const auto [e, s] = detail_cli::paired_fd(blo, bhi, perf, denom);
              est.value(i, j) = est.value(j, i) = e;
              est.std_error(i, j) = est.std_error(j, i) = s;
            }
          }
          per_rep[r] = std::move(est);
        }
      });
  for (std::size_t r = 0; r < cfg.n_replicates; ++r) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        rows.push_back(detail_cli::make_row(
            cfg, param_name(i, j), static_cast<std::int64_t>(r),
            per_rep[r].value(i, j), per_rep[r].std_error(i, j),
            truth.d_sigma(i, j)));
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace detail_cli {

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw numeric_error("emit: cannot open '" + path + "' for writing");
  }
  out << text;
  if (!out) {
    throw numeric_error("emit: write to '" + path + "' failed");
  }
}

}  // namespace detail_cli

inline constexpr const char* kCsvHeader =
    "method,model,param,replicate,estimate,std_error,true_value,rel_error";

/// Render rows as CSV (fixed header, shortest round-trip decimals, missing
/// oracle values as empty fields).
inline std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string text(kCsvHeader);
  text += '\n';
  for (const ResultRow& r : rows) {
    text += r.method;
    text += ',';
    text += r.model;
    text += ',';
    text += r.param;
    text += ',';
    text += std::to_string(r.replicate);
    text += ',';
    text += detail_cli::format_double(r.estimate);
    text += ',';
    text += detail_cli::format_double(r.std_error);
    text += ',';
    if (r.true_value) text += detail_cli::format_double(*r.true_value);
    text += ',';
    if (r.rel_error) text += detail_cli::format_double(*r.rel_error);
    text += '\n';
  }
  return text;
}

/// Write rows as CSV to `path` (empty path writes to stdout).
inline void emit_csv(const std::vector<ResultRow>& rows,
                     const std::string& path) {
  detail_cli::write_text(path, to_csv(rows));
}

/// Write rows as a JSON array to `path` (empty path writes to stdout).
inline void emit_json(const std::vector<ResultRow>& rows,
                      const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ResultRow& r : rows) {
    nlohmann::json obj{{"method", r.method},       {"model", r.model},
                       {"param", r.param},         {"replicate", r.replicate},
                       {"estimate", r.estimate},   {"std_error", r.std_error}};
    obj["true_value"] =
        r.true_value ? nlohmann::json(*r.true_value) : nlohmann::json();
    obj["rel_error"] =
        r.rel_error ? nlohmann::json(*r.rel_error) : nlohmann::json();
    arr.push_back(std::move(obj));
  }
  detail_cli::write_text(path, arr.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

namespace detail_cli {

inline const nlohmann::json& require(const nlohmann::json& j,
                                     const std::string& key) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw config_error("config." + key + ": missing required field");
  }
  return *it;
}

template <typename T>
T field_as(const nlohmann::json& j, const std::string& key) {
  try {
    return require(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config." + key + ": " + e.what());
  }
}

template <typename T>
T field_or(const nlohmann::json& j, const std::string& key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config." + key + ": " + e.what());
  }
}

inline core::Margins parse_margins(const nlohmann::json& j) {
  return core::Margins(field_as<double>(j, "eta"), field_as<double>(j, "tau"),
                       field_as<double>(j, "xi"), field_as<int>(j, "beta"));
}

}  // namespace detail_cli

/// Parse an ExperimentConfig from its JSON object form.  Field errors are
/// reported with the offending key; semantic violations via validate().
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using detail_cli::field_as;
  using detail_cli::field_or;
  ExperimentConfig cfg;

  const std::string model = field_as<std::string>(j, "model");
  if (model == "brown_resnick") {
    cfg.model = Model::brown_resnick;
  } else if (model == "smith") {
    cfg.model = Model::smith;
  } else {
    throw config_error("config.model: expected 'brown_resnick' or 'smith'");
  }

  const nlohmann::json& params = detail_cli::require(j, "params");
  if (cfg.model == Model::brown_resnick) {
    cfg.br.emplace(field_as<double>(params, "kappa"),
                   field_as<double>(params, "psi"));
  } else {
    const auto rows = field_as<std::vector<std::vector<double>>>(params, "sigma");
    const int d = static_cast<int>(rows.size());
    Eigen::MatrixXd sigma(d, d);
    for (int i = 0; i < d; ++i) {
      if (static_cast<int>(rows[i].size()) != d) {
        throw config_error("config.params.sigma: must be a square matrix");
      }
      for (int k = 0; k < d; ++k) sigma(i, k) = rows[i][k];
    }
    cfg.smith.emplace(sigma);
  }

  for (const auto& coords :
       field_as<std::vector<std::vector<double>>>(j, "sites")) {
    cfg.sites.emplace_back(coords);
  }

  const nlohmann::json& margins = detail_cli::require(j, "margins");
  if (margins.is_array()) {
    for (const auto& m : margins) cfg.margins.push_back(detail_cli::parse_margins(m));
  } else {
    // A single margin object applies to every site.
    for (std::size_t i = 0; i < cfg.sites.size(); ++i) {
      cfg.margins.push_back(detail_cli::parse_margins(margins));
    }
  }

  const std::string method = field_or<std::string>(j, "method", "oracle");
  if (method == "lrm") {
    cfg.method = Method::lrm;
  } else if (method == "ipa") {
    cfg.method = Method::ipa;
  } else if (method == "oracle") {
    cfg.method = Method::oracle;
  } else if (method == "fd_check") {
    cfg.method = Method::fd_check;
  } else {
    throw config_error(
        "config.method: expected one of lrm, ipa, oracle, fd_check");
  }

  cfg.n_sims = field_or<std::size_t>(j, "n_sims", 10000);
  cfg.n_replicates = field_or<std::size_t>(j, "n_replicates", 1);
  cfg.seed = field_or<std::uint64_t>(j, "seed", 0);
  cfg.threads = field_or<int>(j, "threads", 1);
  cfg.truncation_radius = field_or<double>(j, "truncation_radius", 15.0);
  cfg.fd_step = field_or<double>(j, "fd_step", 1e-3);
  cfg.output = field_or<std::string>(j, "output", "");
  return cfg;
}

/// Load and parse a JSON config file.
inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw config_error("config: cannot open '" + path + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config: '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) {
    throw config_error("config: top level must be a JSON object");
  }
  return parse_experiment_config(j);
}

}  // namespace cli
}  // namespace maxsens

#endif  // MAXSENS_CLI_HPP
