// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.
//
// maxsens -- command-line experiment harness.
//
// Subcommands:
//   simulate    draw max-stable field realizations at the configured sites
//   lrm         likelihood-ratio-method sensitivity estimates (Brown-Resnick)
//   ipa         pathwise (IPA) sensitivity estimates (Smith)
//   oracle      analytical correlation and sensitivities by quadrature
//   experiment  run the method named in the config file
//   validate    parse and validate a config file, then exit
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maxsens/cli.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::string format = "csv";
};

void add_common_options(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("-c,--config", opts.config_path,
                  "JSON experiment configuration file")
      ->required();
  sub->add_option("--seed", opts.seed, "override the config seed");
  sub->add_option("--threads", opts.threads,
                  "override the config worker-thread count");
  sub->add_option("--out", opts.out,
                  "override the config output path ('-' for stdout)");
  sub->add_option("--format", opts.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
}

maxsens::cli::ExperimentConfig load_with_overrides(const CommonOpts& opts) {
  maxsens::cli::ExperimentConfig cfg =
      maxsens::cli::load_experiment_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.threads) cfg.threads = *opts.threads;
  if (opts.out) cfg.output = (*opts.out == "-") ? std::string() : *opts.out;
  return cfg;
}

void emit_rows(const std::vector<maxsens::cli::ResultRow>& rows,
               const maxsens::cli::ExperimentConfig& cfg,
               const std::string& format) {
  if (format == "json") {
    maxsens::cli::emit_json(rows, cfg.output);
  } else {
    maxsens::cli::emit_csv(rows, cfg.output);
  }
}

int run_estimation(const CommonOpts& opts,
                   std::optional<maxsens::cli::Method> method) {
  maxsens::cli::ExperimentConfig cfg = load_with_overrides(opts);
  if (method) cfg.method = *method;
  emit_rows(maxsens::cli::run_experiment(cfg), cfg, opts.format);
  return 0;
}

/// Draw field realizations and write them as sim,site,value rows
/// (site indices are 1-based in the output).
int run_simulate(const CommonOpts& opts) {
  maxsens::cli::ExperimentConfig cfg = load_with_overrides(opts);
  cfg.validate_simulation();
  maxsens::simulate::SimConfig sim;
  sim.n_sims = cfg.n_sims;
  sim.truncation_radius = cfg.truncation_radius;
  sim.seed = cfg.seed;
  sim.threads = cfg.threads;

  const auto write = [&](const auto& batch) {
    std::string text = "sim,site,value\n";
    for (std::size_t i = 0; i < batch.n_sims(); ++i) {
      for (int j = 0; j < batch.n_sites(); ++j) {
        text += std::to_string(i + 1);
        text += ',';
        text += std::to_string(j + 1);
        text += ',';
        text += maxsens::cli::detail_cli::format_double(batch.value(i, j));
        text += '\n';
      }
    }
    maxsens::cli::detail_cli::write_text(cfg.output, text);
  };

  if (cfg.model == maxsens::cli::Model::brown_resnick) {
    write(maxsens::simulate::simulate_brown_resnick(*cfg.br, cfg.sites, sim));
  } else {
    write(maxsens::simulate::simulate_smith(*cfg.smith, cfg.sites, sim));
  }
  return 0;
}

int run_validate(const CommonOpts& opts) {
  const maxsens::cli::ExperimentConfig cfg = load_with_overrides(opts);
  cfg.validate();
  std::cout << "config ok: " << opts.config_path << " (model "
            << maxsens::cli::to_string(cfg.model) << ", method "
            << maxsens::cli::to_string(cfg.method) << ", " << cfg.sites.size()
            << " sites, " << cfg.n_replicates << " replicate(s) of "
            << cfg.n_sims << " sims)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maxsens: sensitivity estimation for max-stable field models"};
  app.require_subcommand(1);

  CommonOpts opts;
  CLI::App* sub_simulate =
      app.add_subcommand("simulate", "draw field realizations");
  CLI::App* sub_lrm =
      app.add_subcommand("lrm", "likelihood-ratio sensitivity estimates");
  CLI::App* sub_ipa = app.add_subcommand("ipa", "pathwise (IPA) estimates");
  CLI::App* sub_oracle =
      app.add_subcommand("oracle", "analytical values by quadrature");
  CLI::App* sub_experiment =
      app.add_subcommand("experiment", "run the method named in the config");
  CLI::App* sub_validate =
      app.add_subcommand("validate", "check a config file and exit");
  for (CLI::App* sub : {sub_simulate, sub_lrm, sub_ipa, sub_oracle,
                        sub_experiment, sub_validate}) {
    add_common_options(sub, opts);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sub_simulate->parsed()) return run_simulate(opts);
    if (sub_lrm->parsed()) {
      return run_estimation(opts, maxsens::cli::Method::lrm);
    }
    if (sub_ipa->parsed()) {
      return run_estimation(opts, maxsens::cli::Method::ipa);
    }
    if (sub_oracle->parsed()) {
      return run_estimation(opts, maxsens::cli::Method::oracle);
    }
    if (sub_experiment->parsed()) return run_estimation(opts, std::nullopt);
    if (sub_validate->parsed()) return run_validate(opts);
  } catch (const maxsens::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const maxsens::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
