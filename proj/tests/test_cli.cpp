// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "maxsens/cli.hpp"

using namespace maxsens;
using nlohmann::json;

namespace {

json br_config_json() {
  return json{{"model", "brown_resnick"},
              {"params", {{"kappa", 3.05}, {"psi", 0.86}}},
              {"sites", json::array({json::array({0.0, 0.0}), json::array({1.0, 1.0})})},
              {"margins", {{"eta", 26.11}, {"tau", 2.90}, {"xi", -0.11}, {"beta", 2}}}};
}

json smith_config_json() {
  return json{
      {"model", "smith"},
      {"params",
       {{"sigma", json::array({json::array({0.88, 0.07}), json::array({0.07, 2.43})})}}},
      {"sites", json::array({json::array({0.0, 0.0}), json::array({1.0, 1.0})})},
      {"margins", {{"eta", 26.12}, {"tau", 2.92}, {"xi", -0.10}, {"beta", 2}}}};
}

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::filesystem::path& scratch_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("maxsens_cli_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::filesystem::path write_config(const json& j, const std::string& name) {
  const auto path = scratch_dir() / name;
  std::ofstream out(path);
  out << j.dump(2);
  return path;
}

CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  const auto out_path = scratch_dir() / ("stdout_" + std::to_string(counter) + ".txt");
  const auto err_path = scratch_dir() / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(MAXSENS_CLI_PATH) + " " + args + " > " +
                          out_path.string() + " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  CmdResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  return res;
}

}  // namespace

TEST_CASE("parse_experiment_config") {
  SECTION("brown_resnick round trip with explicit controls") {
    json j = br_config_json();
    j["method"] = "lrm";
    j["n_sims"] = 5000;
    j["n_replicates"] = 3;
    j["seed"] = 42;
    j["threads"] = 2;
    j["truncation_radius"] = 12.5;
    j["fd_step"] = 1e-4;
    j["output"] = "rows.csv";
    const cli::ExperimentConfig cfg = cli::parse_experiment_config(j);
    REQUIRE(cfg.model == cli::Model::brown_resnick);
    REQUIRE(cfg.br.has_value());
    REQUIRE(cfg.br->kappa == 3.05);
    REQUIRE(cfg.br->psi == 0.86);
    REQUIRE(cfg.sites.size() == 2);
    REQUIRE(cfg.sites[1].coords[0] == 1.0);
    REQUIRE(cfg.margins.size() == 2);  // single object replicated per site
    REQUIRE(cfg.margins[1].beta == 2);
    REQUIRE(cfg.method == cli::Method::lrm);
    REQUIRE(cfg.n_sims == 5000);
    REQUIRE(cfg.n_replicates == 3);
    REQUIRE(cfg.seed == 42);
    REQUIRE(cfg.threads == 2);
    REQUIRE(cfg.truncation_radius == 12.5);
    REQUIRE(cfg.fd_step == 1e-4);
    REQUIRE(cfg.output == "rows.csv");
    REQUIRE_NOTHROW(cfg.validate());
  }
  SECTION("smith with per-site margin array and defaults") {
    json j = smith_config_json();
    j["margins"] = json::array(
        {json{{"eta", 26.12}, {"tau", 2.92}, {"xi", -0.10}, {"beta", 2}},
         json{{"eta", 26.12}, {"tau", 2.92}, {"xi", -0.10}, {"beta", 3}}});
    const cli::ExperimentConfig cfg = cli::parse_experiment_config(j);
    REQUIRE(cfg.model == cli::Model::smith);
    REQUIRE(cfg.smith.has_value());
    REQUIRE(cfg.smith->sigma()(1, 1) == 2.43);
    REQUIRE(cfg.margins.size() == 2);
    REQUIRE(cfg.margins[0].beta == 2);
    REQUIRE(cfg.margins[1].beta == 3);
    REQUIRE(cfg.method == cli::Method::oracle);  // default
    REQUIRE(cfg.n_sims == 10000);
    REQUIRE(cfg.n_replicates == 1);
    REQUIRE(cfg.seed == 0);
    REQUIRE(cfg.threads == 1);
    REQUIRE(cfg.truncation_radius == 15.0);
    REQUIRE_NOTHROW(cfg.validate());
  }
  SECTION("field errors carry the offending key") {
    json j = br_config_json();
    j.erase("model");
    REQUIRE_THROWS_WITH(cli::parse_experiment_config(j),
                        Catch::Matchers::ContainsSubstring("config.model"));
    j = br_config_json();
    j["model"] = "gaussian";
    REQUIRE_THROWS_WITH(cli::parse_experiment_config(j),
                        Catch::Matchers::ContainsSubstring("config.model"));
    j = br_config_json();
    j.erase("params");
    REQUIRE_THROWS_AS(cli::parse_experiment_config(j), config_error);
    j = smith_config_json();
    j["params"]["sigma"] = json::array({json::array({1.0, 0.0})});
    REQUIRE_THROWS_WITH(cli::parse_experiment_config(j),
                        Catch::Matchers::ContainsSubstring("sigma"));
    j = br_config_json();
    j["margins"].erase("tau");
    REQUIRE_THROWS_WITH(cli::parse_experiment_config(j),
                        Catch::Matchers::ContainsSubstring("config.tau"));
    j = br_config_json();
    j["sites"] = "everywhere";
    REQUIRE_THROWS_WITH(cli::parse_experiment_config(j),
                        Catch::Matchers::ContainsSubstring("config.sites"));
    j = br_config_json();
    j["method"] = "bootstrap";
    REQUIRE_THROWS_WITH(cli::parse_experiment_config(j),
                        Catch::Matchers::ContainsSubstring("config.method"));
  }
}

TEST_CASE("experiment config validation") {
  SECTION("method/model compatibility") {
    json j = smith_config_json();
    j["method"] = "lrm";
    REQUIRE_THROWS_AS(cli::parse_experiment_config(j).validate(), config_error);
    j = br_config_json();
    j["method"] = "ipa";
    REQUIRE_THROWS_AS(cli::parse_experiment_config(j).validate(), config_error);
  }
  SECTION("pair estimation wants exactly two sites") {
    json j = br_config_json();
    j["sites"].push_back(json::array({3.0, 2.0}));
    const auto cfg = cli::parse_experiment_config(j);
    REQUIRE_NOTHROW(cfg.validate_simulation());
    REQUIRE_THROWS_AS(cfg.validate(), config_error);
  }
  SECTION("margins must cover the sites") {
    json j = br_config_json();
    j["margins"] = json::array(
        {json{{"eta", 26.11}, {"tau", 2.90}, {"xi", -0.11}, {"beta", 2}}});
    REQUIRE_THROWS_AS(cli::parse_experiment_config(j).validate(), config_error);
  }
  SECTION("control bounds") {
    json j = br_config_json();
    j["n_sims"] = 0;
    REQUIRE_THROWS_AS(cli::parse_experiment_config(j).validate(), config_error);
    j = br_config_json();
    j["threads"] = -1;
    REQUIRE_THROWS_AS(cli::parse_experiment_config(j).validate(), config_error);
    j = br_config_json();
    j["fd_step"] = 0.0;
    REQUIRE_THROWS_AS(cli::parse_experiment_config(j).validate(), config_error);
  }
}

TEST_CASE("run_experiment oracle rows") {
  SECTION("brown_resnick") {
    const auto cfg = cli::parse_experiment_config(br_config_json());
    const auto rows = cli::run_experiment(cfg);
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[0].param == "kappa");
    REQUIRE(rows[1].param == "psi");
    REQUIRE(rows[2].param == "R");
    const auto truth = oracle::analytic_sensitivity(
        *cfg.br, cfg.sites[0], cfg.sites[1], cfg.margins[0], cfg.margins[1]);
    REQUIRE(rows[0].estimate == truth.d_kappa);
    REQUIRE(rows[1].estimate == truth.d_psi);
    for (const auto& r : rows) {
      REQUIRE(r.method == "oracle");
      REQUIRE(r.model == "brown_resnick");
      REQUIRE(r.replicate == 0);
      REQUIRE(r.std_error == 0.0);
      REQUIRE(r.true_value.has_value());
      REQUIRE(*r.true_value == r.estimate);
      REQUIRE(r.rel_error.has_value());
      REQUIRE(*r.rel_error == 0.0);
    }
  }
  SECTION("smith") {
    const auto cfg = cli::parse_experiment_config(smith_config_json());
    const auto rows = cli::run_experiment(cfg);
    REQUIRE(rows.size() == 5);
    REQUIRE(rows[0].param == "sigma_11");
    REQUIRE(rows[1].param == "sigma_12");
    REQUIRE(rows[2].param == "sigma_21");
    REQUIRE(rows[3].param == "sigma_22");
    REQUIRE(rows[4].param == "R");
    REQUIRE(rows[1].estimate == rows[2].estimate);
    REQUIRE(rows[0].model == "smith");
  }
}

TEST_CASE("run_experiment lrm replicates") {
  json j = br_config_json();
  j["method"] = "lrm";
  j["n_sims"] = 5000;
  j["n_replicates"] = 3;
  j["seed"] = 7;
  const auto cfg = cli::parse_experiment_config(j);
  const auto rows = cli::run_experiment(cfg);
  REQUIRE(rows.size() == 6);  // (kappa, psi) per replicate, replicate-major
  for (std::size_t r = 0; r < 3; ++r) {
    const auto& k = rows[2 * r];
    const auto& p = rows[2 * r + 1];
    REQUIRE(k.param == "kappa");
    REQUIRE(p.param == "psi");
    REQUIRE(k.replicate == static_cast<std::int64_t>(r));
    REQUIRE(p.replicate == static_cast<std::int64_t>(r));
    REQUIRE(k.method == "lrm");
    REQUIRE(k.std_error > 0.0);
    REQUIRE(k.true_value.has_value());
    REQUIRE(k.rel_error.has_value());
    REQUIRE(*k.rel_error ==
            Catch::Approx((k.estimate - *k.true_value) / *k.true_value));
    // Scores are exact multiples of one Monte Carlo average.
    const double ratio = -(cfg.br->kappa / cfg.br->psi) *
                         std::log(std::sqrt(2.0) / cfg.br->kappa);
    REQUIRE(p.estimate == Catch::Approx(ratio * k.estimate).epsilon(1e-12));
  }
  // Replicates use distinct derived streams.
  REQUIRE(rows[0].estimate != rows[2].estimate);
  REQUIRE(rows[2].estimate != rows[4].estimate);

  SECTION("deterministic across reruns and worker counts") {
    const std::string base = cli::to_csv(rows);
    REQUIRE(cli::to_csv(cli::run_experiment(cfg)) == base);
    json jt = j;
    jt["threads"] = 4;
    REQUIRE(cli::to_csv(cli::run_experiment(cli::parse_experiment_config(jt))) == base);
  }
}

TEST_CASE("run_experiment ipa and fd_check") {
  SECTION("ipa rows mirror the sigma symmetry") {
    json j = smith_config_json();
    j["method"] = "ipa";
    j["n_sims"] = 4000;
    j["n_replicates"] = 2;
    j["seed"] = 11;
    const auto rows = cli::run_experiment(cli::parse_experiment_config(j));
    REQUIRE(rows.size() == 8);
    for (std::size_t r = 0; r < 2; ++r) {
      const auto& s12 = rows[4 * r + 1];
      const auto& s21 = rows[4 * r + 2];
      REQUIRE(s12.param == "sigma_12");
      REQUIRE(s21.param == "sigma_21");
      REQUIRE(s12.estimate == s21.estimate);
      REQUIRE(s12.std_error == s21.std_error);
      REQUIRE(rows[4 * r].method == "ipa");
    }
  }
  SECTION("fd_check agrees with the oracle truth within its own error") {
    json j = br_config_json();
    j["method"] = "fd_check";
    j["n_sims"] = 50'000;
    j["seed"] = 13;
    const auto rows = cli::run_experiment(cli::parse_experiment_config(j));
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
      REQUIRE(r.method == "fd_check");
      REQUIRE(r.true_value.has_value());
      REQUIRE(std::fabs(r.estimate - *r.true_value) <= 5.0 * r.std_error);
    }
  }
}

TEST_CASE("emission") {
  SECTION("csv shape and shortest round-trip decimals") {
    cli::ResultRow row;
    row.method = "oracle";
    row.model = "brown_resnick";
    row.param = "kappa";
    row.replicate = 0;
    row.estimate = 0.1;
    row.std_error = 0.0;
    const std::string text = cli::to_csv({row});
    REQUIRE(text ==
            std::string(cli::kCsvHeader) + "\noracle,brown_resnick,kappa,0,0.1,0,,\n");
  }
  SECTION("empty row set emits only the header") {
    REQUIRE(cli::to_csv({}) == std::string(cli::kCsvHeader) + "\n");
  }
  SECTION("format_double round-trips") {
    const double third = 1.0 / 3.0;
    REQUIRE(std::stod(cli::detail_cli::format_double(third)) == third);
    REQUIRE(cli::detail_cli::format_double(0.1) == "0.1");
  }
  SECTION("json emission with nulls for missing oracle values") {
    cli::ResultRow row;
    row.method = "lrm";
    row.model = "brown_resnick";
    row.param = "psi";
    row.replicate = 4;
    row.estimate = 0.25;
    row.std_error = 0.5;
    const auto path = scratch_dir() / "rows.json";
    cli::emit_json({row}, path.string());
    const json parsed = json::parse(slurp(path));
    REQUIRE(parsed.is_array());
    REQUIRE(parsed.size() == 1);
    REQUIRE(parsed[0]["param"] == "psi");
    REQUIRE(parsed[0]["replicate"] == 4);
    REQUIRE(parsed[0]["estimate"] == 0.25);
    REQUIRE(parsed[0]["true_value"].is_null());
    REQUIRE(parsed[0]["rel_error"].is_null());
  }
  SECTION("unwritable output path raises a numeric error") {
    REQUIRE_THROWS_AS(cli::emit_csv({}, "/nonexistent_dir_zz/rows.csv"),
                      numeric_error);
  }
}

TEST_CASE("config file loading") {
  const auto path = write_config(br_config_json(), "ok.json");
  const auto cfg = cli::load_experiment_config(path.string());
  REQUIRE(cfg.model == cli::Model::brown_resnick);
  REQUIRE_THROWS_AS(cli::load_experiment_config((scratch_dir() / "absent.json").string()),
                    config_error);
  const auto bad = scratch_dir() / "bad.json";
  std::ofstream(bad) << "{ not json";
  REQUIRE_THROWS_AS(cli::load_experiment_config(bad.string()), config_error);
  const auto arr = scratch_dir() / "arr.json";
  std::ofstream(arr) << "[1, 2]";
  REQUIRE_THROWS_AS(cli::load_experiment_config(arr.string()), config_error);
}

TEST_CASE("command line binary") {
  const auto br_path = write_config(br_config_json(), "cli_br.json");

  SECTION("oracle run to a file exits 0") {
    const auto out = scratch_dir() / "oracle_rows.csv";
    const auto res = run_cli("oracle -c " + br_path.string() + " --out " + out.string());
    CAPTURE(res.err);
    REQUIRE(res.exit_code == 0);
    const std::string content = slurp(out);
    REQUIRE(content.rfind(cli::kCsvHeader, 0) == 0);
    REQUIRE(content.find("oracle,brown_resnick,kappa,0,") != std::string::npos);
    REQUIRE(content.find("oracle,brown_resnick,R,0,") != std::string::npos);
  }
  SECTION("default output stream is stdout") {
    const auto res = run_cli("oracle -c " + br_path.string());
    REQUIRE(res.exit_code == 0);
    REQUIRE(res.out.rfind(cli::kCsvHeader, 0) == 0);
  }
  SECTION("json format") {
    const auto res = run_cli("oracle -c " + br_path.string() + " --format json");
    REQUIRE(res.exit_code == 0);
    const json parsed = json::parse(res.out);
    REQUIRE(parsed.is_array());
    REQUIRE(parsed.size() == 3);
  }
  SECTION("validate subcommand") {
    const auto res = run_cli("validate -c " + br_path.string());
    REQUIRE(res.exit_code == 0);
    REQUIRE(res.out.find("config ok") != std::string::npos);
  }
  SECTION("experiment honours the config's method") {
    json j = br_config_json();
    j["method"] = "lrm";
    j["n_sims"] = 2000;
    j["seed"] = 3;
    const auto path = write_config(j, "cli_lrm.json");
    const auto res = run_cli("experiment -c " + path.string());
    REQUIRE(res.exit_code == 0);
    REQUIRE(res.out.find("lrm,brown_resnick,kappa,0,") != std::string::npos);
  }
  SECTION("seed override changes estimates deterministically") {
    json j = br_config_json();
    j["method"] = "lrm";
    j["n_sims"] = 2000;
    const auto path = write_config(j, "cli_seed.json");
    const auto a1 = run_cli("lrm -c " + path.string() + " --seed 5");
    const auto a2 = run_cli("lrm -c " + path.string() + " --seed 5");
    const auto b = run_cli("lrm -c " + path.string() + " --seed 6");
    REQUIRE(a1.exit_code == 0);
    REQUIRE(a1.out == a2.out);
    REQUIRE(a1.out != b.out);
  }
  SECTION("simulate subcommand emits raw draws") {
    json j = br_config_json();
    j["n_sims"] = 10;
    const auto path = write_config(j, "cli_sim.json");
    const auto res = run_cli("simulate -c " + path.string());
    REQUIRE(res.exit_code == 0);
    REQUIRE(res.out.rfind("sim,site,value", 0) == 0);
    // header + 10 sims * 2 sites
    std::size_t lines = 0;
    for (char c : res.out) lines += (c == '\n') ? 1 : 0;
    REQUIRE(lines == 21);
  }
  SECTION("config errors exit 2") {
    const auto bad = scratch_dir() / "broken.json";
    std::ofstream(bad) << "{ nope";
    const auto res = run_cli("oracle -c " + bad.string());
    REQUIRE(res.exit_code == 2);
    REQUIRE(res.err.find("config error") != std::string::npos);

    json j = smith_config_json();
    j["method"] = "lrm";
    const auto incompatible = write_config(j, "cli_incompatible.json");
    REQUIRE(run_cli("experiment -c " + incompatible.string()).exit_code == 2);
  }
  SECTION("usage errors exit 2") {
    REQUIRE(run_cli("oracle -c " + br_path.string() + " --frobnicate").exit_code == 2);
    REQUIRE(run_cli("").exit_code == 2);  // a subcommand is required
  }
  SECTION("numeric failures exit 3") {
    const auto res = run_cli("oracle -c " + br_path.string() +
                             " --out /nonexistent_dir_zz/rows.csv");
    REQUIRE(res.exit_code == 3);
    REQUIRE(res.err.find("numeric error") != std::string::npos);
  }
  SECTION("help exits 0") {
    REQUIRE(run_cli("--help").exit_code == 0);
  }
}
