// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#include <catch2/catch_amalgamated.hpp>

#include <cfloat>
#include <cmath>
#include <vector>

#include <gsl/gsl_integration.h>

#include "maxsens/core.hpp"
#include "maxsens/gauss.hpp"
#include "maxsens/lrm.hpp"
#include "maxsens/simulate.hpp"
#include "test_util.hpp"

using namespace maxsens;

namespace {

const core::BrParams kBr(3.05, 0.86);
const core::Margins kM2(26.11, 2.90, -0.11, 2);
const core::Margins kM3(26.11, 2.90, -0.11, 3);

/// Integral of the bivariate density over (0, inf)^2 via the log substitution
/// y = exp(s), ds-integrand f(e^{s1}, e^{s2}) e^{s1 + s2}, tensor
/// Gauss-Legendre on [-3.6, 13.5]^2 (the omitted tails carry < 3e-6 mass).
double density_mass(double h) {
  const std::size_t n = 240;
  gsl_integration_glfixed_table* table = gsl_integration_glfixed_table_alloc(n);
  const double lo = -3.6, hi = 13.5;
  std::vector<double> node(n), weight(n);
  for (std::size_t i = 0; i < n; ++i)
    gsl_integration_glfixed_point(lo, hi, i, &node[i], &weight[i], table);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y1 = std::exp(node[i]);
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double y2 = std::exp(node[j]);
      inner += weight[j] * lrm::bivariate_density(y1, y2, h) * y1 * y2;
    }
    total += weight[i] * inner;
  }
  gsl_integration_glfixed_table_free(table);
  return total;
}

double frechet_density(double y) { return std::exp(-1.0 / y) / (y * y); }

simulate::SimConfig sim_cfg(std::size_t n, std::uint64_t seed) {
  simulate::SimConfig cfg;
  cfg.n_sims = n;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("bivariate density integrates to one") {
  for (double h : {0.5, 1.0, 2.0}) {
    INFO("h = " << h);
    REQUIRE(std::fabs(density_mass(h) - 1.0) < 1e-4);
  }
}

TEST_CASE("bivariate density symmetry and limits") {
  SECTION("exchangeability") {
    gauss::RngStream rng(51, 0);
    for (int i = 0; i < 100; ++i) {
      const double y1 = std::exp(7.6 * (rng.uniform() - 0.5));
      const double y2 = std::exp(7.6 * (rng.uniform() - 0.5));
      const double h = std::exp(1.1 * (2.0 * rng.uniform() - 1.0));
      const double f12 = lrm::bivariate_density(y1, y2, h);
      const double f21 = lrm::bivariate_density(y2, y1, h);
      REQUIRE(std::fabs(f12 - f21) <= 1e-13 * f12);
    }
  }
  SECTION("independence limit h -> infinity") {
    REQUIRE(std::fabs(lrm::bivariate_density(1.0, 1.0, 50.0) - std::exp(-2.0)) < 1e-12);
    const double f = lrm::bivariate_density(2.0, 3.0, 50.0);
    const double prod = frechet_density(2.0) * frechet_density(3.0);
    REQUIRE(f == Catch::Approx(prod).epsilon(1e-10));
  }
  SECTION("rejects invalid arguments") {
    REQUIRE_THROWS_AS(lrm::bivariate_density(0.0, 1.0, 1.0), config_error);
    REQUIRE_THROWS_AS(lrm::bivariate_density(1.0, -2.0, 1.0), config_error);
    REQUIRE_THROWS_AS(lrm::bivariate_density(1.0, 1.0, 0.0), config_error);
  }
}

TEST_CASE("underflow clamp is counted, not silent") {
  lrm::reset_density_underflow_count();
  const double f = lrm::bivariate_density(1e-9, 1e9, 1.0);
  REQUIRE(f == DBL_MIN);
  REQUIRE(lrm::density_underflow_count() >= 1);
  lrm::reset_density_underflow_count();
  REQUIRE(lrm::density_underflow_count() == 0);
}

TEST_CASE("closed-form dlog f / dh matches finite differences") {
  gauss::RngStream rng(52, 0);
  for (int i = 0; i < 1000; ++i) {
    const double y1 = std::exp(std::log(0.05) + std::log(100.0 / 0.05) * rng.uniform());
    const double y2 = std::exp(std::log(0.05) + std::log(100.0 / 0.05) * rng.uniform());
    const double h = std::exp(std::log(0.3) + std::log(3.0 / 0.3) * rng.uniform());
    const double g = lrm::dlog_density_dh(y1, y2, h);
    const double step = 1e-6 * h;
    const double fd = (lrm::log_bivariate_density(y1, y2, h + step) -
                       lrm::log_bivariate_density(y1, y2, h - step)) /
                      (2.0 * step);
    INFO("y1 = " << y1 << ", y2 = " << y2 << ", h = " << h);
    REQUIRE(std::fabs(g - fd) <= 1e-6 * std::max({1.0, std::fabs(g), std::fabs(fd)}));
  }
}

TEST_CASE("score components are exact multiples of dlog f / dh") {
  const core::Site a(0.0, 0.0);
  SECTION("fixed ratio -(kappa/psi) log(d/kappa)") {
    const core::Site b(3.0, 2.0);
    const double d = core::distance(a, b);
    const double ratio = -(kBr.kappa / kBr.psi) * std::log(d / kBr.kappa);
    gauss::RngStream rng(53, 0);
    for (int i = 0; i < 200; ++i) {
      const double y1 = std::exp(4.0 * (rng.uniform() - 0.5));
      const double y2 = std::exp(4.0 * (rng.uniform() - 0.5));
      const lrm::BivariateScore s = lrm::score(y1, y2, kBr, a, b);
      REQUIRE(s.d_psi == Catch::Approx(ratio * s.d_kappa).epsilon(1e-13));
    }
  }
  SECTION("d = kappa zeroes the psi score identically") {
    const core::BrParams params(2.0, 0.86);
    const core::Site b(2.0, 0.0);
    const lrm::BivariateScore s = lrm::score(1.7, 0.4, params, a, b);
    REQUIRE(s.d_psi == 0.0);
    REQUIRE(s.d_kappa != 0.0);
  }
  SECTION("coincident sites rejected") {
    REQUIRE_THROWS_AS(lrm::score(1.0, 1.0, kBr, a, a), config_error);
  }
}

TEST_CASE("score has zero mean under the model") {
  const core::Site a(0.0, 0.0), b(3.0, 2.0);
  const double h = std::sqrt(2.0 * core::semivariogram(kBr, a, b));
  const auto batch = simulate::simulate_brown_resnick(kBr, {a, b}, sim_cfg(1'000'000, 54));
  std::vector<double> scores(batch.n_sims());
  for (std::size_t i = 0; i < batch.n_sims(); ++i)
    scores[i] = lrm::dlog_density_dh(batch.value(i, 0), batch.value(i, 1), h);
  REQUIRE(std::fabs(testutil::mean(scores)) <= 4.0 * testutil::std_error(scores));
}

TEST_CASE("lrm_estimate reproduces quadrature reference sensitivities") {
  const core::Site a(0.0, 0.0), b(1.0, 1.0);
  SECTION("beta = 2") {
    const auto est = lrm::lrm_estimate(kBr, a, b, kM2, kM2, sim_cfg(400'000, 101));
    // Reference values from the deterministic quadrature oracle.
    REQUIRE(std::fabs(est.d_kappa.value - 0.047934) <= 4.0 * est.d_kappa.std_error);
    REQUIRE(std::fabs(est.d_psi.value - 0.130654) <= 4.0 * est.d_psi.std_error);
    REQUIRE(est.d_kappa.std_error > 0.0);
    REQUIRE(est.d_psi.std_error > 0.0);
    REQUIRE(est.d_kappa.n_sims == 400'000);
    REQUIRE(est.d_kappa.seed == 101);
    // The two estimates share one Monte Carlo average, so their ratio is the
    // deterministic scale factor.
    const double ratio = -(kBr.kappa / kBr.psi) * std::log(std::sqrt(2.0) / kBr.kappa);
    REQUIRE(est.d_psi.value == Catch::Approx(ratio * est.d_kappa.value).epsilon(1e-12));
  }
  SECTION("beta = 3") {
    const auto est = lrm::lrm_estimate(kBr, a, b, kM3, kM3, sim_cfg(400'000, 102));
    REQUIRE(std::fabs(est.d_kappa.value - 0.046307) <= 4.0 * est.d_kappa.std_error);
    REQUIRE(std::fabs(est.d_psi.value - 0.126220) <= 4.0 * est.d_psi.std_error);
  }
}

TEST_CASE("lrm_estimate agrees with a common-random-number finite difference") {
  const core::Site a(0.0, 0.0), b(1.0, 1.0);
  const std::size_t n = 200'000;
  const auto est = lrm::lrm_estimate(kBr, a, b, kM2, kM2, sim_cfg(n, 103));
  const core::HPerformance perf(kM2, kM2);

  const auto paired_fd = [&](const core::BrParams& lo, const core::BrParams& hi,
                             double denom) {
    const auto bl = simulate::simulate_brown_resnick(lo, {a, b}, sim_cfg(n, 104));
    const auto bh = simulate::simulate_brown_resnick(hi, {a, b}, sim_cfg(n, 104));
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) {
      diff[i] = (perf.value(bh.value(i, 0), bh.value(i, 1)) -
                 perf.value(bl.value(i, 0), bl.value(i, 1))) /
                denom;
    }
    return std::pair<double, double>(testutil::mean(diff), testutil::std_error(diff));
  };

  SECTION("kappa") {
    const double d = 1e-3 * kBr.kappa;
    const auto [fd, fd_se] = paired_fd(core::BrParams(kBr.kappa - d, kBr.psi),
                                       core::BrParams(kBr.kappa + d, kBr.psi), 2.0 * d);
    const double tol = 4.0 * std::sqrt(fd_se * fd_se +
                                       est.d_kappa.std_error * est.d_kappa.std_error);
    REQUIRE(std::fabs(est.d_kappa.value - fd) <= tol);
  }
  SECTION("psi") {
    const double d = 1e-3 * kBr.psi;
    const auto [fd, fd_se] = paired_fd(core::BrParams(kBr.kappa, kBr.psi - d),
                                       core::BrParams(kBr.kappa, kBr.psi + d), 2.0 * d);
    const double tol =
        4.0 * std::sqrt(fd_se * fd_se + est.d_psi.std_error * est.d_psi.std_error);
    REQUIRE(std::fabs(est.d_psi.value - fd) <= tol);
  }
}

TEST_CASE("lrm_estimate validation") {
  const core::Site a(0.0, 0.0), b(1.0, 1.0);
  auto cfg = sim_cfg(0, 1);
  REQUIRE_THROWS_AS(lrm::lrm_estimate(kBr, a, b, kM2, kM2, cfg), config_error);
  REQUIRE_THROWS_AS(lrm::lrm_estimate(kBr, a, a, kM2, kM2, sim_cfg(10, 1)), config_error);
}
