// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <gsl/gsl_integration.h>

#include "maxsens/gauss.hpp"
#include "test_util.hpp"

using namespace maxsens;

namespace {

/// Brute-force bivariate normal CDF by 2-D tensor Gauss-Legendre quadrature
/// of the density over [-9, b1] x [-9, b2] (independent of the library's
/// separation-of-variables path).
double bvn_cdf_tensor(double b1, double b2, double rho) {
  const std::size_t n = 240;
  gsl_integration_glfixed_table* table = gsl_integration_glfixed_table_alloc(n);
  const double lo = -9.0;
  const double det = 1.0 - rho * rho;
  const double norm = 1.0 / (2.0 * M_PI * std::sqrt(det));
  double outer = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double x, wx;
    gsl_integration_glfixed_point(lo, b1, i, &x, &wx, table);
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double y, wy;
      gsl_integration_glfixed_point(lo, b2, j, &y, &wy, table);
      inner += wy * std::exp(-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * det));
    }
    outer += wx * norm * inner;
  }
  gsl_integration_glfixed_table_free(table);
  return outer;
}

gauss::CovMatrix correlation2(double rho) {
  Eigen::MatrixXd c(2, 2);
  c << 1.0, rho, rho, 1.0;
  return gauss::CovMatrix(c);
}

}  // namespace

TEST_CASE("std_normal_pdf") {
  REQUIRE(gauss::std_normal_pdf(0.0) == Catch::Approx(0.3989422804014327).epsilon(1e-15));
  REQUIRE(std::fabs(gauss::std_normal_pdf(1.0) - 0.24197072451914335) < 1e-15);
  gauss::RngStream rng(11, 0);
  for (int i = 0; i < 1000; ++i) {
    const double x = 8.0 * (rng.uniform() - 0.5);
    REQUIRE(gauss::std_normal_pdf(x) == gauss::std_normal_pdf(-x));
  }
}

TEST_CASE("std_normal_cdf") {
  REQUIRE(gauss::std_normal_cdf(0.0) == 0.5);
  REQUIRE(std::fabs(gauss::std_normal_cdf(1.959963985) - 0.975) < 1e-9);
  gauss::RngStream rng(12, 0);
  for (int i = 0; i < 10'000; ++i) {
    const double x = 12.0 * (rng.uniform() - 0.5);
    const double s = gauss::std_normal_cdf(x) + gauss::std_normal_cdf(-x);
    REQUIRE(std::fabs(s - 1.0) < 1e-15);
  }
}

TEST_CASE("mvn_cdf") {
  SECTION("p = 1 reduces to the univariate CDF") {
    Eigen::MatrixXd one(1, 1);
    one << 1.0;
    const gauss::CovMatrix cov(one);
    for (double b : {-2.5, -0.3, 0.0, 1.7}) {
      Eigen::VectorXd upper(1);
      upper << b;
      REQUIRE(gauss::mvn_cdf(upper, cov) == Catch::Approx(gauss::std_normal_cdf(b)).epsilon(1e-12));
    }
    // Nonunit variance standardizes internally.
    Eigen::MatrixXd four(1, 1);
    four << 4.0;
    Eigen::VectorXd upper(1);
    upper << 3.0;
    REQUIRE(gauss::mvn_cdf(upper, gauss::CovMatrix(four)) ==
            Catch::Approx(gauss::std_normal_cdf(1.5)).epsilon(1e-12));
  }
  SECTION("independence product at the origin") {
    Eigen::VectorXd upper = Eigen::VectorXd::Zero(2);
    REQUIRE(std::fabs(gauss::mvn_cdf(upper, correlation2(0.0)) - 0.25) < 1e-10);
  }
  SECTION("Sheppard closed form at rho = 1/2") {
    Eigen::VectorXd upper = Eigen::VectorXd::Zero(2);
    REQUIRE(std::fabs(gauss::mvn_cdf(upper, correlation2(0.5)) - 1.0 / 3.0) < 1e-9);
  }
  SECTION("p = 2 matches tensor-quadrature brute force on 100 random cases") {
    gauss::RngStream rng(13, 0);
    for (int i = 0; i < 100; ++i) {
      const double rho = 1.9 * (rng.uniform() - 0.5);
      const double b1 = 4.0 * (rng.uniform() - 0.5);
      const double b2 = 4.0 * (rng.uniform() - 0.5);
      Eigen::VectorXd upper(2);
      upper << b1, b2;
      const double got = gauss::mvn_cdf(upper, correlation2(rho));
      const double want = bvn_cdf_tensor(b1, b2, rho);
      INFO("rho = " << rho << ", upper = (" << b1 << ", " << b2 << ")");
      REQUIRE(std::fabs(got - want) < 1e-6);
    }
  }
  SECTION("monotone nondecreasing in each upper coordinate") {
    gauss::RngStream rng(14, 0);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::MatrixXd a(3, 3);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a(r, c) = 2.0 * (rng.uniform() - 0.5);
      const Eigen::MatrixXd cov =
          a * a.transpose() + 0.3 * Eigen::MatrixXd::Identity(3, 3);
      Eigen::VectorXd upper(3);
      for (int r = 0; r < 3; ++r) upper[r] = 3.0 * (rng.uniform() - 0.5);
      const gauss::CovMatrix cm(cov);
      const double base = gauss::mvn_cdf(upper, cm);
      for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd bumped = upper;
        bumped[k] += 0.5;
        REQUIRE(gauss::mvn_cdf(bumped, cm) >= base - 1e-9);
      }
    }
  }
  SECTION("dimension cap and non-PD rejection") {
    Eigen::MatrixXd big = Eigen::MatrixXd::Identity(7, 7);
    Eigen::VectorXd upper = Eigen::VectorXd::Zero(7);
    REQUIRE_THROWS_AS(gauss::mvn_cdf(upper, gauss::CovMatrix(big)), config_error);
    Eigen::MatrixXd indef(2, 2);
    indef << 1.0, 2.0, 2.0, 1.0;
    REQUIRE_THROWS_AS(gauss::CovMatrix(indef), config_error);
  }
}

TEST_CASE("CovMatrix Cholesky round-trip") {
  gauss::RngStream rng(15, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 1 + static_cast<int>(rng.uniform() * 6.0);
    Eigen::MatrixXd a(p, p);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c) a(r, c) = 2.0 * (rng.uniform() - 0.5);
    Eigen::MatrixXd cov = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(p, p);
    cov = 0.5 * (cov + cov.transpose());
    const gauss::CovMatrix cm(cov);
    const Eigen::MatrixXd l = cm.chol();
    const double err = (l * l.transpose() - cm.entries()).cwiseAbs().maxCoeff();
    REQUIRE(err <= 1e-12 * cm.entries().cwiseAbs().maxCoeff());
  }
}

TEST_CASE("sample_gaussian_vector") {
  SECTION("identity covariance: componentwise standard normal (KS)") {
    const gauss::CovMatrix cov(Eigen::MatrixXd::Identity(3, 3));
    gauss::RngStream rng(16, 0);
    const std::size_t n = 100'000;
    std::vector<std::vector<double>> comp(3, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd z = gauss::sample_gaussian_vector(cov, rng);
      for (int k = 0; k < 3; ++k) comp[static_cast<std::size_t>(k)][i] = z[k];
    }
    for (int k = 0; k < 3; ++k) {
      const double p = testutil::ks_test(comp[static_cast<std::size_t>(k)],
                                         [](double x) { return gauss::std_normal_cdf(x); });
      INFO("component " << k);
      REQUIRE(p > 1e-3);
    }
  }
  SECTION("scalar scaling: cov [[4]] gives variance 4") {
    Eigen::MatrixXd four(1, 1);
    four << 4.0;
    const gauss::CovMatrix cov(four);
    gauss::RngStream rng(17, 0);
    const std::size_t n = 200'000;
    std::vector<double> draws(n);
    for (std::size_t i = 0; i < n; ++i)
      draws[i] = gauss::sample_gaussian_vector(cov, rng)[0];
    const double var = testutil::sample_variance(draws);
    const double se = 4.0 * std::sqrt(2.0 / static_cast<double>(n));
    REQUIRE(std::fabs(var - 4.0) <= 5.0 * se);
  }
  SECTION("empirical covariance within 5 standard errors entrywise") {
    Eigen::MatrixXd cov(2, 2);
    cov << 2.0, 0.6, 0.6, 1.1;
    const gauss::CovMatrix cm(cov);
    gauss::RngStream rng(18, 0);
    const std::size_t n = 1'000'000;
    std::vector<double> p11(n), p12(n), p22(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd z = gauss::sample_gaussian_vector(cm, rng);
      p11[i] = z[0] * z[0];
      p12[i] = z[0] * z[1];
      p22[i] = z[1] * z[1];
    }
    REQUIRE(std::fabs(testutil::mean(p11) - 2.0) <= 5.0 * testutil::std_error(p11));
    REQUIRE(std::fabs(testutil::mean(p12) - 0.6) <= 5.0 * testutil::std_error(p12));
    REQUIRE(std::fabs(testutil::mean(p22) - 1.1) <= 5.0 * testutil::std_error(p22));
  }
  SECTION("fixed (seed, stream) reproduces the sequence") {
    const gauss::CovMatrix cov(Eigen::MatrixXd::Identity(2, 2));
    gauss::RngStream r1(19, 5);
    gauss::RngStream r2(19, 5);
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd a = gauss::sample_gaussian_vector(cov, r1);
      const Eigen::VectorXd b = gauss::sample_gaussian_vector(cov, r2);
      REQUIRE(a == b);
    }
    // Distinct stream ids decorrelate.
    gauss::RngStream r3(19, 6);
    REQUIRE(gauss::sample_gaussian_vector(cov, r3) !=
            gauss::sample_gaussian_vector(cov, r1));
  }
}

TEST_CASE("poisson_frechet_arrivals") {
  SECTION("max of the stream is standard Frechet (KS over 1e5 replications)") {
    const std::size_t n = 100'000;
    std::vector<double> maxima(n);
    for (std::size_t i = 0; i < n; ++i) {
      gauss::RngStream rng(20, i);
      gauss::FrechetArrivals arrivals(rng, 1.0);
      maxima[i] = arrivals.next();  // arrivals decrease; the first is the max
    }
    REQUIRE(testutil::ks_test(maxima, testutil::frechet_cdf) > 1e-3);
  }
  SECTION("arrivals strictly decreasing") {
    gauss::RngStream rng(21, 0);
    gauss::FrechetArrivals arrivals(rng, 3.0);
    double prev = arrivals.next();
    for (int i = 0; i < 1000; ++i) {
      const double cur = arrivals.next();
      REQUIRE(cur < prev);
      prev = cur;
    }
  }
  SECTION("mass = 2 doubles every arrival for the same exponential draws") {
    gauss::RngStream r1(22, 3);
    gauss::RngStream r2(22, 3);
    gauss::FrechetArrivals a1(r1, 1.0);
    gauss::FrechetArrivals a2(r2, 2.0);
    for (int i = 0; i < 100; ++i) {
      REQUIRE(a2.next() == 2.0 * a1.next());
    }
  }
  SECTION("rejects nonpositive mass") {
    gauss::RngStream rng(23, 0);
    REQUIRE_THROWS_AS(gauss::FrechetArrivals(rng, 0.0), config_error);
  }
}

TEST_CASE("derive_seed is deterministic and spreads") {
  REQUIRE(gauss::derive_seed(1, 2) == gauss::derive_seed(1, 2));
  REQUIRE(gauss::derive_seed(1, 2) != gauss::derive_seed(1, 3));
  REQUIRE(gauss::derive_seed(1, 2) != gauss::derive_seed(2, 2));
}
