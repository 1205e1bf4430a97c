// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.
//
// Domain types and parameter validation, the Frechet-to-GEV marginal
// transform, analytic moments of powered GEV margins, and the standardized
// random performance H with its gradient.

#ifndef MAXSENS_CORE_HPP
#define MAXSENS_CORE_HPP

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "maxsens/detail/special.hpp"
#include "maxsens/errors.hpp"

namespace maxsens {
namespace core {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// A site in the plane (or in R^d generally).
struct Site {
  std::vector<double> coords;

  explicit Site(std::vector<double> c) : coords(std::move(c)) {
    if (coords.empty()) throw config_error("Site: dimension must be at least 1");
    for (double v : coords)
      if (!std::isfinite(v)) throw config_error("Site: coordinates must be finite");
  }
  Site(double x, double y) : Site(std::vector<double>{x, y}) {}

  int dim() const { return static_cast<int>(coords.size()); }
};

inline double distance(const Site& a, const Site& b) {
  if (a.dim() != b.dim()) throw config_error("Site: dimension mismatch between sites");
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double d = a.coords[i] - b.coords[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Brown-Resnick dependence parameters: range kappa > 0 and smoothness
/// psi in the open interval (0, 2).  psi = 2 is rejected: at that boundary
/// the increments degenerate and the multivariate density is unavailable.
struct BrParams {
  double kappa;
  double psi;

  BrParams(double kappa_, double psi_) : kappa(kappa_), psi(psi_) {
    if (!(kappa > 0.0) || !std::isfinite(kappa))
      throw config_error("BrParams: range kappa must be positive and finite");
    if (!(psi > 0.0) || !(psi < 2.0))
      throw config_error("BrParams: smoothness psi must lie in the open interval (0,2)");
  }
};

/// Smith dependence parameter: a symmetric positive-definite d x d
/// covariance matrix (checked via Cholesky success).  The inverse and
/// determinant are precomputed; instances are immutable.
class SmithParams {
 public:
  explicit SmithParams(Eigen::MatrixXd sigma) : sigma_(std::move(sigma)) {
    if (sigma_.rows() != sigma_.cols() || sigma_.rows() < 1)
      throw config_error("SmithParams: sigma must be a square matrix");
    if (!sigma_.allFinite()) throw config_error("SmithParams: sigma must be finite");
    const double scale = std::max(1.0, sigma_.cwiseAbs().maxCoeff());
    if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw config_error("SmithParams: sigma must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
    if (llt.info() != Eigen::Success)
      throw config_error("SmithParams: sigma must be positive definite");
    det_ = 1.0;
    const Eigen::MatrixXd L = llt.matrixL();
    for (int i = 0; i < sigma_.rows(); ++i) det_ *= L(i, i) * L(i, i);
    inverse_ = llt.solve(Eigen::MatrixXd::Identity(sigma_.rows(), sigma_.cols()));
    // Exact bitwise symmetry (a + b and b + a round identically), so that
    // everything derived from the inverse treats sigma_12 and sigma_21 alike.
    inverse_ = (0.5 * (inverse_ + inverse_.transpose())).eval();
  }

  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& inverse() const { return inverse_; }
  double det() const { return det_; }
  int dim() const { return static_cast<int>(sigma_.rows()); }

 private:
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd inverse_;
  double det_;
};

/// Per-site GEV triple (location eta, scale tau > 0, shape xi != 0) plus the
/// integer damage exponent beta >= 1.  beta * xi < 1/2 guarantees that the
/// powered margin has a finite variance, hence that the studied correlation
/// exists.  The xi = 0 (Gumbel) branch is deliberately not supported.
struct Margins {
  double eta;
  double tau;
  double xi;
  int beta;

  Margins(double eta_, double tau_, double xi_, int beta_)
      : eta(eta_), tau(tau_), xi(xi_), beta(beta_) {
    if (!std::isfinite(eta)) throw config_error("Margins: location eta must be finite");
    if (!(tau > 0.0) || !std::isfinite(tau))
      throw config_error("Margins: scale tau must be positive");
    if (!(xi != 0.0) || !std::isfinite(xi))
      throw config_error("Margins: shape xi must be nonzero (Gumbel branch unsupported)");
    if (beta < 1) throw config_error("Margins: damage exponent beta must be a positive integer");
    if (!(beta * xi < 0.5))
      throw config_error("Margins: beta * xi must be below 1/2 (variance existence)");
  }
};

/// A Monte Carlo point estimate with its standard error
/// (sample std of the per-draw summands divided by sqrt(n_sims)).
struct SensitivityEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_sims = 0;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Dependence summaries
// ---------------------------------------------------------------------------

/// Brown-Resnick semivariogram gamma(a, b) = (|a - b| / kappa)^psi.
inline double semivariogram(const BrParams& p, const Site& a, const Site& b) {
  const double d = distance(a, b);
  if (d == 0.0) return 0.0;
  return std::pow(d / p.kappa, p.psi);
}

/// Smith-field semivariogram gamma(a, b) = (a-b)' Sigma^{-1} (a-b) / 2.
inline double smith_variogram(const SmithParams& p, const Site& a, const Site& b) {
  if (a.dim() != b.dim() || a.dim() != p.dim())
    throw config_error("smith_variogram: dimension mismatch");
  Eigen::VectorXd d(a.dim());
  for (int i = 0; i < a.dim(); ++i) d[i] = a.coords[i] - b.coords[i];
  return 0.5 * d.dot(p.inverse() * d);
}

// ---------------------------------------------------------------------------
// Marginal transform and powered-GEV moments
// ---------------------------------------------------------------------------

/// Map a standard Frechet value y > 0 to the GEV(eta, tau, xi) scale:
/// x(y) = (eta - tau/xi) + (tau/xi) y^xi.
inline double frechet_to_gev(double y, const Margins& m) {
  if (!(y > 0.0)) throw config_error("frechet_to_gev: y must be positive");
  return (m.eta - m.tau / m.xi) + (m.tau / m.xi) * std::exp(m.xi * std::log(y));
}

/// E[X^beta] for X = frechet_to_gev(Y) with standard Frechet Y: the binomial
/// expansion in (eta - tau/xi) and (tau/xi) Y^xi, using E[Y^s] = Gamma(1 - s)
/// for s < 1.
inline double moment_c(const Margins& m) {
  if (!(m.beta * m.xi < 1.0))
    throw config_error("moment_c: beta * xi must be below 1 (mean existence)");
  const double a = m.eta - m.tau / m.xi;
  const double b = m.tau / m.xi;
  double sum = 0.0;
  for (int k = 0; k <= m.beta; ++k) {
    sum += detail::binomial(m.beta, k) * detail::int_pow(a, k) *
           detail::int_pow(b, m.beta - k) *
           detail::lanczos_gamma(1.0 - (m.beta - k) * m.xi);
  }
  return sum;
}

/// Var[X^beta]: the double binomial sum
///   sum_{k1,k2} B_{k1,k2} { Gamma(1 - xi (2 beta - k1 - k2))
///                           - Gamma(1 - (beta-k1) xi) Gamma(1 - (beta-k2) xi) },
/// B_{k1,k2} = C(beta,k1) C(beta,k2) (eta - tau/xi)^{k1+k2} (tau/xi)^{2beta-k1-k2}.
inline double moment_d(const Margins& m) {
  if (!(2.0 * m.beta * m.xi < 1.0))
    throw config_error("moment_d: 2 * beta * xi must be below 1 (variance existence)");
  const double a = m.eta - m.tau / m.xi;
  const double b = m.tau / m.xi;
  double sum = 0.0;
  for (int k1 = 0; k1 <= m.beta; ++k1) {
    for (int k2 = 0; k2 <= m.beta; ++k2) {
      const double coef = detail::binomial(m.beta, k1) * detail::binomial(m.beta, k2) *
                          detail::int_pow(a, k1 + k2) *
                          detail::int_pow(b, 2 * m.beta - k1 - k2);
      const double g12 = detail::lanczos_gamma(1.0 - m.xi * (2 * m.beta - k1 - k2));
      const double g1 = detail::lanczos_gamma(1.0 - (m.beta - k1) * m.xi);
      const double g2 = detail::lanczos_gamma(1.0 - (m.beta - k2) * m.xi);
      sum += coef * (g12 - g1 * g2);
    }
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Random performance H
// ---------------------------------------------------------------------------

/// Standardized product performance
///   H(y1, y2) = (x1^{beta1}(y1) x2^{beta2}(y2) - C1 C2) / sqrt(D1 D2),
/// whose expectation under the bivariate field law is the correlation of the
/// powered costs.  The moments are precomputed at construction so the
/// per-draw cost in estimator hot loops is two pow calls.
class HPerformance {
 public:
  HPerformance(const Margins& m1, const Margins& m2)
      : m1_(m1), m2_(m2), c1c2_(moment_c(m1) * moment_c(m2)),
        inv_sqrt_d1d2_(1.0 / std::sqrt(moment_d(m1) * moment_d(m2))) {}

  double value(double y1, double y2) const {
    const double x1 = frechet_to_gev(y1, m1_);
    const double x2 = frechet_to_gev(y2, m2_);
    return (detail::int_pow(x1, m1_.beta) * detail::int_pow(x2, m2_.beta) - c1c2_) *
           inv_sqrt_d1d2_;
  }

  /// (dH/dy1, dH/dy2); dx/dy = tau y^{xi - 1}.
  std::pair<double, double> gradient(double y1, double y2) const {
    const double x1 = frechet_to_gev(y1, m1_);
    const double x2 = frechet_to_gev(y2, m2_);
    const double p1 = detail::int_pow(x1, m1_.beta);
    const double p2 = detail::int_pow(x2, m2_.beta);
    const double d1 = m1_.beta * detail::int_pow(x1, m1_.beta - 1) * m1_.tau *
                      std::exp((m1_.xi - 1.0) * std::log(y1));
    const double d2 = m2_.beta * detail::int_pow(x2, m2_.beta - 1) * m2_.tau *
                      std::exp((m2_.xi - 1.0) * std::log(y2));
    return {d1 * p2 * inv_sqrt_d1d2_, p1 * d2 * inv_sqrt_d1d2_};
  }

  const Margins& m1() const { return m1_; }
  const Margins& m2() const { return m2_; }

 private:
  Margins m1_;
  Margins m2_;
  double c1c2_;
  double inv_sqrt_d1d2_;
};

/// One-shot helpers mirroring the operation contracts.
inline double h_performance(double y1, double y2, const Margins& m1, const Margins& m2) {
  return HPerformance(m1, m2).value(y1, y2);
}

inline std::pair<double, double> h_gradient(double y1, double y2, const Margins& m1,
                                            const Margins& m2) {
  return HPerformance(m1, m2).gradient(y1, y2);
}

}  // namespace core
}  // namespace maxsens

#endif  // MAXSENS_CORE_HPP
