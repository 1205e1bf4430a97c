// maxsens/oracle.hpp -- analytical (quadrature) values of the powered-cost
// correlation R and of its sensitivities to the dependence parameters, for
// both the Brown--Resnick and the Smith field, plus the pairwise extremal
// coefficient.
//
// Everything reduces to the bivariate Huesler--Reiss dependence parameter
// h = sqrt(2 gamma(x2 - x1)) and the cross-moment function
//   g_{b1,b2}(h) = E[Y1^{b1} Y2^{b2}]
// of a standard-Frechet Huesler--Reiss pair, which for h > 0 is a
// one-dimensional integral over t = y2/y1 evaluated by adaptive
// Gauss--Kronrod quadrature after the substitution t = s/(1-s).
//
// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#ifndef MAXSENS_ORACLE_HPP
#define MAXSENS_ORACLE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "maxsens/core.hpp"
#include "maxsens/errors.hpp"
#include "maxsens/gauss.hpp"
#include "maxsens/detail/quadrature.hpp"
#include "maxsens/detail/special.hpp"

namespace maxsens {
namespace oracle {

/// Quadrature controls for the correlation oracle.
struct QuadConfig {
  /// Relative tolerance of each adaptive integral.
  double rel_tol = 1e-7;
  /// Subdivision limit of the adaptive scheme.
  int max_subdivisions = 600;
  /// Step of the central difference in h inside the sensitivity integrand;
  /// 0 selects the default 1e-6 * h.
  double h_fd_step = 0.0;

  void validate() const {
    if (!(rel_tol > 0.0) || !(rel_tol <= 1e-3)) {
      throw config_error("QuadConfig: rel_tol must lie in (0, 1e-3]");
    }
    if (max_subdivisions < 1) {
      throw config_error("QuadConfig: max_subdivisions must be positive");
    }
    if (h_fd_step < 0.0 || !std::isfinite(h_fd_step)) {
      throw config_error("QuadConfig: h_fd_step must be nonnegative");
    }
  }
};

namespace detail_or {

/// The h-dependent bracket of the g integrand:
///   C2 * C1^{a-2} * Gamma(2-a) + C3 * C1^{a-1} * Gamma(1-a),  a = b1 + b2,
/// with (writing zp = h/2 + log(t)/h, zm = h/2 - log(t)/h)
///   C1 = Phi(zp) + Phi(zm)/t,
///   C2 = [Phi(zp) + phi(zp)/h - phi(zm)/(h t)]
///        * [Phi(zm)/t^2 + phi(zm)/(h t^2) - phi(zp)/(h t)],
///   C3 = zm phi(zp)/(h^2 t) + zp phi(zm)/(h^2 t^2).
/// C1 >= max(Phi(h/2), Phi(h/2)/t) > 0, so its powers are taken as
/// exp(a log C1).
inline double g_bracket(double t, double h, double a, double gamma_2ma,
                        double gamma_1ma) {
  const double lt = std::log(t) / h;
  const double zp = 0.5 * h + lt;
  const double zm = 0.5 * h - lt;
  const double cdf_p = gauss::std_normal_cdf(zp);
  const double cdf_m = gauss::std_normal_cdf(zm);
  const double pdf_p = gauss::std_normal_pdf(zp);
  const double pdf_m = gauss::std_normal_pdf(zm);
  const double c1 = cdf_p + cdf_m / t;
  const double f1 = cdf_p + pdf_p / h - pdf_m / (h * t);
  const double f2 = cdf_m / (t * t) + pdf_m / (h * t * t) - pdf_p / (h * t);
  const double c2 = f1 * f2;
  const double c3 =
      zm * pdf_p / (h * h * t) + zp * pdf_m / (h * h * t * t);
  const double log_c1 = std::log(c1);
  return c2 * std::exp((a - 2.0) * log_c1) * gamma_2ma +
         c3 * std::exp((a - 1.0) * log_c1) * gamma_1ma;
}

/// Integrate integrand(t) over t in (0, inf) with the substitution
/// t = s/(1-s), splitting at the image of t = 10 where the integrand peaks.
template <typename F>
double integrate_over_t(F integrand, const QuadConfig& q) {
  const auto in_s = [&](double s) {
    const double omt = 1.0 - s;
    const double t = s / omt;
    return integrand(t) / (omt * omt);
  };
  const double split = 10.0 / 11.0;
  const std::size_t limit = static_cast<std::size_t>(q.max_subdivisions);
  const double head =
      detail::integrate_qags(in_s, 0.0, split, 1e-12, q.rel_tol, limit).value;
  const double tail =
      detail::integrate_qags(in_s, split, 1.0, 1e-12, q.rel_tol, limit).value;
  return head + tail;
}

inline void check_tilde(double b1t, double b2t) {
  if (!(b1t < 0.5) || !(b2t < 0.5)) {
    throw config_error("g_function: powered-moment exponents must be < 1/2");
  }
  if (!std::isfinite(b1t) || !std::isfinite(b2t)) {
    throw config_error("g_function: exponents must be finite");
  }
}

}  // namespace detail_or

/// Cross moment g_{b1,b2}(h) = E[Y1^{b1} Y2^{b2}] of a standard-Frechet
/// Huesler--Reiss pair with dependence h >= 0 (h = 0 is the fully dependent
/// case g = Gamma(1 - b1 - b2)).
inline double g_function(double beta1t, double beta2t, double h,
                         const QuadConfig& q = QuadConfig{}) {
  q.validate();
  detail_or::check_tilde(beta1t, beta2t);
  if (h < 0.0 || !std::isfinite(h)) {
    throw config_error("g_function: h must be nonnegative");
  }
  const double a = beta1t + beta2t;
  if (h == 0.0) return detail::lanczos_gamma(1.0 - a);
  const double gamma_2ma = detail::lanczos_gamma(2.0 - a);
  const double gamma_1ma = detail::lanczos_gamma(1.0 - a);
  return detail_or::integrate_over_t(
      [&](double t) {
        return std::pow(t, beta2t) *
               detail_or::g_bracket(t, h, a, gamma_2ma, gamma_1ma);
      },
      q);
}

/// d g_{b1,b2} / d h by quadrature of the h-differentiated integrand
/// (central difference of the bracket inside the integral, step
/// q.h_fd_step or 1e-6 * h by default).
inline double g_function_dh(double beta1t, double beta2t, double h,
                            const QuadConfig& q = QuadConfig{}) {
  q.validate();
  detail_or::check_tilde(beta1t, beta2t);
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw config_error("g_function_dh: h must be positive");
  }
  const double a = beta1t + beta2t;
  const double gamma_2ma = detail::lanczos_gamma(2.0 - a);
  const double gamma_1ma = detail::lanczos_gamma(1.0 - a);
  const double step = q.h_fd_step > 0.0 ? q.h_fd_step : 1e-6 * h;
  return detail_or::integrate_over_t(
      [&](double t) {
        const double hi =
            detail_or::g_bracket(t, h + step, a, gamma_2ma, gamma_1ma);
        const double lo =
            detail_or::g_bracket(t, h - step, a, gamma_2ma, gamma_1ma);
        return std::pow(t, beta2t) * (hi - lo) / (2.0 * step);
      },
      q);
}

namespace detail_or {

/// Binomial weight B_{k1,k2} of the powered-GEV expansion.
inline double b_coefficient(const core::Margins& m1, const core::Margins& m2,
                            int k1, int k2) {
  const double a1 = m1.eta - m1.tau / m1.xi;
  const double b1 = m1.tau / m1.xi;
  const double a2 = m2.eta - m2.tau / m2.xi;
  const double b2 = m2.tau / m2.xi;
  return detail::binomial(m1.beta, k1) * detail::int_pow(a1, k1) *
         detail::int_pow(b1, m1.beta - k1) * detail::binomial(m2.beta, k2) *
         detail::int_pow(a2, k2) * detail::int_pow(b2, m2.beta - k2);
}

/// Precomputed (k1, k2) tables of the binomial expansion of
/// Cov(X1^{beta1}, X2^{beta2}).  The B coefficients alternate in sign and can
/// exceed the covariance by several orders of magnitude (factor ~1e5 at
/// beta = 8), so the expansion must never be summed from independently
/// quadratured g values: the per-term tolerance would be amplified by the
/// cancellation.  Instead the whole double sum, with the independence
/// correction folded in, forms ONE integrand; the cancellation then happens
/// pointwise at full double accuracy and the quadrature tolerance applies
/// directly to the covariance.
struct CrossTables {
  std::vector<double> b1t, b2t;  ///< tilde exponents (beta-k) xi per margin
  std::vector<double> bg2, bg1;  ///< B * Gamma(2-a), B * Gamma(1-a); row-major
};

inline CrossTables make_cross_tables(const core::Margins& m1,
                                     const core::Margins& m2) {
  CrossTables ct;
  ct.b1t.resize(static_cast<std::size_t>(m1.beta) + 1);
  ct.b2t.resize(static_cast<std::size_t>(m2.beta) + 1);
  for (int k = 0; k <= m1.beta; ++k) ct.b1t[k] = (m1.beta - k) * m1.xi;
  for (int k = 0; k <= m2.beta; ++k) ct.b2t[k] = (m2.beta - k) * m2.xi;
  ct.bg2.resize(ct.b1t.size() * ct.b2t.size());
  ct.bg1.resize(ct.b1t.size() * ct.b2t.size());
  for (int k1 = 0; k1 <= m1.beta; ++k1) {
    for (int k2 = 0; k2 <= m2.beta; ++k2) {
      const double a = ct.b1t[k1] + ct.b2t[k2];
      const double b = b_coefficient(m1, m2, k1, k2);
      const std::size_t idx = static_cast<std::size_t>(k1) * ct.b2t.size() +
                              static_cast<std::size_t>(k2);
      ct.bg2[idx] = b * detail::lanczos_gamma(2.0 - a);
      ct.bg1[idx] = b * detail::lanczos_gamma(1.0 - a);
    }
  }
  return ct;
}

/// Pointwise value of the combined covariance integrand
///   sum_{k1,k2} B t^{b2t} [ C2 C1^{a-2} G(2-a) + C3 C1^{a-1} G(1-a)
///                           - C2inf C1inf^{a-2} G(2-a) ],
/// whose t-integral is Cov(X1^{beta1}, X2^{beta2}); the subtracted
/// independence part (C1inf = 1 + 1/t, C2inf = 1/t^2, C3inf = 0) integrates
/// exactly to Gamma(1-b1t) Gamma(1-b2t) per (k1, k2).
inline double cross_integrand(double t, double h, const CrossTables& ct) {
  const double log_t = std::log(t);
  const double lt = log_t / h;
  const double zp = 0.5 * h + lt;
  const double zm = 0.5 * h - lt;
  const double cdf_p = gauss::std_normal_cdf(zp);
  const double cdf_m = gauss::std_normal_cdf(zm);
  const double pdf_p = gauss::std_normal_pdf(zp);
  const double pdf_m = gauss::std_normal_pdf(zm);
  const double c1 = cdf_p + cdf_m / t;
  const double f1 = cdf_p + pdf_p / h - pdf_m / (h * t);
  const double f2 = cdf_m / (t * t) + pdf_m / (h * t * t) - pdf_p / (h * t);
  const double c2 = f1 * f2;
  const double c3 = zm * pdf_p / (h * h * t) + zp * pdf_m / (h * h * t * t);
  const double log_c1 = std::log(c1);
  const double c1i = 1.0 + 1.0 / t;
  const double log_c1i = std::log(c1i);

  const double base2 = c2 * std::exp(-2.0 * log_c1);
  const double base3 = c3 * std::exp(-log_c1);
  const double base2i = std::exp(-2.0 * log_c1i) / (t * t);

  const std::size_t n1 = ct.b1t.size(), n2 = ct.b2t.size();
  double sum = 0.0;
  for (std::size_t k1 = 0; k1 < n1; ++k1) {
    const double u1 = std::exp(ct.b1t[k1] * log_c1);
    const double w1 = std::exp(ct.b1t[k1] * log_c1i);
    for (std::size_t k2 = 0; k2 < n2; ++k2) {
      const double u2 = std::exp(ct.b2t[k2] * (log_c1 + log_t));
      const double w2 = std::exp(ct.b2t[k2] * (log_c1i + log_t));
      const std::size_t idx = k1 * n2 + k2;
      sum += ct.bg2[idx] * (base2 * u1 * u2 - base2i * w1 * w2) +
             ct.bg1[idx] * base3 * u1 * u2;
    }
  }
  return sum;
}

/// Pointwise h-derivative of the combined covariance integrand, by hand
/// differentiation of C1, C2, C3 (the independence fold is h-free and drops
/// out).  With dzp/dh = zm/h and dzm/dh = zp/h:
///   c1' = pdf_p zm/h + pdf_m zp/(h t),
///   f1' = pdf_p zm/h - (zp zm + 1)(pdf_p - pdf_m/t)/h^2,
///   f2' = pdf_m zp/(h t^2) - (zp zm + 1)(pdf_m/t^2 - pdf_p/t)/h^2,
///   c2' = f1' f2 + f1 f2',
///   c3' = pdf_p (zp - zp zm^2 - 2 zm)/(h^3 t)
///         + pdf_m (zm - zm zp^2 - 2 zp)/(h^3 t^2),
/// and per (k1, k2), writing r = c1'/c1,
///   dbracket/dh = (c2' + (a-2) c2 r) C1^{a-2} G(2-a)
///                 + (c3' + (a-1) c3 r) C1^{a-1} G(1-a).
inline double cross_integrand_dh(double t, double h, const CrossTables& ct) {
  const double log_t = std::log(t);
  const double lt = log_t / h;
  const double zp = 0.5 * h + lt;
  const double zm = 0.5 * h - lt;
  const double cdf_p = gauss::std_normal_cdf(zp);
  const double cdf_m = gauss::std_normal_cdf(zm);
  const double pdf_p = gauss::std_normal_pdf(zp);
  const double pdf_m = gauss::std_normal_pdf(zm);
  const double h2 = h * h;
  const double c1 = cdf_p + cdf_m / t;
  const double f1 = cdf_p + pdf_p / h - pdf_m / (h * t);
  const double f2 = cdf_m / (t * t) + pdf_m / (h * t * t) - pdf_p / (h * t);
  const double c2 = f1 * f2;
  const double c3 = zm * pdf_p / (h2 * t) + zp * pdf_m / (h2 * t * t);
  const double zz1 = zp * zm + 1.0;
  const double dc1 = pdf_p * zm / h + pdf_m * zp / (h * t);
  const double df1 = pdf_p * zm / h - zz1 * (pdf_p - pdf_m / t) / h2;
  const double df2 =
      pdf_m * zp / (h * t * t) - zz1 * (pdf_m / (t * t) - pdf_p / t) / h2;
  const double dc2 = df1 * f2 + f1 * df2;
  const double dc3 = pdf_p * (zp - zp * zm * zm - 2.0 * zm) / (h2 * h * t) +
                     pdf_m * (zm - zm * zp * zp - 2.0 * zp) / (h2 * h * t * t);
  const double r = dc1 / c1;
  const double log_c1 = std::log(c1);

  const std::size_t n1 = ct.b1t.size(), n2 = ct.b2t.size();
  double sum = 0.0;
  const double e_m2 = std::exp(-2.0 * log_c1);
  const double e_m1 = std::exp(-log_c1);
  for (std::size_t k1 = 0; k1 < n1; ++k1) {
    const double u1 = std::exp(ct.b1t[k1] * log_c1);
    for (std::size_t k2 = 0; k2 < n2; ++k2) {
      const double u2 = std::exp(ct.b2t[k2] * (log_c1 + log_t));
      const double a = ct.b1t[k1] + ct.b2t[k2];
      const std::size_t idx = k1 * n2 + k2;
      sum += (ct.bg2[idx] * (dc2 + (a - 2.0) * c2 * r) * e_m2 +
              ct.bg1[idx] * (dc3 + (a - 1.0) * c3 * r) * e_m1) *
             u1 * u2;
    }
  }
  return sum;
}

/// Cov(X1^{beta1}, X2^{beta2}) at full dependence (h = 0, so Y1 = Y2 a.s.).
inline double cross_moment_h0(const core::Margins& m1,
                              const core::Margins& m2) {
  double sum = 0.0;
  for (int k1 = 0; k1 <= m1.beta; ++k1) {
    for (int k2 = 0; k2 <= m2.beta; ++k2) {
      const double b1t = (m1.beta - k1) * m1.xi;
      const double b2t = (m2.beta - k2) * m2.xi;
      sum += b_coefficient(m1, m2, k1, k2) *
             (detail::lanczos_gamma(1.0 - b1t - b2t) -
              detail::lanczos_gamma(1.0 - b1t) *
                  detail::lanczos_gamma(1.0 - b2t));
    }
  }
  return sum;
}

/// Correlation of the powered costs at dependence h.
inline double correlation_at_h(double h, const core::Margins& m1,
                               const core::Margins& m2, const QuadConfig& q) {
  q.validate();
  if (h < 0.0 || !std::isfinite(h)) {
    throw config_error("analytic_correlation: h must be nonnegative");
  }
  const double norm = std::sqrt(core::moment_d(m1) * core::moment_d(m2));
  if (h == 0.0) return cross_moment_h0(m1, m2) / norm;
  const CrossTables ct = make_cross_tables(m1, m2);
  const double cross = integrate_over_t(
      [&](double t) { return cross_integrand(t, h, ct); }, q);
  return cross / norm;
}

/// d correlation / d h at dependence h > 0, by quadrature of the analytic
/// h-derivative of the combined integrand.
inline double correlation_dh(double h, const core::Margins& m1,
                             const core::Margins& m2, const QuadConfig& q) {
  q.validate();
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw config_error("analytic_sensitivity: h must be positive");
  }
  const double norm = std::sqrt(core::moment_d(m1) * core::moment_d(m2));
  const CrossTables ct = make_cross_tables(m1, m2);
  const double cross_dh = integrate_over_t(
      [&](double t) { return cross_integrand_dh(t, h, ct); }, q);
  return cross_dh / norm;
}

}  // namespace detail_or

/// R(theta): correlation of the powered costs X1^{beta1}, X2^{beta2} under a
/// Brown--Resnick field.
inline double analytic_correlation(const core::BrParams& dep,
                                   const core::Site& site1,
                                   const core::Site& site2,
                                   const core::Margins& m1,
                                   const core::Margins& m2,
                                   const QuadConfig& q = QuadConfig{}) {
  const double gamma = core::semivariogram(dep, site1, site2);
  return detail_or::correlation_at_h(std::sqrt(2.0 * gamma), m1, m2, q);
}

/// R(Sigma): same correlation under a Smith field.
inline double analytic_correlation(const core::SmithParams& dep,
                                   const core::Site& site1,
                                   const core::Site& site2,
                                   const core::Margins& m1,
                                   const core::Margins& m2,
                                   const QuadConfig& q = QuadConfig{}) {
  const double gamma = core::smith_variogram(dep, site1, site2);
  return detail_or::correlation_at_h(std::sqrt(2.0 * gamma), m1, m2, q);
}

/// Gradient of R with respect to the Brown--Resnick parameters.
struct BrSensitivity {
  double d_kappa = 0.0;
  double d_psi = 0.0;
};

/// (dR/dkappa, dR/dpsi) for a Brown--Resnick field: the chain rule through
/// h = sqrt(2) (d/kappa)^{psi/2} gives
///   dh/dpsi = (h/2) log(d/kappa),  dh/dkappa = -(h psi)/(2 kappa).
inline BrSensitivity analytic_sensitivity(const core::BrParams& dep,
                                          const core::Site& site1,
                                          const core::Site& site2,
                                          const core::Margins& m1,
                                          const core::Margins& m2,
                                          const QuadConfig& q = QuadConfig{}) {
  const double d = core::distance(site1, site2);
  if (d <= 0.0) {
    throw config_error("analytic_sensitivity: sites must be distinct");
  }
  const double gamma = core::semivariogram(dep, site1, site2);
  const double h = std::sqrt(2.0 * gamma);
  const double dcorr_dh = detail_or::correlation_dh(h, m1, m2, q);
  BrSensitivity s;
  s.d_psi = dcorr_dh * 0.5 * h * std::log(d / dep.kappa);
  s.d_kappa = dcorr_dh * (-0.5 * h * dep.psi / dep.kappa);
  return s;
}

/// Gradient of R with respect to the entries of Sigma (Smith field):
///   dh/dsigma_ij = -(Sigma^{-1} dx dx' Sigma^{-1})_ij / (2h),
/// every entry treated as an independent coordinate, so the returned matrix
/// is symmetric with the (i,j) and (j,i) entries equal.
struct SmithSensitivity {
  Eigen::MatrixXd d_sigma;
};

inline SmithSensitivity analytic_sensitivity(const core::SmithParams& dep,
                                             const core::Site& site1,
                                             const core::Site& site2,
                                             const core::Margins& m1,
                                             const core::Margins& m2,
                                             const QuadConfig& q = QuadConfig{}) {
  if (site1.dim() != dep.dim() || site2.dim() != dep.dim()) {
    throw config_error("analytic_sensitivity: dimension mismatch");
  }
  const int d = dep.dim();
  Eigen::VectorXd dx(d);
  for (int k = 0; k < d; ++k) dx[k] = site2.coords[k] - site1.coords[k];
  if (dx.squaredNorm() == 0.0) {
    throw config_error("analytic_sensitivity: sites must be distinct");
  }
  const double gamma = core::smith_variogram(dep, site1, site2);
  const double h = std::sqrt(2.0 * gamma);
  const double dcorr_dh = detail_or::correlation_dh(h, m1, m2, q);
  const Eigen::VectorXd u = dep.inverse() * dx;
  SmithSensitivity s;
  s.d_sigma.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      s.d_sigma(i, j) = dcorr_dh * (-(u[i] * u[j]) / (2.0 * h));
    }
  }
  return s;
}

/// Pairwise extremal coefficient V(1,1) = 2 Phi(sqrt(gamma/2)) in [1, 2].
inline double extremal_coefficient(const core::BrParams& dep,
                                   const core::Site& site1,
                                   const core::Site& site2) {
  const double gamma = core::semivariogram(dep, site1, site2);
  return 2.0 * gauss::std_normal_cdf(std::sqrt(0.5 * gamma));
}

inline double extremal_coefficient(const core::SmithParams& dep,
                                   const core::Site& site1,
                                   const core::Site& site2) {
  const double gamma = core::smith_variogram(dep, site1, site2);
  return 2.0 * gauss::std_normal_cdf(std::sqrt(0.5 * gamma));
}

}  // namespace oracle
}  // namespace maxsens

#endif  // MAXSENS_ORACLE_HPP
