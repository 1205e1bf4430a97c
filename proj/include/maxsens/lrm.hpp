// maxsens/lrm.hpp -- likelihood ratio method (score function) sensitivities
// for bivariate Brown--Resnick max-stable vectors.
//
// The bivariate margin of a Brown--Resnick field with semivariogram gamma(d)
// is the Huesler--Reiss distribution with dependence parameter
// h = sqrt(2 * gamma(d)).  Its joint density factorises through h, so scores
// with respect to the variogram parameters (psi, kappa) are chain-rule
// multiples of a single derivative d log f / d h.
//
// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#ifndef MAXSENS_LRM_HPP
#define MAXSENS_LRM_HPP

#include <atomic>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "maxsens/core.hpp"
#include "maxsens/errors.hpp"
#include "maxsens/gauss.hpp"
#include "maxsens/detail/parallel.hpp"
#include "maxsens/simulate.hpp"

namespace maxsens {
namespace lrm {

/// Score of the log bivariate density with respect to the variogram
/// parameters, evaluated at one observation pair.
struct BivariateScore {
  double d_psi = 0.0;    ///< d log f / d psi
  double d_kappa = 0.0;  ///< d log f / d kappa
};

namespace detail_lrm {

/// Count of density evaluations that underflowed to the DBL_MIN clamp.
/// Purely diagnostic: estimates remain finite, but a large count signals
/// that observations far outside the bulk were fed to the density.
inline std::atomic<std::uint64_t>& underflow_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

/// Pieces of the Huesler--Reiss density shared by value and score.
/// With w = h/2 + log(y2/y1)/h and v = h/2 - log(y2/y1)/h:
///   f(y1,y2) = exp(-Phi(w)/y1 - Phi(v)/y2) * (A*B + C),
/// where A = -dV/dy1, B = -dV/dy2 and C = -d^2V/dy1dy2.
struct HrParts {
  double w = 0.0, v = 0.0;
  double phi_w = 0.0, phi_v = 0.0;  // standard normal pdf at w, v
  double big_phi_w = 0.0, big_phi_v = 0.0;  // standard normal cdf at w, v
  double a = 0.0, b = 0.0, c = 0.0;
  double exponent = 0.0;  // -V(y1,y2)
  double y1 = 0.0, y2 = 0.0, h = 0.0;
};

inline HrParts hr_parts(double y1, double y2, double h) {
  if (!(y1 > 0.0) || !(y2 > 0.0) || !std::isfinite(y1) || !std::isfinite(y2)) {
    throw config_error("lrm: observations must be positive and finite");
  }
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw config_error("lrm: dependence parameter h must be positive");
  }
  HrParts p;
  p.y1 = y1;
  p.y2 = y2;
  p.h = h;
  const double log_ratio = std::log(y2) - std::log(y1);
  p.w = 0.5 * h + log_ratio / h;
  p.v = 0.5 * h - log_ratio / h;
  p.phi_w = gauss::std_normal_pdf(p.w);
  p.phi_v = gauss::std_normal_pdf(p.v);
  p.big_phi_w = gauss::std_normal_cdf(p.w);
  p.big_phi_v = gauss::std_normal_cdf(p.v);
  p.exponent = -(p.big_phi_w / y1 + p.big_phi_v / y2);
  p.a = p.big_phi_w / (y1 * y1) + p.phi_w / (h * y1 * y1) -
        p.phi_v / (h * y1 * y2);
  p.b = p.big_phi_v / (y2 * y2) + p.phi_v / (h * y2 * y2) -
        p.phi_w / (h * y1 * y2);
  p.c = p.v * p.phi_w / (h * h * y1 * y1 * y2) +
        p.w * p.phi_v / (h * h * y1 * y2 * y2);
  return p;
}

/// d log f / d h in closed form.  Uses dw/dh = v/h and dv/dh = w/h, and the
/// derivatives of the factors A, B, C above with respect to h.
inline double dlogf_dh(const HrParts& p) {
  const double h = p.h, y1 = p.y1, y2 = p.y2;
  const double w = p.w, v = p.v;
  const double h2 = h * h;
  // d/dh of the exponent -Phi(w)/y1 - Phi(v)/y2.
  const double d_exponent =
      -(p.phi_w * v) / (h * y1) - (p.phi_v * w) / (h * y2);
  // d/dh of A, B, C.  phi'(x) = -x phi(x).
  const double da = p.phi_w * v / (h * y1 * y1) -
                    p.phi_w * (w * v + 1.0) / (h2 * y1 * y1) +
                    p.phi_v * (v * w + 1.0) / (h2 * y1 * y2);
  const double db = p.phi_v * w / (h * y2 * y2) -
                    p.phi_v * (w * v + 1.0) / (h2 * y2 * y2) +
                    p.phi_w * (v * w + 1.0) / (h2 * y1 * y2);
  const double dc =
      p.phi_w * (w - w * v * v - 2.0 * v) / (h2 * h * y1 * y1 * y2) +
      p.phi_v * (v - v * w * w - 2.0 * w) / (h2 * h * y1 * y2 * y2);
  const double factor = p.a * p.b + p.c;
  return d_exponent + (da * p.b + p.a * db + dc) / factor;
}

}  // namespace detail_lrm

/// Number of bivariate density evaluations so far whose value underflowed
/// and was clamped to DBL_MIN.
inline std::uint64_t density_underflow_count() {
  return detail_lrm::underflow_counter().load(std::memory_order_relaxed);
}

/// Reset the underflow diagnostic counter to zero.
inline void reset_density_underflow_count() {
  detail_lrm::underflow_counter().store(0, std::memory_order_relaxed);
}

/// Log of the bivariate Huesler--Reiss density with unit Frechet margins and
/// dependence parameter h > 0, evaluated at (y1, y2).
inline double log_bivariate_density(double y1, double y2, double h) {
  const detail_lrm::HrParts p = detail_lrm::hr_parts(y1, y2, h);
  const double factor = p.a * p.b + p.c;
  if (!(factor > 0.0)) {
    // The factor is a sum of exponent-measure derivatives and is positive in
    // exact arithmetic; a non-positive value here means catastrophic
    // cancellation far in the tails.  Clamp and record.
    detail_lrm::underflow_counter().fetch_add(1, std::memory_order_relaxed);
    return std::log(DBL_MIN);
  }
  return p.exponent + std::log(factor);
}

/// Bivariate Huesler--Reiss density with unit Frechet margins.  Values that
/// underflow the smallest positive normal double are clamped to DBL_MIN and
/// counted (see density_underflow_count) rather than silently flushed to 0.
inline double bivariate_density(double y1, double y2, double h) {
  const detail_lrm::HrParts p = detail_lrm::hr_parts(y1, y2, h);
  const double factor = p.a * p.b + p.c;
  if (!(factor > 0.0)) {
    // Same cancellation guard as log_bivariate_density; return the clamp
    // value itself rather than exp(log(DBL_MIN)), which lands a few ulps off.
    detail_lrm::underflow_counter().fetch_add(1, std::memory_order_relaxed);
    return DBL_MIN;
  }
  double f = std::exp(p.exponent + std::log(factor));
  if (f < DBL_MIN) {
    detail_lrm::underflow_counter().fetch_add(1, std::memory_order_relaxed);
    f = DBL_MIN;
  }
  return f;
}

/// d log f / d h at (y1, y2); exposed for direct validation of the closed
/// form against finite differences of log_bivariate_density.
inline double dlog_density_dh(double y1, double y2, double h) {
  return detail_lrm::dlogf_dh(detail_lrm::hr_parts(y1, y2, h));
}

/// Score (gradient of the log bivariate density) with respect to the
/// semivariogram parameters (psi, kappa), for the site pair (a, b).
///
/// With gamma(d) = (d/kappa)^psi and h = sqrt(2 gamma(d)):
///   dh/dpsi   =  (h/2) log(d/kappa),
///   dh/dkappa = -(h psi) / (2 kappa),
/// so d_psi / d_kappa = -(kappa/psi) log(d/kappa) for every observation.
inline BivariateScore score(double y1, double y2, const core::BrParams& params,
                            const core::Site& a, const core::Site& b) {
  const double d = core::distance(a, b);
  if (d <= 0.0) {
    throw config_error("lrm::score: sites must be distinct");
  }
  const double gamma = core::semivariogram(params, a, b);
  const double h = std::sqrt(2.0 * gamma);
  const double dlog_dh = dlog_density_dh(y1, y2, h);
  const double log_d_over_kappa = std::log(d / params.kappa);
  BivariateScore s;
  s.d_psi = dlog_dh * 0.5 * h * log_d_over_kappa;
  s.d_kappa = dlog_dh * (-0.5 * h * params.psi / params.kappa);
  return s;
}

/// Paired sensitivity estimate for the two variogram parameters.
struct LrmEstimate {
  core::SensitivityEstimate d_psi;    ///< estimate of dR/dpsi
  core::SensitivityEstimate d_kappa;  ///< estimate of dR/dkappa
};

/// Likelihood-ratio estimator of the gradient of R = E[H(Y(x1), Y(x2))]
/// with respect to (psi, kappa), using cfg.n_sims exact Brown--Resnick
/// simulations at the two sites.
///
/// The estimator averages H(Y) * d log f / d theta.  Because both scores are
/// deterministic multiples of d log f / d h, per-replicate estimates for psi
/// and kappa are exact scalar multiples of a single Monte Carlo average; the
/// implementation exploits this by accumulating H * dlogf/dh once.
inline LrmEstimate lrm_estimate(const core::BrParams& params,
                                const core::Site& site1,
                                const core::Site& site2,
                                const core::Margins& m1,
                                const core::Margins& m2,
                                const simulate::SimConfig& cfg) {
  cfg.validate();
  const double d = core::distance(site1, site2);
  if (d <= 0.0) {
    throw config_error("lrm_estimate: sites must be distinct");
  }
  const double gamma = core::semivariogram(params, site1, site2);
  const double h = std::sqrt(2.0 * gamma);
  const core::HPerformance perf(m1, m2);

  const simulate::BrBatch batch =
      simulate::simulate_brown_resnick(params, {site1, site2}, cfg);

  const std::size_t n = cfg.n_sims;
  std::vector<double> summand(n);
  detail::parallel_for(n, cfg.threads, [&](std::size_t i) {
    const double y1 = batch.value(i, 0);
    const double y2 = batch.value(i, 1);
    const double hval = perf.value(y1, y2);
    summand[i] = hval * dlog_density_dh(y1, y2, h);
  });

  double sum = 0.0;
  for (double s : summand) sum += s;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double s : summand) {
    const double dev = s - mean;
    ss += dev * dev;
  }
  const double var = (n > 1) ? ss / static_cast<double>(n - 1) : 0.0;
  const double se = std::sqrt(var / static_cast<double>(n));

  const double dh_dpsi = 0.5 * h * std::log(d / params.kappa);
  const double dh_dkappa = -0.5 * h * params.psi / params.kappa;

  LrmEstimate est;
  est.d_psi = core::SensitivityEstimate{mean * dh_dpsi,
                                        se * std::fabs(dh_dpsi), n, cfg.seed};
  est.d_kappa = core::SensitivityEstimate{
      mean * dh_dkappa, se * std::fabs(dh_dkappa), n, cfg.seed};
  return est;
}

}  // namespace lrm
}  // namespace maxsens

#endif  // MAXSENS_LRM_HPP
