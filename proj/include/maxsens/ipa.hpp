// maxsens/ipa.hpp -- infinitesimal perturbation analysis (pathwise
// derivative) of Smith-field performances with respect to the storm shape
// matrix Sigma.
//
// The field value at x is Y(x) = U phi_d(x - C; Sigma) for the storm (U, C)
// realizing the pointwise maximum.  Holding that storm fixed (the argmax is
// almost surely locally constant in Sigma),
//   d log Y(x) / d Sigma = -1/2 (Sigma^{-1}
//                                - Sigma^{-1}(x-C)(x-C)' Sigma^{-1}),
// and the sensitivity of R = E[H(Y(x1), Y(x2))] is estimated by the Monte
// Carlo mean of sum_j (dH/dy_j) * Y_j * dlogY_j/dSigma over simulated fields
// with stored argmax storms.
//
// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#ifndef MAXSENS_IPA_HPP
#define MAXSENS_IPA_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "maxsens/core.hpp"
#include "maxsens/errors.hpp"
#include "maxsens/detail/parallel.hpp"
#include "maxsens/simulate.hpp"

namespace maxsens {
namespace ipa {

/// A symmetric d x d matrix of derivatives with respect to the entries of
/// Sigma (entry (i,j) differentiates with respect to sigma_ij).
struct SigmaGradient {
  Eigen::MatrixXd d_sigma;
};

/// Pathwise derivative of log Y(x) with respect to Sigma for the storm with
/// centre C realizing the maximum at x:
///   -1/2 (Sigma^{-1} - Sigma^{-1}(x-C)(x-C)' Sigma^{-1}).
/// The result is symmetric bitwise (entries (i,j) and (j,i) identical).
inline SigmaGradient dlog_y_dsigma(const core::Site& site,
                                   const Eigen::VectorXd& storm_center,
                                   const core::SmithParams& sigma) {
  const int d = sigma.dim();
  if (site.dim() != d || storm_center.size() != d) {
    throw config_error("dlog_y_dsigma: dimension mismatch");
  }
  Eigen::VectorXd delta(d);
  for (int k = 0; k < d; ++k) delta[k] = site.coords[k] - storm_center[k];
  const Eigen::VectorXd u = sigma.inverse() * delta;
  SigmaGradient g;
  g.d_sigma.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      g.d_sigma(i, j) = -0.5 * (sigma.inverse()(i, j) - u[i] * u[j]);
    }
  }
  return g;
}

/// Entrywise Monte Carlo estimates of dR/dSigma with standard errors.
struct IpaEstimate {
  Eigen::MatrixXd value;      ///< entrywise Monte Carlo mean
  Eigen::MatrixXd std_error;  ///< entrywise standard error of the mean
  std::size_t n_sims = 0;
  std::uint64_t seed = 0;

  core::SensitivityEstimate entry(int i, int j) const {
    return core::SensitivityEstimate{value(i, j), std_error(i, j), n_sims,
                                     seed};
  }
};

/// IPA estimator with an arbitrary performance gradient
/// grad(y1, y2) -> (dH/dy1, dH/dy2).  The per-simulation summand is
///   sum_j grad_j * Y_j * dlog_y_dsigma(x_j, C_j, Sigma),
/// consuming the argmax storms stored by the Smith simulator; nothing is
/// re-simulated under perturbed Sigma (the essence of IPA).
template <typename Grad>
IpaEstimate ipa_estimate_general(const core::SmithParams& sigma,
                                 const core::Site& site1,
                                 const core::Site& site2, Grad&& grad,
                                 const simulate::SimConfig& cfg) {
  cfg.validate();
  const int d = sigma.dim();
  if (site1.dim() != d || site2.dim() != d) {
    throw config_error("ipa_estimate: site dimension must match sigma");
  }
  const simulate::SmithBatch batch =
      simulate::simulate_smith(sigma, {site1, site2}, cfg);

  const std::size_t n = cfg.n_sims;
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  std::vector<double> summand(n * dd);
  const core::Site* sites[2] = {&site1, &site2};
  detail::parallel_for(n, cfg.threads, [&](std::size_t i) {
    const double y1 = batch.value(i, 0);
    const double y2 = batch.value(i, 1);
    const auto [g1, g2] = grad(y1, y2);
    const double gy[2] = {g1 * y1, g2 * y2};
    double* out = summand.data() + i * dd;
    for (std::size_t e = 0; e < dd; ++e) out[e] = 0.0;
    Eigen::VectorXd centre(d);
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < d; ++k) centre[k] = batch.storm_c(i, j, k);
      const SigmaGradient dlog = dlog_y_dsigma(*sites[j], centre, sigma);
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          out[static_cast<std::size_t>(a) * d + b] +=
              gy[j] * dlog.d_sigma(a, b);
        }
      }
    }
  });

  // Deterministic sequential reduction (independent of thread count).
  IpaEstimate est;
  est.n_sims = n;
  est.seed = cfg.seed;
  est.value = Eigen::MatrixXd::Zero(d, d);
  est.std_error = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = summand.data() + i * dd;
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        est.value(a, b) += row[static_cast<std::size_t>(a) * d + b];
      }
    }
  }
  est.value /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = summand.data() + i * dd;
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        const double dev =
            row[static_cast<std::size_t>(a) * d + b] - est.value(a, b);
        est.std_error(a, b) += dev * dev;
      }
    }
  }
  if (n > 1) {
    est.std_error = (est.std_error / static_cast<double>(n - 1) /
                     static_cast<double>(n))
                        .cwiseSqrt();
  } else {
    est.std_error.setZero();
  }
  return est;
}

/// IPA estimate of dR/dSigma for the standardized powered-cost performance
/// H built from the two margins.  Requires beta * xi < 1/2 for both margins
/// (enforced by Margins).
inline IpaEstimate ipa_estimate(const core::SmithParams& sigma,
                                const core::Site& site1,
                                const core::Site& site2,
                                const core::Margins& m1,
                                const core::Margins& m2,
                                const simulate::SimConfig& cfg) {
  const core::HPerformance perf(m1, m2);
  return ipa_estimate_general(
      sigma, site1, site2,
      [&perf](double y1, double y2) { return perf.gradient(y1, y2); }, cfg);
}

}  // namespace ipa
}  // namespace maxsens

#endif  // MAXSENS_IPA_HPP
