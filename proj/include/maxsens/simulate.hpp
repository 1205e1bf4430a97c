// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.
//
// Exact finite-site simulation of the Brown-Resnick field (extremal-functions
// algorithm of Dombry, Engelke & Oesting 2016) and storm-process simulation
// of the Smith field (Smith 1990) with per-site argmax storm tracking.

#ifndef MAXSENS_SIMULATE_HPP
#define MAXSENS_SIMULATE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "maxsens/core.hpp"
#include "maxsens/detail/parallel.hpp"
#include "maxsens/gauss.hpp"

namespace maxsens {
namespace simulate {

/// Simulation batch configuration.  `seed` keys every per-draw random stream
/// (draw i uses stream_id = i), so batches are bit-identical for any worker
/// count.  `threads` = 0 means hardware concurrency.
struct SimConfig {
  std::size_t n_sims = 1;
  double truncation_radius = 15.0;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    if (n_sims < 1) throw config_error("SimConfig: n_sims must be at least 1");
    if (!(truncation_radius > 0.0))
      throw config_error("SimConfig: truncation radius must be positive");
  }
};

/// Batch of simple max-stable draws at M sites, site-major:
/// value(i, j) is draw i at site j, and all draws for one site are
/// contiguous for the estimator hot loops.
class BrBatch {
 public:
  BrBatch(std::size_t n_sims, int m) : n_(n_sims), m_(m), values_(n_sims * m) {}

  double value(std::size_t sim, int site) const { return values_[site * n_ + sim]; }
  double& value(std::size_t sim, int site) { return values_[site * n_ + sim]; }
  std::size_t n_sims() const { return n_; }
  int n_sites() const { return m_; }
  const std::vector<double>& raw() const { return values_; }

 private:
  std::size_t n_;
  int m_;
  std::vector<double> values_;
};

/// Smith batch: field values plus, for each draw and site, the realizing
/// storm (arrival u and centre c), which IPA consumes.
class SmithBatch {
 public:
  SmithBatch(std::size_t n_sims, int m, int d)
      : n_(n_sims), m_(m), d_(d), values_(n_sims * m), storm_u_(n_sims * m),
        storm_c_(n_sims * m * d) {}

  double value(std::size_t sim, int site) const { return values_[site * n_ + sim]; }
  double storm_u(std::size_t sim, int site) const { return storm_u_[site * n_ + sim]; }
  /// k-th coordinate of the storm centre realizing the max at (sim, site).
  double storm_c(std::size_t sim, int site, int k) const {
    return storm_c_[(site * n_ + sim) * d_ + k];
  }

  double& value(std::size_t sim, int site) { return values_[site * n_ + sim]; }
  double& storm_u(std::size_t sim, int site) { return storm_u_[site * n_ + sim]; }
  double& storm_c(std::size_t sim, int site, int k) {
    return storm_c_[(site * n_ + sim) * d_ + k];
  }

  std::size_t n_sims() const { return n_; }
  int n_sites() const { return m_; }
  int dim() const { return d_; }

 private:
  std::size_t n_;
  int m_;
  int d_;
  std::vector<double> values_;
  std::vector<double> storm_u_;
  std::vector<double> storm_c_;
};

namespace detail_sim {

/// Diagnostic: counts Smith candidate storms whose site value lands within
/// relative 1e-10 of the running site maximum.  Such near-ties have
/// probability zero for continuous inputs; a nonzero count flags a
/// degenerate configuration where the recorded argmax storm is ambiguous.
inline std::atomic<std::uint64_t>& smith_near_tie_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

inline void check_sites(const std::vector<core::Site>& sites) {
  if (sites.empty()) throw config_error("simulate: at least one site is required");
  const int d = sites.front().dim();
  for (const auto& s : sites)
    if (s.dim() != d) throw config_error("simulate: sites must share one dimension");
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      if (core::distance(sites[i], sites[j]) == 0.0)
        throw config_error("simulate: sites must be distinct");
}

/// Per-reference-site spectral decomposition for the extremal-functions
/// algorithm: conditioned on being the argmax generator at site k, the
/// log spectral vector at the other sites is Gaussian with mean
/// -gamma(x_j, x_k) and covariance K(i,j) = gamma_ik + gamma_jk - gamma_ij.
struct BrPrecomp {
  // For each k: mean vector (length M-1) and Cholesky factor of K (M-1 x M-1),
  // rows/cols ordered by site index skipping k.
  std::vector<Eigen::VectorXd> mean;
  std::vector<Eigen::MatrixXd> chol;
};

inline BrPrecomp br_precompute(const core::BrParams& params,
                               const std::vector<core::Site>& sites) {
  const int m = static_cast<int>(sites.size());
  Eigen::MatrixXd gamma(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) gamma(i, j) = core::semivariogram(params, sites[i], sites[j]);
  BrPrecomp pre;
  pre.mean.resize(m);
  pre.chol.resize(m);
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd mu(m - 1);
    Eigen::MatrixXd cov(m - 1, m - 1);
    int a = 0;
    for (int i = 0; i < m; ++i) {
      if (i == k) continue;
      mu[a] = -gamma(i, k);
      int b = 0;
      for (int j = 0; j < m; ++j) {
        if (j == k) continue;
        cov(a, b) = gamma(i, k) + gamma(j, k) - gamma(i, j);
        ++b;
      }
      ++a;
    }
    pre.mean[k] = mu;
    if (m > 1) {
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success)
        throw numeric_error("simulate_brown_resnick: spectral covariance not positive "
                            "definite (degenerate site geometry)");
      pre.chol[k] = llt.matrixL();
    } else {
      pre.chol[k] = Eigen::MatrixXd(0, 0);
    }
  }
  return pre;
}

/// One exact draw of the Brown-Resnick vector.  Sites are swept in order;
/// for the k-th site, Poisson arrivals zeta paired with log-Gaussian spectral
/// vectors (normalized to 1 at site k) are scanned while zeta exceeds the
/// running maximum at site k, and a candidate is kept only when it is not
/// dominated at previously processed sites.
inline void br_draw(const BrPrecomp& pre, int m, gauss::RngStream& rng, double* out) {
  std::vector<double> z(m, 0.0);
  std::vector<double> cand(m);
  std::vector<double> g(std::max(0, m - 1));
  for (int k = 0; k < m; ++k) {
    double gamma_sum = rng.exponential();
    double zeta = 1.0 / gamma_sum;
    while (zeta > z[k]) {
      // Spectral vector: cand[k] = zeta, log cand[j] Gaussian around the
      // variance-debiased mean.
      const int p = m - 1;
      for (int i = 0; i < p; ++i) g[i] = rng.normal();
      int a = 0;
      bool dominated = false;
      for (int j = 0; j < m; ++j) {
        if (j == k) {
          cand[j] = zeta;
          continue;
        }
        double s = 0.0;
        for (int b = 0; b <= a; ++b) s += pre.chol[k](a, b) * g[b];
        cand[j] = zeta * std::exp(pre.mean[k][a] + s);
        if (j < k && cand[j] >= z[j]) dominated = true;
        ++a;
      }
      if (!dominated) {
        for (int j = 0; j < m; ++j) z[j] = std::max(z[j], cand[j]);
      }
      gamma_sum += rng.exponential();
      zeta = 1.0 / gamma_sum;
    }
  }
  for (int j = 0; j < m; ++j) out[j] = z[j];
}

}  // namespace detail_sim

/// Exact simulation of the Brown-Resnick field at the given sites.
/// Margins are standard Frechet and the joint law is the Husler-Reiss
/// distribution induced by the semivariogram.
inline BrBatch simulate_brown_resnick(const core::BrParams& params,
                                      const std::vector<core::Site>& sites,
                                      const SimConfig& cfg) {
  cfg.validate();
  detail_sim::check_sites(sites);
  const int m = static_cast<int>(sites.size());
  const auto pre = detail_sim::br_precompute(params, sites);
  BrBatch batch(cfg.n_sims, m);
  detail::parallel_for(cfg.n_sims, cfg.threads, [&](std::size_t i) {
    gauss::RngStream rng(cfg.seed, i);
    std::vector<double> local(m);
    detail_sim::br_draw(pre, m, rng, local.data());
    for (int j = 0; j < m; ++j) batch.value(i, j) = local[j];
  });
  return batch;
}

/// Upper bound on the relative Gaussian-density mass a storm centred on the
/// boundary of the inflated box can still contribute inside it:
/// exp(-r^2 lambda_min(Sigma^{-1}) / 2).  Must be below 1e-12.
inline double smith_tail_bound(const core::SmithParams& params, double radius) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(params.inverse());
  const double lam_min = es.eigenvalues().minCoeff();
  return std::exp(-0.5 * radius * radius * lam_min);
}

/// Storm-process simulation of the Smith field: Poisson arrivals
/// U_1 > U_2 > ... with total mass the volume of the site bounding box
/// inflated by the truncation radius, storm centres uniform on that box,
/// and field value Y(x) = max_i U_i phi_d(x - C_i; Sigma).  Generation stops
/// once U_i phi_max falls below the current minimum over sites, after which
/// no storm can change any value.  The realizing storm (u, c) is recorded
/// per site for pathwise differentiation.
inline SmithBatch simulate_smith(const core::SmithParams& params,
                                 const std::vector<core::Site>& sites,
                                 const SimConfig& cfg) {
  cfg.validate();
  detail_sim::check_sites(sites);
  const int m = static_cast<int>(sites.size());
  const int d = sites.front().dim();
  if (params.dim() != d)
    throw config_error("simulate_smith: sigma dimension must match site dimension");
  const double tail = smith_tail_bound(params, cfg.truncation_radius);
  if (tail > 1e-12)
    throw config_error("simulate_smith: truncation radius too small for sigma "
                       "(neglected storm mass above 1e-12 of peak)");

  // Axis-aligned bounding box of the sites, inflated by the radius.
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& s : sites)
    for (int k = 0; k < d; ++k) {
      lo[k] = std::min(lo[k], s.coords[k]);
      hi[k] = std::max(hi[k], s.coords[k]);
    }
  double mass = 1.0;
  for (int k = 0; k < d; ++k) {
    lo[k] -= cfg.truncation_radius;
    hi[k] += cfg.truncation_radius;
    mass *= hi[k] - lo[k];
  }

  const double norm = std::pow(2.0 * M_PI, -0.5 * d) / std::sqrt(params.det());
  const double phi_max = norm;
  const Eigen::MatrixXd& si = params.inverse();

  SmithBatch batch(cfg.n_sims, m, d);
  detail::parallel_for(cfg.n_sims, cfg.threads, [&](std::size_t i) {
    gauss::RngStream rng(cfg.seed, i);
    gauss::FrechetArrivals arrivals(rng, mass);
    std::vector<double> z(m, 0.0);
    std::vector<double> zu(m, 0.0);
    std::vector<double> zc(m * d, 0.0);
    std::vector<double> c(d);
    Eigen::VectorXd delta(d);
    while (true) {
      const double u = arrivals.next();
      double zmin = z[0];
      for (int j = 1; j < m; ++j) zmin = std::min(zmin, z[j]);
      if (u * phi_max < zmin) break;  // conservative: arrivals only decrease
      for (int k = 0; k < d; ++k) c[k] = lo[k] + (hi[k] - lo[k]) * rng.uniform();
      for (int j = 0; j < m; ++j) {
        for (int k = 0; k < d; ++k) delta[k] = sites[j].coords[k] - c[k];
        const double q = delta.dot(si * delta);
        const double val = u * norm * std::exp(-0.5 * q);
        if (z[j] > 0.0 &&
            std::fabs(val - z[j]) <= 1e-10 * std::max(val, z[j])) {
          detail_sim::smith_near_tie_counter().fetch_add(
              1, std::memory_order_relaxed);
        }
        if (val > z[j]) {  // exact ties keep the earlier (lower-index) storm
          z[j] = val;
          zu[j] = u;
          for (int k = 0; k < d; ++k) zc[j * d + k] = c[k];
        }
      }
    }
    for (int j = 0; j < m; ++j) {
      batch.value(i, j) = z[j];
      batch.storm_u(i, j) = zu[j];
      for (int k = 0; k < d; ++k) batch.storm_c(i, j, k) = zc[j * d + k];
    }
  });
  return batch;
}

/// Raw-batch CSV dump (sim_id, site_id, value[, storm_u, storm_c1..cd]) for
/// external verification; see the CLI `simulate` subcommand.

/// Number of Smith near-tie events observed since the last reset.
inline std::uint64_t smith_near_tie_count() {
  return detail_sim::smith_near_tie_counter().load(std::memory_order_relaxed);
}

inline void reset_smith_near_tie_count() {
  detail_sim::smith_near_tie_counter().store(0, std::memory_order_relaxed);
}

}  // namespace simulate
}  // namespace maxsens

#endif  // MAXSENS_SIMULATE_HPP
