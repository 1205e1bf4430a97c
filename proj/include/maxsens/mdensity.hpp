// maxsens/mdensity.hpp -- general-M Brown--Resnick (Huesler--Reiss) exponent
// measure, its mixed partial derivatives over index blocks, the exact
// partition-sum density, and a Gibbs sampler over set partitions yielding
// Monte Carlo density and score approximations.
//
// Conventions.  With semivariogram gamma and lambda_ij = sqrt(gamma_ij / 2),
// the exponent measure is
//   V(y) = sum_i y_i^{-1} Phi_{M-1}( ytilde^{(i)}; Omega^{(i)} ),
//   ytilde^{(i)}_j = 2 lambda_ij^2 + log(y_j / y_i),
//   Omega^{(i)}_{jm} = 2 (lambda_ij^2 + lambda_im^2 - lambda_jm^2),
// where Phi_p(.; S) is the centered p-variate normal CDF with covariance S.
// All mixed partials of V are negative; block_derivative returns the positive
// value D_B = -d^{|B|} V / dy_B, and the density is
//   f(y) = exp(-V(y)) * sum_{partitions pi} prod_{B in pi} D_B(y).
//
// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#ifndef MAXSENS_MDENSITY_HPP
#define MAXSENS_MDENSITY_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "maxsens/core.hpp"
#include "maxsens/errors.hpp"
#include "maxsens/gauss.hpp"

namespace maxsens {
namespace mdensity {

/// Dependence structure of an M-site Huesler--Reiss vector.
struct HrStructure {
  /// M x M symmetric matrix, lambda(i,j) = sqrt(gamma(x_i, x_j) / 2).
  Eigen::MatrixXd lambda;
  /// omega[i]: (M-1) x (M-1) covariance of the anchored increments, indices
  /// running over j != i in increasing order.
  std::vector<Eigen::MatrixXd> omega;

  int dim() const { return static_cast<int>(lambda.rows()); }
};

namespace detail_md {

/// Position of index j within the "all sites except anchor" ordering.
inline int anchored_pos(int anchor, int j) { return j < anchor ? j : j - 1; }

inline Eigen::MatrixXd omega_from_lambda(const Eigen::MatrixXd& lambda,
                                         int anchor) {
  const int m = static_cast<int>(lambda.rows());
  Eigen::MatrixXd omega(m - 1, m - 1);
  for (int j = 0; j < m; ++j) {
    if (j == anchor) continue;
    for (int k = 0; k < m; ++k) {
      if (k == anchor) continue;
      const double l_aj = lambda(anchor, j);
      const double l_ak = lambda(anchor, k);
      const double l_jk = lambda(j, k);
      omega(anchored_pos(anchor, j), anchored_pos(anchor, k)) =
          2.0 * (l_aj * l_aj + l_ak * l_ak - l_jk * l_jk);
    }
  }
  return omega;
}

inline HrStructure structure_from_lambda(Eigen::MatrixXd lambda) {
  const int m = static_cast<int>(lambda.rows());
  if (m < 1) {
    throw config_error("mdensity: at least one site is required");
  }
  HrStructure hr;
  hr.lambda = std::move(lambda);
  hr.omega.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    hr.omega.push_back(m > 1 ? omega_from_lambda(hr.lambda, i)
                             : Eigen::MatrixXd(0, 0));
  }
  return hr;
}

}  // namespace detail_md

/// Build the Huesler--Reiss structure of a Brown--Resnick field observed at
/// the given distinct sites.
inline HrStructure make_hr_structure(const core::BrParams& params,
                                     const std::vector<core::Site>& sites) {
  const int m = static_cast<int>(sites.size());
  if (m < 1) {
    throw config_error("make_hr_structure: at least one site is required");
  }
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double gamma = core::semivariogram(params, sites[i], sites[j]);
      if (!(gamma > 0.0)) {
        throw config_error("make_hr_structure: sites must be distinct");
      }
      lambda(i, j) = lambda(j, i) = std::sqrt(0.5 * gamma);
    }
  }
  return detail_md::structure_from_lambda(std::move(lambda));
}

/// Build the structure from a matrix of pairwise distances (entry (i,j) is
/// the Euclidean distance between sites i and j).
inline HrStructure make_hr_structure_from_distances(
    const core::BrParams& params, const Eigen::MatrixXd& distances) {
  const int m = static_cast<int>(distances.rows());
  if (m < 1 || distances.cols() != m) {
    throw config_error(
        "make_hr_structure_from_distances: distance matrix must be square");
  }
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double d = 0.5 * (distances(i, j) + distances(j, i));
      if (!(d > 0.0) || !std::isfinite(d)) {
        throw config_error(
            "make_hr_structure_from_distances: distances must be positive");
      }
      const double gamma = std::pow(d / params.kappa, params.psi);
      lambda(i, j) = lambda(j, i) = std::sqrt(0.5 * gamma);
    }
  }
  return detail_md::structure_from_lambda(std::move(lambda));
}

namespace detail_md {

/// Recover the pairwise distance matrix from a structure built with the
/// power semivariogram gamma(d) = (d/kappa)^psi: d = kappa * gamma^(1/psi).
inline Eigen::MatrixXd distances_from_structure(const HrStructure& hr,
                                                const core::BrParams& params) {
  const int m = hr.dim();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double gamma = 2.0 * hr.lambda(i, j) * hr.lambda(i, j);
      d(i, j) = d(j, i) = params.kappa * std::pow(gamma, 1.0 / params.psi);
    }
  }
  return d;
}

inline void check_observation(const Eigen::VectorXd& y, const HrStructure& hr,
                              const char* who) {
  if (y.size() != hr.dim()) {
    throw config_error(std::string(who) +
                       ": observation dimension does not match structure");
  }
  for (int i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0) || !std::isfinite(y[i])) {
      throw config_error(std::string(who) +
                         ": observations must be positive and finite");
    }
  }
}

}  // namespace detail_md

/// Exponent measure V(y) of the M-variate Huesler--Reiss law.  Requires
/// M <= 6 (limit of the multivariate normal CDF evaluator).
inline double exponent_measure(const Eigen::VectorXd& y,
                               const HrStructure& hr) {
  detail_md::check_observation(y, hr, "exponent_measure");
  const int m = hr.dim();
  if (m > 6) {
    throw config_error("exponent_measure: supports at most 6 sites");
  }
  if (m == 1) return 1.0 / y[0];
  double v = 0.0;
  Eigen::VectorXd upper(m - 1);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      const double lam = hr.lambda(i, j);
      upper[detail_md::anchored_pos(i, j)] =
          2.0 * lam * lam + std::log(y[j] / y[i]);
    }
    v += gauss::mvn_cdf(upper, gauss::CovMatrix(hr.omega[i])) / y[i];
  }
  return v;
}

namespace detail_md {

constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)

/// Log of the positive block derivative D_B = -d^{|B|} V / dy_B, with the
/// block given as a bitmask over sites.  Averages the |B| equivalent
/// anchor decompositions.
inline double log_block_derivative_mask(const Eigen::VectorXd& y,
                                        std::uint32_t mask,
                                        const HrStructure& hr) {
  const int m = hr.dim();
  if (mask == 0 || (mask >> m) != 0) {
    throw config_error("block_derivative: block must be a nonempty subset");
  }
  std::vector<int> block, rest;
  for (int i = 0; i < m; ++i) {
    if (mask & (1u << i)) {
      block.push_back(i);
    } else {
      rest.push_back(i);
    }
  }
  const int p = static_cast<int>(block.size());
  const int q = static_cast<int>(rest.size());
  if (q > 6) {
    throw config_error("block_derivative: supports at most 6 sites");
  }

  double sum_terms = 0.0;
  for (int anchor : block) {
    // Anchored increments over all sites j != anchor, then sliced.
    Eigen::VectorXd ytilde(m - 1);
    for (int j = 0; j < m; ++j) {
      if (j == anchor) continue;
      const double lam = hr.lambda(anchor, j);
      ytilde[anchored_pos(anchor, j)] =
          2.0 * lam * lam + std::log(y[j] / y[anchor]);
    }
    const Eigen::MatrixXd& omega = hr.omega[anchor];

    std::vector<int> bpos, cpos;  // positions within the anchored ordering
    bpos.reserve(static_cast<std::size_t>(p - 1));
    cpos.reserve(static_cast<std::size_t>(q));
    for (int j : block) {
      if (j != anchor) bpos.push_back(anchored_pos(anchor, j));
    }
    for (int j : rest) cpos.push_back(anchored_pos(anchor, j));

    double log_phi = 0.0;  // log of phi_{p-1}(ytilde_B; R_B)
    Eigen::VectorXd rb_solve_yb;
    Eigen::MatrixXd rb_solve_rcb_t;
    if (p > 1) {
      Eigen::MatrixXd rb(p - 1, p - 1);
      Eigen::VectorXd yb(p - 1);
      for (int a = 0; a < p - 1; ++a) {
        yb[a] = ytilde[bpos[static_cast<std::size_t>(a)]];
        for (int b = 0; b < p - 1; ++b) {
          rb(a, b) = omega(bpos[static_cast<std::size_t>(a)],
                           bpos[static_cast<std::size_t>(b)]);
        }
      }
      Eigen::LLT<Eigen::MatrixXd> llt(rb);
      if (llt.info() != Eigen::Success) {
        throw numeric_error("block_derivative: singular within-block matrix");
      }
      double log_det = 0.0;
      const Eigen::MatrixXd l = llt.matrixL();
      for (int a = 0; a < p - 1; ++a) log_det += 2.0 * std::log(l(a, a));
      const Eigen::VectorXd u = l.triangularView<Eigen::Lower>().solve(yb);
      log_phi = -0.5 * (p - 1) * kLogTwoPi - 0.5 * log_det -
                0.5 * u.squaredNorm();
      if (q > 0) {
        Eigen::MatrixXd rcb(q, p - 1);
        for (int a = 0; a < q; ++a) {
          for (int b = 0; b < p - 1; ++b) {
            rcb(a, b) = omega(cpos[static_cast<std::size_t>(a)],
                              bpos[static_cast<std::size_t>(b)]);
          }
        }
        rb_solve_yb = llt.solve(yb);
        rb_solve_rcb_t = llt.solve(rcb.transpose());
        Eigen::MatrixXd pcond(q, q);
        Eigen::VectorXd upper(q);
        for (int a = 0; a < q; ++a) {
          upper[a] = ytilde[cpos[static_cast<std::size_t>(a)]] -
                     rcb.row(a).dot(rb_solve_yb);
          for (int b = 0; b < q; ++b) {
            pcond(a, b) = omega(cpos[static_cast<std::size_t>(a)],
                                cpos[static_cast<std::size_t>(b)]) -
                          rcb.row(a).dot(rb_solve_rcb_t.col(b));
          }
        }
        pcond = 0.5 * (pcond + pcond.transpose()).eval();
        const double cdf = gauss::mvn_cdf(upper, gauss::CovMatrix(pcond));
        sum_terms += std::exp(log_phi) * cdf / y[anchor];
        continue;
      }
      sum_terms += std::exp(log_phi) / y[anchor];
      continue;
    }
    // Singleton block: phi_0 = 1; condition set is all other sites.
    if (q > 0) {
      Eigen::MatrixXd pcond(q, q);
      Eigen::VectorXd upper(q);
      for (int a = 0; a < q; ++a) {
        upper[a] = ytilde[cpos[static_cast<std::size_t>(a)]];
        for (int b = 0; b < q; ++b) {
          pcond(a, b) = omega(cpos[static_cast<std::size_t>(a)],
                              cpos[static_cast<std::size_t>(b)]);
        }
      }
      sum_terms += gauss::mvn_cdf(upper, gauss::CovMatrix(pcond)) / y[anchor];
    } else {
      sum_terms += 1.0 / y[anchor];
    }
  }

  double log_prod_y = 0.0;
  for (int i : block) log_prod_y += std::log(y[i]);
  if (!(sum_terms > 0.0)) {
    throw numeric_error("block_derivative: value underflowed to zero");
  }
  return std::log(sum_terms) - std::log(static_cast<double>(p)) - log_prod_y;
}

}  // namespace detail_md

/// Positive block derivative D_B(y) = -d^{|B|} V / dy_B for the block of
/// (0-based) site indices B.
inline double block_derivative(const Eigen::VectorXd& y,
                               const std::vector<int>& block,
                               const HrStructure& hr) {
  detail_md::check_observation(y, hr, "block_derivative");
  std::uint32_t mask = 0;
  for (int i : block) {
    if (i < 0 || i >= hr.dim()) {
      throw config_error("block_derivative: site index out of range");
    }
    if (mask & (1u << i)) {
      throw config_error("block_derivative: repeated site index in block");
    }
    mask |= 1u << i;
  }
  return std::exp(detail_md::log_block_derivative_mask(y, mask, hr));
}

/// A set partition of sites {0, ..., M-1}.
struct Partition {
  std::vector<int> block_of;             ///< site index -> block id
  std::vector<std::vector<int>> blocks;  ///< block id -> sorted site indices

  int n_sites() const { return static_cast<int>(block_of.size()); }
  int n_blocks() const { return static_cast<int>(blocks.size()); }

  /// All sites in separate singleton blocks.
  static Partition singletons(int m) {
    Partition p;
    p.block_of.resize(static_cast<std::size_t>(m));
    p.blocks.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      p.block_of[static_cast<std::size_t>(i)] = i;
      p.blocks[static_cast<std::size_t>(i)] = {i};
    }
    return p;
  }

  /// Build from a site -> block-id assignment (ids need not be canonical).
  static Partition from_block_of(const std::vector<int>& labels) {
    Partition p;
    p.block_of.resize(labels.size());
    std::vector<int> remap;
    for (std::size_t s = 0; s < labels.size(); ++s) {
      const int raw = labels[s];
      if (raw < 0) throw config_error("Partition: negative block label");
      int id = -1;
      for (std::size_t k = 0; k < remap.size(); ++k) {
        if (remap[k] == raw) {
          id = static_cast<int>(k);
          break;
        }
      }
      if (id < 0) {
        id = static_cast<int>(remap.size());
        remap.push_back(raw);
        p.blocks.emplace_back();
      }
      p.block_of[s] = id;
      p.blocks[static_cast<std::size_t>(id)].push_back(static_cast<int>(s));
    }
    return p;
  }

  /// Canonical restricted-growth labelling (blocks numbered in order of
  /// first appearance); equal labellings identify equal partitions.
  std::vector<int> canonical_labels() const {
    return from_block_of(block_of).block_of;
  }

  void validate() const {
    const int m = n_sites();
    if (m == 0) throw config_error("Partition: empty partition");
    std::vector<int> seen(static_cast<std::size_t>(m), 0);
    for (int b = 0; b < n_blocks(); ++b) {
      const auto& blk = blocks[static_cast<std::size_t>(b)];
      if (blk.empty()) throw config_error("Partition: empty block");
      for (int s : blk) {
        if (s < 0 || s >= m || seen[static_cast<std::size_t>(s)]++) {
          throw config_error("Partition: blocks do not partition the sites");
        }
        if (block_of[static_cast<std::size_t>(s)] != b) {
          throw config_error("Partition: block_of inconsistent with blocks");
        }
      }
    }
    for (int s = 0; s < m; ++s) {
      if (!seen[static_cast<std::size_t>(s)]) {
        throw config_error("Partition: blocks do not partition the sites");
      }
    }
  }
};

/// Bell number B_m (number of set partitions of m elements).
inline double bell_number(int m) {
  if (m < 0) throw config_error("bell_number: m must be nonnegative");
  // Bell triangle; exact in double precision for every m this library
  // accepts (far below 2^53).
  std::vector<double> row = {1.0};
  for (int i = 1; i <= m; ++i) {
    std::vector<double> next(static_cast<std::size_t>(i) + 1);
    next[0] = row.back();
    for (std::size_t j = 1; j < next.size(); ++j) {
      next[j] = next[j - 1] + row[j - 1];
    }
    row = std::move(next);
  }
  return row[0];
}

/// Enumerate all set partitions of {0, ..., m-1} via restricted growth
/// strings, in lexicographic label order.
inline std::vector<Partition> all_partitions(int m) {
  if (m < 1 || m > 12) {
    throw config_error("all_partitions: m must be between 1 and 12");
  }
  std::vector<Partition> out;
  std::vector<int> labels(static_cast<std::size_t>(m), 0);
  std::vector<int> maxes(static_cast<std::size_t>(m), 0);
  while (true) {
    out.push_back(Partition::from_block_of(labels));
    int i = m - 1;
    while (i > 0) {
      if (labels[static_cast<std::size_t>(i)] <=
          maxes[static_cast<std::size_t>(i - 1)]) {
        break;
      }
      --i;
    }
    if (i == 0) break;
    ++labels[static_cast<std::size_t>(i)];
    maxes[static_cast<std::size_t>(i)] =
        std::max(maxes[static_cast<std::size_t>(i - 1)],
                 labels[static_cast<std::size_t>(i)]);
    for (int j = i + 1; j < m; ++j) {
      labels[static_cast<std::size_t>(j)] = 0;
      maxes[static_cast<std::size_t>(j)] = maxes[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

namespace detail_md {

/// Lazily memoized log block derivatives over subsets (bitmask-keyed) of one
/// observation under one dependence structure.
class BlockCache {
 public:
  BlockCache(const Eigen::VectorXd& y, const HrStructure& hr)
      : y_(&y),
        hr_(&hr),
        values_(std::size_t{1} << hr.dim(),
                std::numeric_limits<double>::quiet_NaN()) {}

  double log_d(std::uint32_t mask) {
    double& slot = values_[mask];
    if (std::isnan(slot)) {
      slot = log_block_derivative_mask(*y_, mask, *hr_);
    }
    return slot;
  }

  double log_d(const std::vector<int>& block) {
    std::uint32_t mask = 0;
    for (int i : block) mask |= 1u << i;
    return log_d(mask);
  }

 private:
  const Eigen::VectorXd* y_;
  const HrStructure* hr_;
  std::vector<double> values_;
};

inline std::uint32_t mask_of(const std::vector<int>& block) {
  std::uint32_t mask = 0;
  for (int i : block) mask |= 1u << i;
  return mask;
}

/// Resample the block assignment of `site` from its full conditional under
/// g(pi | y) proportional to prod_B D_B.
inline void conditional_update(Partition& part, int site,
                               const Eigen::VectorXd& y, BlockCache& cache,
                               gauss::RngStream& rng) {
  const int m = part.n_sites();
  // Remove the site from its current block.
  const int old_block = part.block_of[static_cast<std::size_t>(site)];
  {
    auto& blk = part.blocks[static_cast<std::size_t>(old_block)];
    blk.erase(std::find(blk.begin(), blk.end(), site));
    if (blk.empty()) {
      part.blocks.erase(part.blocks.begin() + old_block);
      for (int s = 0; s < m; ++s) {
        if (part.block_of[static_cast<std::size_t>(s)] > old_block) {
          --part.block_of[static_cast<std::size_t>(s)];
        }
      }
    }
  }
  const int k = part.n_blocks();
  // Candidate log-weights: join block b (ratio of block derivatives) or
  // open a new singleton.
  std::vector<double> logw(static_cast<std::size_t>(k) + 1);
  const std::uint32_t site_bit = 1u << site;
  for (int b = 0; b < k; ++b) {
    const std::uint32_t mb = mask_of(part.blocks[static_cast<std::size_t>(b)]);
    logw[static_cast<std::size_t>(b)] =
        cache.log_d(mb | site_bit) - cache.log_d(mb);
  }
  logw[static_cast<std::size_t>(k)] = cache.log_d(site_bit);

  double max_lw = logw[0];
  for (double lw : logw) max_lw = std::max(max_lw, lw);
  if (!std::isfinite(max_lw)) {
    throw numeric_error("gibbs_partition_step: degenerate conditional");
  }
  double total = 0.0;
  std::vector<double> w(logw.size());
  for (std::size_t i = 0; i < logw.size(); ++i) {
    w[i] = std::exp(logw[i] - max_lw);
    total += w[i];
  }
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int choice = k;  // fall through to the new-singleton option
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u <= acc) {
      choice = static_cast<int>(i);
      break;
    }
  }
  if (choice == k) {
    part.blocks.emplace_back(1, site);
    part.block_of[static_cast<std::size_t>(site)] = k;
  } else {
    auto& blk = part.blocks[static_cast<std::size_t>(choice)];
    blk.insert(std::upper_bound(blk.begin(), blk.end(), site), site);
    part.block_of[static_cast<std::size_t>(site)] = choice;
  }
}

}  // namespace detail_md

/// One random-scan Gibbs update: pick a site uniformly at random and resample
/// its block assignment from the full conditional of g(pi | y).  The kernel
/// is reversible with stationary law g(pi | y) prop. to prod_B D_B(y).
inline Partition gibbs_partition_step(const Partition& current,
                                      const Eigen::VectorXd& y,
                                      const HrStructure& hr,
                                      gauss::RngStream& rng) {
  current.validate();
  detail_md::check_observation(y, hr, "gibbs_partition_step");
  if (current.n_sites() != hr.dim()) {
    throw config_error("gibbs_partition_step: partition/structure mismatch");
  }
  Partition next = current;
  const int m = next.n_sites();
  if (m == 1) return next;  // single partition; fixed point
  const int site =
      std::min(m - 1, static_cast<int>(rng.uniform() * static_cast<double>(m)));
  detail_md::BlockCache cache(y, hr);
  detail_md::conditional_update(next, site, y, cache, rng);
  return next;
}

/// One systematic sweep (sites 0..M-1 in order) of single-site conditional
/// updates, sharing `cache` across steps.  Used by mc_density_and_score.
inline void gibbs_sweep(Partition& part, const Eigen::VectorXd& y,
                        detail_md::BlockCache& cache, gauss::RngStream& rng) {
  for (int s = 0; s < part.n_sites(); ++s) {
    detail_md::conditional_update(part, s, y, cache, rng);
  }
}

/// Exact M-variate density by full enumeration of set partitions
/// (Faa di Bruno).  Requires M <= 5 (Bell(5) = 52 partitions).
inline double density_faa_di_bruno(const Eigen::VectorXd& y,
                                   const HrStructure& hr) {
  detail_md::check_observation(y, hr, "density_faa_di_bruno");
  const int m = hr.dim();
  if (m > 5) {
    throw config_error(
        "density_faa_di_bruno: exact enumeration supports at most 5 sites");
  }
  const double v = exponent_measure(y, hr);
  detail_md::BlockCache cache(y, hr);
  double total = 0.0;
  for (const Partition& part : all_partitions(m)) {
    double log_prod = 0.0;
    for (const auto& block : part.blocks) {
      log_prod += cache.log_d(detail_md::mask_of(block));
    }
    total += std::exp(log_prod);
  }
  return std::exp(-v) * total;
}

/// Monte Carlo density and score approximation at one observation.
struct McDensityScore {
  double density = 0.0;     ///< harmonic-mean density estimate
  double density_se = 0.0;  ///< delta-method Monte Carlo standard error
  double d_psi = 0.0;       ///< estimated d log f / d psi
  double d_psi_se = 0.0;
  double d_kappa = 0.0;  ///< estimated d log f / d kappa
  double d_kappa_se = 0.0;
  std::size_t n_samples = 0;  ///< retained Gibbs sweeps
};

/// Gibbs-sampler approximation of the density and of the score in
/// (psi, kappa).  `hr` must have been built from `params` with the power
/// semivariogram (pairwise distances are recovered from the structure).
///
/// The chain starts from the all-singletons partition, discards 10*M
/// systematic sweeps as burn-in, then retains one partition sample per sweep
/// for n_gibbs sweeps.  With T(pi) = prod_B D_B and Z = sum_pi T(pi):
///   f(y)        = exp(-V) Z,       and E_g[1/T] = Bell(M)/Z,
/// so the density estimate is exp(-V) * Bell(M) / mean(1/T).  The score uses
///   d log f/d theta = -dV/dtheta + E_g[ sum_B d log D_B/d theta ],
/// with theta-derivatives computed by central finite differences of step
/// 1e-5*|theta| on (psi, kappa).
inline McDensityScore mc_density_and_score(const Eigen::VectorXd& y,
                                           const HrStructure& hr,
                                           const core::BrParams& params,
                                           std::size_t n_gibbs,
                                           gauss::RngStream& rng) {
  detail_md::check_observation(y, hr, "mc_density_and_score");
  const int m = hr.dim();
  if (m > 6) {
    throw config_error("mc_density_and_score: supports at most 6 sites");
  }
  if (n_gibbs == 0) {
    throw config_error("mc_density_and_score: n_gibbs must be positive");
  }

  // Dependence structures at the four perturbed parameter points.
  const Eigen::MatrixXd dist = detail_md::distances_from_structure(hr, params);
  const double step_psi = 1e-5 * std::fabs(params.psi);
  const double step_kappa = 1e-5 * std::fabs(params.kappa);
  const core::BrParams psi_hi{params.kappa, params.psi + step_psi};
  const core::BrParams psi_lo{params.kappa, params.psi - step_psi};
  const core::BrParams kap_hi{params.kappa + step_kappa, params.psi};
  const core::BrParams kap_lo{params.kappa - step_kappa, params.psi};
  const HrStructure hr_psi_hi = make_hr_structure_from_distances(psi_hi, dist);
  const HrStructure hr_psi_lo = make_hr_structure_from_distances(psi_lo, dist);
  const HrStructure hr_kap_hi = make_hr_structure_from_distances(kap_hi, dist);
  const HrStructure hr_kap_lo = make_hr_structure_from_distances(kap_lo, dist);

  detail_md::BlockCache cache(y, hr);
  detail_md::BlockCache cache_psi_hi(y, hr_psi_hi);
  detail_md::BlockCache cache_psi_lo(y, hr_psi_lo);
  detail_md::BlockCache cache_kap_hi(y, hr_kap_hi);
  detail_md::BlockCache cache_kap_lo(y, hr_kap_lo);

  Partition part = Partition::singletons(m);
  const std::size_t burn_in = 10 * static_cast<std::size_t>(m);
  for (std::size_t sweep = 0; sweep < burn_in; ++sweep) {
    gibbs_sweep(part, y, cache, rng);
  }

  std::vector<double> neg_log_t(n_gibbs);
  std::vector<double> s_psi(n_gibbs), s_kappa(n_gibbs);
  for (std::size_t t = 0; t < n_gibbs; ++t) {
    gibbs_sweep(part, y, cache, rng);
    double log_t = 0.0, d_psi = 0.0, d_kappa = 0.0;
    for (const auto& block : part.blocks) {
      const std::uint32_t mask = detail_md::mask_of(block);
      log_t += cache.log_d(mask);
      d_psi += (cache_psi_hi.log_d(mask) - cache_psi_lo.log_d(mask)) /
               (2.0 * step_psi);
      d_kappa += (cache_kap_hi.log_d(mask) - cache_kap_lo.log_d(mask)) /
                 (2.0 * step_kappa);
    }
    neg_log_t[t] = -log_t;
    s_psi[t] = d_psi;
    s_kappa[t] = d_kappa;
  }

  const auto mean_sd = [](const std::vector<double>& x) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd =
        n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    return std::pair<double, double>(mean, sd);
  };

  // Harmonic-mean normalizing constant, computed with a stabilizing shift.
  double shift = neg_log_t[0];
  for (double v : neg_log_t) shift = std::max(shift, v);
  std::vector<double> u(n_gibbs);
  for (std::size_t t = 0; t < n_gibbs; ++t) {
    u[t] = std::exp(neg_log_t[t] - shift);
  }
  const auto [u_mean, u_sd] = mean_sd(u);
  if (!(u_mean > 0.0)) {
    throw numeric_error("mc_density_and_score: harmonic mean underflow");
  }
  const double v_exp = exponent_measure(y, hr);
  const double log_density = -v_exp + std::log(bell_number(m)) - shift -
                             std::log(u_mean);

  McDensityScore out;
  out.n_samples = n_gibbs;
  out.density = std::exp(log_density);
  out.density_se = out.density * u_sd /
                   (u_mean * std::sqrt(static_cast<double>(n_gibbs)));

  const double dv_psi =
      (exponent_measure(y, hr_psi_hi) - exponent_measure(y, hr_psi_lo)) /
      (2.0 * step_psi);
  const double dv_kappa =
      (exponent_measure(y, hr_kap_hi) - exponent_measure(y, hr_kap_lo)) /
      (2.0 * step_kappa);
  const auto [psi_mean, psi_sd] = mean_sd(s_psi);
  const auto [kap_mean, kap_sd] = mean_sd(s_kappa);
  out.d_psi = -dv_psi + psi_mean;
  out.d_psi_se = psi_sd / std::sqrt(static_cast<double>(n_gibbs));
  out.d_kappa = -dv_kappa + kap_mean;
  out.d_kappa_se = kap_sd / std::sqrt(static_cast<double>(n_gibbs));
  return out;
}

/// Overload with the cited default chain length n_gibbs = 10*M.
inline McDensityScore mc_density_and_score(const Eigen::VectorXd& y,
                                           const HrStructure& hr,
                                           const core::BrParams& params,
                                           gauss::RngStream& rng) {
  return mc_density_and_score(
      y, hr, params, 10 * static_cast<std::size_t>(hr.dim()), rng);
}

}  // namespace mdensity
}  // namespace maxsens

#endif  // MAXSENS_MDENSITY_HPP
