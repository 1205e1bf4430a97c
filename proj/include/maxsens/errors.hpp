// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#ifndef MAXSENS_ERRORS_HPP
#define MAXSENS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace maxsens {

/// Raised when user-supplied parameters or configuration violate a
/// documented precondition (invalid GEV shape, non-positive-definite
/// covariance, malformed config file, ...).  The CLI maps this to exit
/// code 2.
class config_error : public std::invalid_argument {
 public:
  explicit config_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical routine fails on admissible inputs (quadrature
/// non-convergence, Cholesky breakdown on a matrix that passed validation,
/// ...).  The CLI maps this to exit code 3.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace maxsens

#endif  // MAXSENS_ERRORS_HPP
