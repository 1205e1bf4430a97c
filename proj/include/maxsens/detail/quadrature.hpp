// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#ifndef MAXSENS_DETAIL_QUADRATURE_HPP
#define MAXSENS_DETAIL_QUADRATURE_HPP

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "maxsens/errors.hpp"

namespace maxsens {
namespace detail {

/// GSL aborts on error by default; disable that once, process-wide, and rely
/// on status codes instead.
inline void disable_gsl_abort() {
  static const bool done = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)done;
}

template <typename F>
double gsl_trampoline(double x, void* params) {
  return (*static_cast<F*>(params))(x);
}

struct quad_result {
  double value;
  double abs_error;
};

class quad_workspace {
 public:
  explicit quad_workspace(std::size_t limit)
      : limit_(limit), ws_(gsl_integration_workspace_alloc(limit)) {
    if (ws_ == nullptr) throw numeric_error("quadrature: workspace allocation failed");
  }
  ~quad_workspace() { gsl_integration_workspace_free(ws_); }
  quad_workspace(const quad_workspace&) = delete;
  quad_workspace& operator=(const quad_workspace&) = delete;
  gsl_integration_workspace* get() const { return ws_; }
  std::size_t limit() const { return limit_; }

 private:
  std::size_t limit_;
  gsl_integration_workspace* ws_;
};

inline void check_quad_status(int status, const quad_result& r, double epsabs,
                              double epsrel, const char* where) {
  if (status == GSL_SUCCESS) return;
  // Tolerate benign round-off reports when the achieved error is already
  // within an order of magnitude of the request; anything else is a genuine
  // non-convergence.
  const double budget = std::max(epsabs, epsrel * std::abs(r.value)) * 10.0;
  if (status == GSL_EROUND && r.abs_error <= budget) return;
  throw numeric_error(std::string(where) + ": quadrature did not converge (" +
                      gsl_strerror(status) + ")");
}

/// Adaptive Gauss-Kronrod integration of f over the finite interval [a, b].
template <typename F>
quad_result integrate_qag(F f, double a, double b, double epsabs, double epsrel,
                          std::size_t limit = 400) {
  disable_gsl_abort();
  quad_workspace ws(limit);
  gsl_function gf;
  gf.function = &gsl_trampoline<F>;
  gf.params = &f;
  quad_result r{0.0, 0.0};
  const int status = gsl_integration_qag(&gf, a, b, epsabs, epsrel,
                                         static_cast<int>(limit), GSL_INTEG_GAUSS21,
                                         ws.get(), &r.value, &r.abs_error);
  check_quad_status(status, r, epsabs, epsrel, "integrate_qag");
  return r;
}

/// Adaptive integration with extrapolation (QAGS) of f over [a, b]; robust
/// to integrable endpoint singularities.
template <typename F>
quad_result integrate_qags(F f, double a, double b, double epsabs, double epsrel,
                           std::size_t limit = 400) {
  disable_gsl_abort();
  quad_workspace ws(limit);
  gsl_function gf;
  gf.function = &gsl_trampoline<F>;
  gf.params = &f;
  quad_result r{0.0, 0.0};
  const int status = gsl_integration_qags(&gf, a, b, epsabs, epsrel, limit,
                                          ws.get(), &r.value, &r.abs_error);
  check_quad_status(status, r, epsabs, epsrel, "integrate_qags");
  return r;
}

/// Adaptive Gauss-Kronrod integration of f over (-inf, b].
template <typename F>
quad_result integrate_qagil(F f, double b, double epsabs, double epsrel,
                            std::size_t limit = 400) {
  disable_gsl_abort();
  quad_workspace ws(limit);
  gsl_function gf;
  gf.function = &gsl_trampoline<F>;
  gf.params = &f;
  quad_result r{0.0, 0.0};
  const int status = gsl_integration_qagil(&gf, b, epsabs, epsrel, limit, ws.get(),
                                           &r.value, &r.abs_error);
  check_quad_status(status, r, epsabs, epsrel, "integrate_qagil");
  return r;
}

}  // namespace detail
}  // namespace maxsens

#endif  // MAXSENS_DETAIL_QUADRATURE_HPP
