#pragma once

#include <functional>

namespace vdrop::quad {

struct QuadratureResult {
  double value = 0.0;
  double abs_err = 0.0;  // sum of per-interval |Kronrod - Gauss| estimates
  int intervals = 0;
};

/// Globally adaptive 7/15-point Gauss-Kronrod integration of f over [a, b].
///
/// The interval with the largest error estimate is bisected until the total
/// estimate drops below max(abs_tol, rel_tol * |value|). Throws
/// QuadratureError when max_intervals is exhausted first.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double rel_tol = 1e-9, double abs_tol = 0.0, int max_intervals = 4000);

}  // namespace vdrop::quad
