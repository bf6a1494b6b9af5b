#pragma once

// Scalar special functions used by the KL evaluation and its oracles.
//
// All series are truncated with a term-ratio test and a hard term cap; a
// series that cannot meet its tolerance within the cap raises
// ConvergenceError instead of returning a partial sum.

namespace vdrop::specfun {

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

struct AccuracySpec {
  double abs_tol = 1e-300;
  double rel_tol = 1e-17;
  int max_terms = 10000;

  // Throws DomainError when any field violates its invariant.
  void validate() const;
};

/// Digamma function psi(x) for x > 0.
///
/// Shifts the argument up to x >= 20 with psi(x+1) = psi(x) + 1/x and then
/// applies the asymptotic expansion with Bernoulli coefficients. Relative
/// error is below 1e-12 away from the positive root near 1.4616.
double digamma(double x);

/// Dawson integral D+(x) = exp(-x^2) * int_0^x exp(t^2) dt for x >= 0.
///
/// Below kDawsonSwitch the positive series exp(-x^2) sum x^(2n+1)/(n!(2n+1))
/// is used; above it the asymptotic expansion 1/(2x) sum (2n-1)!!/(2x^2)^n
/// truncated at its smallest term.
double dawson(double x, const AccuracySpec& acc = {});

inline constexpr double kDawsonSwitch = 6.0;

/// Exponential integral Ei(x) for 0 < |x| <= 30.
///
/// x > 0 uses Ramanujan's exponentially weighted series, x in [-1, 0) the
/// power series gamma + log|x| + sum x^k/(k k!), and x < -1 the continued
/// fraction for E1(-x) = -Ei(x).
double expint_ei(double x, const AccuracySpec& acc = {});

inline constexpr double kExpintMaxAbs = 30.0;

namespace testing {

// Adds `delta` to every digamma result. Used only by fault-injection tests of
// the verification suite; defaults to zero.
void set_digamma_perturbation(double delta);
double digamma_perturbation();

}  // namespace testing

}  // namespace vdrop::specfun
