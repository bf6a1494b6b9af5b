#include "vdrop/specfun.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "vdrop/errors.hpp"

namespace vdrop::specfun {

namespace {

std::atomic<double> g_digamma_perturbation{0.0};

[[noreturn]] void no_convergence(const char* fn, double x, int terms) {
  throw ConvergenceError(std::string(fn) + ": series did not converge for x=" + std::to_string(x) +
                         " within " + std::to_string(terms) + " terms");
}

double stop_threshold(const AccuracySpec& acc, double sum) {
  return std::max(acc.abs_tol, acc.rel_tol * std::abs(sum));
}

}  // namespace

void AccuracySpec::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_terms < 1) {
    throw DomainError("AccuracySpec: abs_tol and rel_tol must be positive and max_terms >= 1");
  }
}

double digamma(double x) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw DomainError("digamma: argument must be finite and positive, got " + std::to_string(x));
  }
  double shift = 0.0;
  while (x < 20.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  // psi(x) ~ log x - 1/(2x) - sum_n B_{2n} / (2n x^{2n})
  const double inv2 = 1.0 / (x * x);
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12))))));
  return shift + std::log(x) - 0.5 / x - series +
         g_digamma_perturbation.load(std::memory_order_relaxed);
}

double dawson(double x, const AccuracySpec& acc) {
  acc.validate();
  if (!std::isfinite(x) || x < 0.0) {
    throw DomainError("dawson: argument must be finite and non-negative, got " + std::to_string(x));
  }
  if (x == 0.0) return 0.0;

  if (x <= kDawsonSwitch) {
    const double x2 = x * x;
    double power = x;  // x^(2n+1) / n!
    double sum = x;
    for (int n = 1; n < acc.max_terms; ++n) {
      power *= x2 / n;
      const double term = power / (2 * n + 1);
      sum += term;
      const double ratio = x2 / (n + 1);
      if (ratio < 1.0 && term * ratio / (1.0 - ratio) <= stop_threshold(acc, sum)) {
        return std::exp(-x2) * sum;
      }
    }
    no_convergence("dawson", x, acc.max_terms);
  }

  // Asymptotic regime: stop at tolerance or at the smallest term.
  const double inv_2x2 = 0.5 / x / x;
  double term = 1.0;
  double sum = 1.0;
  for (int n = 0; n < acc.max_terms; ++n) {
    const double next = term * (2 * n + 1) * inv_2x2;
    if (next >= term) {
      if (term > 1e-12 * sum) no_convergence("dawson (asymptotic)", x, n);
      break;
    }
    term = next;
    sum += term;
    if (term <= stop_threshold(acc, sum)) break;
  }
  return sum * 0.5 / x;
}

double expint_ei(double x, const AccuracySpec& acc) {
  acc.validate();
  if (!std::isfinite(x) || x == 0.0) {
    throw DomainError("expint_ei: argument must be finite and non-zero, got " + std::to_string(x));
  }
  if (std::abs(x) > kExpintMaxAbs) {
    throw RangeError("expint_ei: |x| > 30 is not supported, got " + std::to_string(x));
  }

  if (x > 0.0) {
    // Ei(x) = gamma + log x + e^{x/2} sum_{n>=1} (-1)^{n-1} x^n / (n! 2^{n-1})
    //                                     * sum_{k=0}^{floor((n-1)/2)} 1/(2k+1)
    const double half = 0.5 * x;
    double power = 2.0;  // 2 (x/2)^n / n!, starts at n = 0
    double inner = 0.0;
    double sum = 0.0;
    for (int n = 1; n < acc.max_terms; ++n) {
      power *= half / n;
      if (n % 2 == 1) inner += 1.0 / n;
      const double term = (n % 2 == 1 ? power : -power) * inner;
      sum += term;
      if (n > half && std::abs(term) <= stop_threshold(acc, sum)) {
        return kEulerGamma + std::log(x) + std::exp(half) * sum;
      }
    }
    no_convergence("expint_ei", x, acc.max_terms);
  }

  if (x >= -1.0) {
    double power = 1.0;  // x^k / k!
    double sum = 0.0;
    for (int k = 1; k < acc.max_terms; ++k) {
      power *= x / k;
      const double term = power / k;
      sum += term;
      if (std::abs(term) <= stop_threshold(acc, sum)) {
        return kEulerGamma + std::log(-x) + sum;
      }
    }
    no_convergence("expint_ei", x, acc.max_terms);
  }

  // Modified Lentz evaluation of the E1 continued fraction, z > 1.
  const double z = -x;
  constexpr double kTiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
  double b = z + 1.0;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < acc.max_terms; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double delta = c * d;
    h *= delta;
    if (std::abs(delta - 1.0) <= std::numeric_limits<double>::epsilon()) {
      return -h * std::exp(-z);
    }
  }
  no_convergence("expint_ei (continued fraction)", x, acc.max_terms);
}

namespace testing {

void set_digamma_perturbation(double delta) {
  g_digamma_perturbation.store(delta, std::memory_order_relaxed);
}

double digamma_perturbation() { return g_digamma_perturbation.load(std::memory_order_relaxed); }

}  // namespace testing

}  // namespace vdrop::specfun
