#include "vdrop/kl_core.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "vdrop/errors.hpp"
#include "vdrop/specfun.hpp"

namespace vdrop::kl {

namespace {

using specfun::digamma;

const double kLogTwo = std::numbers::ln2;
const double kHalfLog2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
}

void check_u(double u, const char* fn) {
  if (!std::isfinite(u) || u < 0.0) {
    throw DomainError(std::string(fn) + ": u must be finite and >= 0, got " + std::to_string(u));
  }
}

[[noreturn]] void no_convergence(double rate, int terms) {
  throw ConvergenceError("poisson_digamma_mean: rate=" + std::to_string(rate) +
                         " did not converge within " + std::to_string(terms) + " terms");
}

// Bound on sum_{j>=1} w r^j (|psi| + j/step) for a geometric tail with ratio r.
double upper_tail_bound(double w, double r, double abs_psi, double step) {
  const double q = 1.0 - r;
  return w * (abs_psi * r / q + r / (q * q * step));
}

// Forward summation from k = 0; valid while e^{-rate} does not underflow.
double forward_sum(double rate, double offset, const SeriesConfig& cfg) {
  double p = std::exp(-rate);
  double psi = digamma(offset);
  double sum = p * psi;
  for (int k = 1; k < cfg.max_terms; ++k) {
    p *= rate / k;
    psi += 1.0 / (offset + k - 1);
    sum += p * psi;
    const double r = rate / (k + 1);
    if (r < 1.0 && upper_tail_bound(p, r, std::abs(psi), offset + k) <= cfg.tol) {
      return sum;
    }
  }
  no_convergence(rate, cfg.max_terms);
}

// Outward summation from k0 = floor(rate) with weights relative to the mode.
// Normalising by the accumulated weight removes the common e^{-rate} rate^k0/k0!
// factor, which would otherwise underflow or lose precision through lgamma.
double centered_sum(double rate, double offset, const SeriesConfig& cfg) {
  const double k0 = std::floor(rate);
  const double psi0 = digamma(offset + k0);
  const double psi_min = digamma(offset);

  double weight = 1.0;
  double weighted = psi0;
  int terms = 1;

  double w = 1.0;
  double psi = psi0;
  for (double k = k0 + 1;; k += 1.0) {
    w *= rate / k;
    psi += 1.0 / (offset + k - 1);
    weight += w;
    weighted += w * psi;
    if (++terms >= cfg.max_terms) no_convergence(rate, cfg.max_terms);
    const double r = rate / (k + 1);
    if (upper_tail_bound(w, r, std::abs(psi), offset + k) <= cfg.tol * weight) break;
  }

  w = 1.0;
  psi = psi0;
  for (double k = k0; k > 0; k -= 1.0) {
    w *= k / rate;
    psi -= 1.0 / (offset + k - 1);
    weight += w;
    weighted += w * psi;
    if (++terms >= cfg.max_terms) no_convergence(rate, cfg.max_terms);
    const double r = (k - 1) / rate;
    const double max_abs_psi = std::max(std::abs(psi_min), std::abs(psi));
    if (w * max_abs_psi * r / (1.0 - r) <= cfg.tol * weight) break;
  }
  return weighted / weight;
}

}  // namespace

MeanVarParams::MeanVarParams(double mu, double sigma2) : mu_(mu), sigma2_(sigma2) {
  require_finite(mu, "mu");
  require_finite(sigma2, "sigma2");
  if (!(sigma2 > 0.0)) throw DomainError("sigma2 must be > 0");
}

MultiplicativeParams::MultiplicativeParams(double theta, double alpha) : theta_(theta), alpha_(alpha) {
  require_finite(theta, "theta");
  require_finite(alpha, "alpha");
  if (!(alpha > 0.0)) throw DomainError("alpha must be > 0");
}

AdditiveParams::AdditiveParams(double theta, double log_sigma)
    : theta_(theta), log_sigma_(log_sigma) {
  require_finite(theta, "theta");
  require_finite(log_sigma, "log_sigma");
}

double AdditiveParams::sigma2() const { return std::exp(2.0 * log_sigma_); }

PriorConstant::PriorConstant(double c) : c_(c) {
  if (!std::isfinite(c) || !(c > 0.0)) throw DomainError("prior constant C must be finite and > 0");
}

void SeriesConfig::validate() const {
  if (!(tol > 0.0) || !(switch_u > 0.0) || max_terms < 1) {
    throw DomainError("SeriesConfig: tol and switch_u must be positive and max_terms >= 1");
  }
}

double poisson_digamma_mean(double rate, double offset, const SeriesConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(rate) || rate < 0.0) throw DomainError("poisson rate must be finite and >= 0");
  if (rate == 0.0) return digamma(offset);  // 0^0 := 1, 0^k := 0
  if (rate <= cfg.switch_u) return forward_sum(rate, offset, cfg);
  return centered_sum(rate, offset, cfg);
}

double reduced_u(const MeanVarParams& params) {
  return params.mu() * params.mu() / (2.0 * params.sigma2());
}

double kl_value(double u, PriorConstant prior, const SeriesConfig& cfg) {
  check_u(u, "kl_value");
  if (u > kMaxU) throw RangeError("kl_value: u > 1e8 is not supported, got " + std::to_string(u));
  const double series = poisson_digamma_mean(u, 0.5, cfg);
  return -kHalfLog2PiE - std::log(prior.c()) + 0.5 * (kLogTwo + series);
}

double kl_grad_u(double u) {
  check_u(u, "kl_grad_u");
  if (u == 0.0) return 1.0;
  if (u <= 1.0) {
    // e^{-u} sum_k u^k / (k! (2k + 1)); avoids the 0/0 of D+(sqrt u)/sqrt u.
    double p = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
      p *= u / k;
      const double term = p / (2 * k + 1);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return std::exp(-u) * sum;
  }
  const double root = std::sqrt(u);
  return specfun::dawson(root) / root;
}

MeanVarGrad kl_grad_mean_var(const MeanVarParams& params) {
  const double g = kl_grad_u(reduced_u(params));
  const double mu = params.mu();
  const double s2 = params.sigma2();
  return {g * (mu / s2), g * (-mu * mu / (2.0 * s2 * s2))};
}

MultiplicativeKl kl_multiplicative(const MultiplicativeParams& params, PriorConstant prior,
                                   const SeriesConfig& cfg) {
  const double alpha = params.alpha();
  MultiplicativeKl out;
  out.kl.u = 1.0 / alpha;
  out.kl.value = kl_value(out.kl.u, prior, cfg);
  out.kl.grad_u = kl_grad_u(out.kl.u);
  out.dalpha = -out.kl.grad_u / (alpha * alpha);
  out.dtheta = 0.0;
  return out;
}

AdditiveKl kl_additive(const AdditiveParams& params, PriorConstant prior, const SeriesConfig& cfg) {
  const double theta = params.theta();
  const double s2 = params.sigma2();
  AdditiveKl out;
  out.kl.u = theta * theta / (2.0 * s2);
  out.kl.value = kl_value(out.kl.u, prior, cfg);
  out.kl.grad_u = kl_grad_u(out.kl.u);
  out.dtheta = out.kl.grad_u * theta / s2;
  out.dlog_sigma = -2.0 * out.kl.u * out.kl.grad_u;
  return out;
}

double kl_series_oracle(double u, PriorConstant prior, int terms) {
  check_u(u, "kl_series_oracle");
  if (u > kSeriesOracleMaxU) {
    throw RangeError("kl_series_oracle: naive summation only supports u <= 30");
  }
  if (terms < 1) throw DomainError("kl_series_oracle: terms must be >= 1");
  double sum = std::exp(-u) * digamma(0.5);
  if (u > 0.0) {
    const double log_u = std::log(u);
    for (int k = 1; k < terms; ++k) {
      const double weight = std::exp(-u + k * log_u - std::lgamma(k + 1.0));
      sum += weight * digamma(k + 0.5);
    }
  }
  return -kHalfLog2PiE - std::log(prior.c()) + 0.5 * (kLogTwo + sum);
}

McEstimate kl_mc_oracle(const MeanVarParams& params, PriorConstant prior, std::int64_t n,
                        std::uint64_t seed) {
  if (n < 1000) throw DomainError("kl_mc_oracle: n must be >= 1000");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma = std::sqrt(params.sigma2());
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * params.sigma2());
  const double log_c = std::log(prior.c());

  double mean = 0.0;
  double m2 = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double z = 0.0;
    double w = 0.0;
    do {
      z = normal(rng);
      w = params.mu() + sigma * z;
    } while (w == 0.0);
    const double log_q = log_norm - 0.5 * z * z;
    const double log_p = log_c - std::log(std::abs(w));
    const double x = log_q - log_p;
    const double delta = x - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (x - mean);
  }
  const double var = m2 / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

double logchisq_mean(double lambda, int nu, const SeriesConfig& cfg) {
  if (!std::isfinite(lambda) || lambda < 0.0) throw DomainError("logchisq_mean: lambda must be >= 0");
  if (nu < 1) throw DomainError("logchisq_mean: nu must be >= 1");
  return poisson_digamma_mean(0.5 * lambda, 0.5 * nu, cfg) + kLogTwo;
}

IdentityResiduals verify_series_identities(double u) {
  if (!std::isfinite(u) || !(u > 0.0) || u > kSeriesOracleMaxU) {
    throw DomainError("verify_series_identities: u must lie in (0, 30]");
  }
  constexpr int kMaxTerms = 10000;
  double p = 1.0;
  double harmonic = 0.0;
  double lhs_h = 0.0;
  double lhs_e = 0.0;
  bool converged = false;
  for (int k = 1; k < kMaxTerms; ++k) {
    p *= u / k;
    harmonic += 1.0 / k;
    const double th = p * harmonic;
    const double te = p / k;
    lhs_h += th;
    lhs_e += te;
    if (k > u && th <= 1e-17 * lhs_h && te <= 1e-17 * lhs_e) {
      converged = true;
      break;
    }
  }
  if (!converged) throw ConvergenceError("verify_series_identities: truncation did not converge");

  const double gamma = specfun::kEulerGamma;
  const double rhs_h = std::exp(u) * (gamma + std::log(u) - specfun::expint_ei(-u));
  const double rhs_e = specfun::expint_ei(u) - gamma - std::log(u);
  return {std::abs(lhs_h - rhs_h) / std::max(1.0, std::abs(rhs_h)),
          std::abs(lhs_e - rhs_e) / std::max(1.0, std::abs(rhs_e))};
}

}  // namespace vdrop::kl
