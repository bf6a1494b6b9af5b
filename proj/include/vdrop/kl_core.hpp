#pragma once

// Exact KL divergence between a Gaussian N(mu, sigma^2) and the improper
// log-uniform density C/|w|, together with its gradient and two independent
// reference evaluations.
//
// The KL depends on the Gaussian only through the reduced parameter
// u = mu^2 / (2 sigma^2):
//
//   KL(u) = -1/2 log(2 pi e) - log C + 1/2 (log 2 + e^{-u} sum_k u^k/k! psi(1/2 + k))
//   dKL/du = D+(sqrt u) / sqrt u   (1 at u = 0)
//
// with 0^0 := 1 at u = 0. KL is strictly increasing in u, so its unique
// minimum sits at u = 0. C shifts the value by -log C and never enters any
// gradient.

#include <cstdint>

namespace vdrop::kl {

/// Largest reduced parameter accepted by kl_value.
inline constexpr double kMaxU = 1e8;

class MeanVarParams {
 public:
  MeanVarParams(double mu, double sigma2);

  double mu() const { return mu_; }
  double sigma2() const { return sigma2_; }

 private:
  double mu_;
  double sigma2_;
};

// q(w) = N(theta, alpha theta^2), i.e. theta scaled by noise ~ N(1, alpha).
class MultiplicativeParams {
 public:
  MultiplicativeParams(double theta, double alpha);

  double theta() const { return theta_; }
  double alpha() const { return alpha_; }

 private:
  double theta_;
  double alpha_;
};

// q(w) = N(theta, exp(2 log_sigma)).
class AdditiveParams {
 public:
  AdditiveParams(double theta, double log_sigma);

  double theta() const { return theta_; }
  double log_sigma() const { return log_sigma_; }
  double sigma2() const;

 private:
  double theta_;
  double log_sigma_;
};

class PriorConstant {
 public:
  PriorConstant() = default;
  explicit PriorConstant(double c);

  double c() const { return c_; }

 private:
  double c_ = 1.0;
};

struct SeriesConfig {
  double tol = 1e-12;       // absolute truncation bound on the series
  int max_terms = 200000;   // covers u up to kMaxU with margin
  double switch_u = 25.0;   // above this the series is summed outward from floor(u)

  void validate() const;
};

struct KlEvaluation {
  double u = 0.0;
  double value = 0.0;
  double grad_u = 0.0;
};

struct MeanVarGrad {
  double dmu = 0.0;
  double dsigma2 = 0.0;
};

struct MultiplicativeKl {
  KlEvaluation kl;
  double dalpha = 0.0;
  double dtheta = 0.0;  // identically zero
};

struct AdditiveKl {
  KlEvaluation kl;
  double dtheta = 0.0;
  double dlog_sigma = 0.0;
};

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

struct IdentityResiduals {
  // sum_{k>=1} u^k H_k / k!  vs  e^u (gamma + log u - Ei(-u))
  double harmonic = 0.0;
  // sum_{k>=1} u^k / (k! k)  vs  Ei(u) - gamma - log u
  double ei_series = 0.0;
};

/// Poisson-weighted digamma mean sum_k e^{-rate} rate^k / k! psi(offset + k).
///
/// This is E[psi(offset + K)] for K ~ Poisson(rate), the common core of the
/// KL series and the log-chi-squared mean.
double poisson_digamma_mean(double rate, double offset, const SeriesConfig& cfg = {});

double reduced_u(const MeanVarParams& params);

double kl_value(double u, PriorConstant prior = {}, const SeriesConfig& cfg = {});

double kl_grad_u(double u);

MeanVarGrad kl_grad_mean_var(const MeanVarParams& params);

// Never reads theta: the KL of the multiplicative family depends on alpha alone.
MultiplicativeKl kl_multiplicative(const MultiplicativeParams& params, PriorConstant prior = {},
                                   const SeriesConfig& cfg = {});

AdditiveKl kl_additive(const AdditiveParams& params, PriorConstant prior = {},
                       const SeriesConfig& cfg = {});

/// Naive fixed-term summation of the KL series, for u <= 30 only.
///
/// Each term is formed independently from lgamma and digamma with no
/// recurrences and no regime switch, so it shares nothing with kl_value beyond
/// the digamma primitive.
double kl_series_oracle(double u, PriorConstant prior, int terms);

inline constexpr double kSeriesOracleMaxU = 30.0;

/// Monte Carlo estimate of E_q[log q(w) - log p(w)] with a private generator.
McEstimate kl_mc_oracle(const MeanVarParams& params, PriorConstant prior, std::int64_t n,
                        std::uint64_t seed);

/// E[log v] for v ~ noncentral chi-squared(lambda, nu).
double logchisq_mean(double lambda, int nu, const SeriesConfig& cfg = {});

/// Residuals of the two exponential-series identities at 0 < u <= 30.
///
/// Left-hand sides are summed directly; right-hand sides use expint_ei.
/// Residuals are |lhs - rhs| / max(1, |rhs|), i.e. absolute for O(1) values
/// and relative once the e^u growth dominates.
IdentityResiduals verify_series_identities(double u);

}  // namespace vdrop::kl
