#pragma once

// Numerical evidence that the log-uniform prior C/|w| yields an improper
// posterior. Masses of C/|w| * lik(w) are integrated in t = log|w| so the 1/w
// singularity becomes a flat measure; divergence then shows up as a linear
// growth of the mass in log K (tails) or log(1/delta) (origin), which
// divergence_report fits and classifies. Nothing here claims to compute the
// infinite normaliser itself.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vdrop::probe {

struct Likelihood1D {
  std::function<double(double)> eval;
  std::string label;
};

// p(y | x, w) for a one-weight logistic regression with label y in {0, 1}.
Likelihood1D logistic_likelihood(double x = 1.0, int y = 1);
// N(y; w, noise^2)
Likelihood1D gaussian_likelihood(double y = 0.0, double noise = 1.0);
Likelihood1D constant_likelihood(double value = 1.0);
// Indicator of [lo, hi].
Likelihood1D box_likelihood(double lo, double hi);

struct IntervalMassReport {
  double lo = 0.0;
  double hi = 0.0;
  double estimate = 0.0;  // int C/|w| lik(w) dw
  std::optional<double> lower_bound;
  double abs_err = 0.0;
  double prior_c = 1.0;
};

inline constexpr double kProbeRelTol = 1e-9;
inline constexpr int kInfimumSamples = 1001;

/// Mass of C/|w| lik(w) over [lo, hi] with 0 outside the closed interval.
IntervalMassReport interval_mass(const Likelihood1D& lik, double lo, double hi, double prior_c);

/// Mass over the symmetric annulus delta <= |w| <= delta0.
///
/// The lower bound is 2 C r log(delta0 / delta) with r the minimum of lik over
/// kInfimumSamples log-spaced radii on both sides of the origin. A sampled
/// value of zero raises PreconditionError.
IntervalMassReport origin_mass(const Likelihood1D& lik, double delta, double delta0, double prior_c);

IntervalMassReport logistic_tail_mass(double k, double K, double prior_c);

/// C (log K - log k) / (1 + e^{-k}); uses sigmoid(w) > sigmoid(k) on (k, K].
double logistic_tail_lower_bound(double k, double K, double prior_c);

struct DivergenceReport {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double threshold = 0.0;
  bool monotone = false;
  bool divergent = false;
};

inline constexpr double kDefaultSlopeFactor = 0.1;

/// Least-squares fit of estimate against the log-scale coordinate.
///
/// `log_scale` is log K for tail probes and log(1/delta) for origin probes.
/// "divergent" requires slope > slope_factor * C and estimates strictly
/// increasing along the grid. Fewer than 4 points raise PreconditionError.
DivergenceReport divergence_report(std::span<const double> log_scale,
                                   std::span<const IntervalMassReport> reports,
                                   double slope_factor = kDefaultSlopeFactor);

struct ProbeRun {
  std::vector<IntervalMassReport> reports;
  std::vector<double> log_scale;
  DivergenceReport divergence;
};

/// Logistic right-tail masses over [k, K_i] for K_i = k (K/k)^{i/points}, i = 1..points.
ProbeRun logistic_tail_probe(double k, double K, int points, double prior_c);

/// Origin masses over delta_i <= |w| <= delta0 with delta_i = delta0 (delta/delta0)^{i/points}.
ProbeRun origin_probe(const Likelihood1D& lik, double delta, double delta0, int points,
                      double prior_c);

}  // namespace vdrop::probe
