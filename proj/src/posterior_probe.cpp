#include "vdrop/posterior_probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "vdrop/errors.hpp"
#include "vdrop/quadrature.hpp"

namespace vdrop::probe {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_prior(double c) {
  if (!std::isfinite(c) || !(c > 0.0)) throw PreconditionError("prior constant C must be finite and > 0");
}

// Integral of C * lik(sign * e^t) over t in [log a, log b], 0 < a < b.
quad::QuadratureResult log_mass(const Likelihood1D& lik, double a, double b, double sign, double c) {
  return quad::integrate([&](double t) { return c * lik.eval(sign * std::exp(t)); }, std::log(a),
                         std::log(b), kProbeRelTol);
}

}  // namespace

Likelihood1D logistic_likelihood(double x, int y) {
  if (y != 0 && y != 1) throw PreconditionError("logistic label must be 0 or 1");
  const double sign = y == 1 ? 1.0 : -1.0;
  return {[x, sign](double w) { return sigmoid(sign * x * w); },
          "logistic(x=" + std::to_string(x) + ",y=" + std::to_string(y) + ")"};
}

Likelihood1D gaussian_likelihood(double y, double noise) {
  if (!(noise > 0.0)) throw PreconditionError("gaussian likelihood noise must be > 0");
  const double norm = 1.0 / (noise * std::sqrt(2.0 * std::numbers::pi));
  return {[y, noise, norm](double w) {
            const double z = (y - w) / noise;
            return norm * std::exp(-0.5 * z * z);
          },
          "gaussian(y=" + std::to_string(y) + ",sigma=" + std::to_string(noise) + ")"};
}

Likelihood1D constant_likelihood(double value) {
  return {[value](double) { return value; }, "constant(" + std::to_string(value) + ")"};
}

Likelihood1D box_likelihood(double lo, double hi) {
  return {[lo, hi](double w) { return (w >= lo && w <= hi) ? 1.0 : 0.0; },
          "box[" + std::to_string(lo) + "," + std::to_string(hi) + "]"};
}

IntervalMassReport interval_mass(const Likelihood1D& lik, double lo, double hi, double prior_c) {
  check_prior(prior_c);
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw PreconditionError("interval_mass: need finite lo < hi");
  }
  if (lo <= 0.0 && hi >= 0.0) {
    throw PreconditionError("interval_mass: interval must not contain the origin (use origin_mass)");
  }
  IntervalMassReport report;
  report.lo = lo;
  report.hi = hi;
  report.prior_c = prior_c;
  const auto r = lo > 0.0 ? log_mass(lik, lo, hi, 1.0, prior_c) : log_mass(lik, -hi, -lo, -1.0, prior_c);
  report.estimate = r.value;
  report.abs_err = r.abs_err;
  return report;
}

IntervalMassReport origin_mass(const Likelihood1D& lik, double delta, double delta0, double prior_c) {
  check_prior(prior_c);
  if (!(delta > 0.0) || !(delta < delta0) || !std::isfinite(delta0)) {
    throw PreconditionError("origin_mass: need 0 < delta < delta0");
  }

  const double log_lo = std::log(delta);
  const double log_hi = std::log(delta0);
  double r = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kInfimumSamples; ++i) {
    const double w = std::exp(log_lo + (log_hi - log_lo) * i / (kInfimumSamples - 1));
    r = std::min({r, lik.eval(w), lik.eval(-w)});
  }
  if (!(r > 0.0)) {
    throw PreconditionError("origin_mass: likelihood " + lik.label +
                            " is not positive on the annulus (sampled minimum " + std::to_string(r) +
                            ")");
  }

  const auto right = log_mass(lik, delta, delta0, 1.0, prior_c);
  const auto left = log_mass(lik, delta, delta0, -1.0, prior_c);

  IntervalMassReport report;
  report.lo = delta;
  report.hi = delta0;
  report.prior_c = prior_c;
  report.estimate = right.value + left.value;
  report.abs_err = right.abs_err + left.abs_err;
  report.lower_bound = 2.0 * prior_c * r * (log_hi - log_lo);
  return report;
}

double logistic_tail_lower_bound(double k, double K, double prior_c) {
  check_prior(prior_c);
  if (!(k > 0.0) || !(K >= k) || !std::isfinite(K)) {
    throw PreconditionError("logistic_tail_lower_bound: need 0 < k <= K");
  }
  return prior_c * (std::log(K) - std::log(k)) / (1.0 + std::exp(-k));
}

IntervalMassReport logistic_tail_mass(double k, double K, double prior_c) {
  if (!(k > 0.0) || !(K > k) || !std::isfinite(K)) {
    throw PreconditionError("logistic_tail_mass: need 0 < k < K < inf");
  }
  auto report = interval_mass(logistic_likelihood(1.0, 1), k, K, prior_c);
  report.lower_bound = logistic_tail_lower_bound(k, K, prior_c);
  return report;
}

DivergenceReport divergence_report(std::span<const double> log_scale,
                                   std::span<const IntervalMassReport> reports, double slope_factor) {
  if (log_scale.size() != reports.size()) {
    throw PreconditionError("divergence_report: grid and report counts differ");
  }
  const std::size_t n = reports.size();
  if (n < 4) throw PreconditionError("divergence_report: insufficient grid (need >= 4 points)");

  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += log_scale[i];
    my += reports[i].estimate;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = log_scale[i] - mx;
    const double dy = reports[i].estimate - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw PreconditionError("divergence_report: grid points must be distinct");

  DivergenceReport out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  out.threshold = slope_factor * reports.front().prior_c;
  out.monotone = true;
  for (std::size_t i = 1; i < n; ++i) {
    if (!(reports[i].estimate > reports[i - 1].estimate)) out.monotone = false;
  }
  out.divergent = out.monotone && out.slope > out.threshold;
  return out;
}

ProbeRun logistic_tail_probe(double k, double K, int points, double prior_c) {
  if (!(k > 0.0) || !(K > k)) throw PreconditionError("logistic tail probe: need 0 < k < K");
  if (points < 4) throw PreconditionError("logistic tail probe: insufficient grid (need >= 4 points)");
  ProbeRun run;
  const double span = std::log(K / k);
  for (int i = 1; i <= points; ++i) {
    const double Ki = i == points ? K : k * std::exp(span * i / points);
    run.reports.push_back(logistic_tail_mass(k, Ki, prior_c));
    run.log_scale.push_back(std::log(Ki));
  }
  run.divergence = divergence_report(run.log_scale, run.reports);
  return run;
}

ProbeRun origin_probe(const Likelihood1D& lik, double delta, double delta0, int points,
                      double prior_c) {
  if (!(delta > 0.0) || !(delta < delta0)) throw PreconditionError("origin probe: need 0 < delta < delta0");
  if (points < 4) throw PreconditionError("origin probe: insufficient grid (need >= 4 points)");
  ProbeRun run;
  const double span = std::log(delta / delta0);
  for (int i = 1; i <= points; ++i) {
    const double di = i == points ? delta : delta0 * std::exp(span * i / points);
    run.reports.push_back(origin_mass(lik, di, delta0, prior_c));
    run.log_scale.push_back(-std::log(di));
  }
  run.divergence = divergence_report(run.log_scale, run.reports);
  return run;
}

}  // namespace vdrop::probe
