#include "vdrop/verification.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "vdrop/errors.hpp"
#include "vdrop/kl_core.hpp"
#include "vdrop/quadrature.hpp"
#include "vdrop/specfun.hpp"

namespace vdrop::verify {

namespace {

using specfun::digamma;
using specfun::kEulerGamma;

const double kLn2 = std::numbers::ln2;

// Runs `body`, which returns the worst error, and turns exceptions into failures.
template <typename Body>
CheckResult check(std::string name, double tol, Body body) {
  CheckResult r;
  r.name = std::move(name);
  r.tolerance = tol;
  try {
    r.error = body(r.detail);
    r.passed = std::isfinite(r.error) && r.error <= tol;
  } catch (const std::exception& e) {
    r.error = std::numeric_limits<double>::infinity();
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

std::string at(const char* var, double v) {
  std::ostringstream os;
  os << "worst at " << var << "=" << v;
  return os.str();
}

}  // namespace

std::vector<MeanVar> triangulation_pairs() {
  std::vector<MeanVar> pairs;
  const double targets_u[] = {0.0, 0.01, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0,
                              4.0, 5.0, 7.5, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0};
  int i = 0;
  for (double u : targets_u) {
    // Vary the scale so the pairs are not all on one ray.
    const double sigma2 = std::pow(10.0, -1.0 + 0.1 * i++);
    pairs.push_back({std::sqrt(2.0 * u * sigma2) * (i % 2 == 0 ? 1.0 : -1.0), sigma2});
  }
  return pairs;
}

std::vector<CheckResult> run_verification(const VerifyOptions& opts) {
  std::vector<CheckResult> out;

  out.push_back(check("digamma_recurrence", 1e-12, [](std::string& detail) {
    double worst = 0.0, where = 0.0;
    for (int i = 1; i <= 1000; ++i) {
      const double x = 0.05 * i;
      const double psi = digamma(x);
      const double e = std::abs(digamma(x + 1.0) - psi - 1.0 / x) / std::max(1.0, std::abs(psi));
      if (e > worst) worst = e, where = x;
    }
    detail = at("x", where);
    return worst;
  }));

  out.push_back(check("digamma_harmonic", 1e-10, [](std::string& detail) {
    double worst = 0.0, harmonic = 0.0;
    int where = 0;
    for (int k = 0; k <= 30; ++k) {
      if (k > 0) harmonic += 1.0 / k;
      const double e = std::abs(digamma(k + 1.0) - (harmonic - kEulerGamma));
      if (e > worst) worst = e, where = k;
    }
    detail = at("k", where);
    return worst;
  }));

  out.push_back(check("digamma_half", 1e-12, [](std::string& detail) {
    detail = "psi(1/2) = -gamma - 2 log 2";
    return std::abs(digamma(0.5) - (-kEulerGamma - 2.0 * kLn2));
  }));

  out.push_back(check("dawson_quadrature", 1e-9, [](std::string& detail) {
    double worst = 0.0, where = 0.0;
    for (double x : {0.1, 0.5, 1.0, 2.0, 5.0}) {
      const auto q = quad::integrate([x](double t) { return std::exp(t * t - x * x); }, 0.0, x, 1e-13);
      const double e = std::abs(specfun::dawson(x) - q.value);
      if (e > worst) worst = e, where = x;
    }
    detail = at("x", where);
    return worst;
  }));

  out.push_back(check("dawson_ode", 1e-7, [](std::string& detail) {
    double worst = 0.0, where = 0.0;
    const double h = 1e-5;
    for (int i = 1; i <= 500; ++i) {
      const double x = 0.01 * i;
      const double fd = (specfun::dawson(x + h) - specfun::dawson(x - h)) / (2.0 * h);
      const double e = std::abs(fd - (1.0 - 2.0 * x * specfun::dawson(x)));
      if (e > worst) worst = e, where = x;
    }
    detail = at("x", where);
    return worst;
  }));

  out.push_back(check("dawson_asymptotic", 1e-8, [](std::string& detail) {
    double worst = 0.0, where = 0.0;
    for (double x : {20.0, 100.0, 1e4}) {
      const double oracle = 0.5 / x + 0.25 / std::pow(x, 3) + 0.375 / std::pow(x, 5) +
                            0.9375 / std::pow(x, 7) + 3.28125 / std::pow(x, 9);
      const double e = std::abs(specfun::dawson(x) - oracle) / oracle;
      if (e > worst) worst = e, where = x;
    }
    detail = at("x", where);
    return worst;
  }));

  out.push_back(check("ei_series_identity", 1e-9, [](std::string& detail) {
    double worst = 0.0, where = 0.0;
    for (double u : {0.1, 0.5, 1.0, 2.0, 5.0}) {
      const double e = kl::verify_series_identities(u).ei_series;
      if (e > worst) worst = e, where = u;
    }
    detail = at("u", where);
    return worst;
  }));

  out.push_back(check("harmonic_identity", 1e-9, [](std::string& detail) {
    double worst = 0.0, where = 0.0;
    for (double u : {0.1, 0.5, 1.0, 2.0, 5.0}) {
      const double e = kl::verify_series_identities(u).harmonic;
      if (e > worst) worst = e, where = u;
    }
    detail = at("u", where);
    return worst;
  }));

  out.push_back(check("kl_series_oracle", 1e-9, [](std::string& detail) {
    double worst = 0.0, where = 0.0;
    for (int i = 0; i <= 300; ++i) {
      const double u = 0.1 * i;
      const double e = std::abs(kl::kl_value(u) - kl::kl_series_oracle(u, {}, 400));
      if (e > worst) worst = e, where = u;
    }
    detail = at("u", where);
    return worst;
  }));

  out.push_back(check("kl_gradient_fd", 1e-6, [](std::string& detail) {
    double worst = 0.0, where = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double u = 1e-6 * std::pow(50.0 / 1e-6, i / 199.0);
      const double h = std::min(1e-4 * std::max(1.0, u), 0.5 * u);
      const double fd = (kl::kl_value(u + h) - kl::kl_value(u - h)) / (2.0 * h);
      const double e = std::abs(kl::kl_grad_u(u) - fd);
      if (e > worst) worst = e, where = u;
    }
    // One-sided second-order difference at the origin.
    const double h = 1e-5;
    const double fd0 = (-3.0 * kl::kl_value(0.0) + 4.0 * kl::kl_value(h) - kl::kl_value(2.0 * h)) / (2.0 * h);
    const double e0 = std::abs(kl::kl_grad_u(0.0) - fd0);
    if (e0 > worst) worst = e0, where = 0.0;
    detail = at("u", where);
    return worst;
  }));

  out.push_back(check("kl_monotone", 0.0, [](std::string& detail) {
    double violations = 0.0;
    double prev = kl::kl_value(0.0);
    for (int i = 1; i < 10000; ++i) {
      const double u = 50.0 * i / 9999.0;
      const double v = kl::kl_value(u);
      if (!(v > prev) || !(kl::kl_grad_u(u) > 0.0)) violations += 1.0;
      prev = v;
    }
    detail = "count of non-increasing steps or non-positive gradients on 10^4 grid";
    return violations;
  }));

  out.push_back(check("kl_grad_origin", 1e-5, [](std::string& detail) {
    detail = "|grad(1e-10) - 1|";
    return std::abs(kl::kl_grad_u(1e-10) - 1.0);
  }));

  out.push_back(check("logchisq_closed_form", 1e-10, [](std::string& detail) {
    detail = "nu=1: -gamma - log 2; nu=2: -gamma + log 2";
    return std::max(std::abs(kl::logchisq_mean(0.0, 1) - (-kEulerGamma - kLn2)),
                    std::abs(kl::logchisq_mean(0.0, 2) - (-kEulerGamma + kLn2)));
  }));

  out.push_back(check("logchisq_mc", 4.0, [&opts](std::string& detail) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double shift = std::sqrt(2.0);
    double mean = 0.0, m2 = 0.0;
    for (std::int64_t i = 0; i < opts.mc_samples; ++i) {
      const double z = normal(rng) + shift;
      const double x = 2.0 * std::log(std::abs(z));
      const double d = x - mean;
      mean += d / static_cast<double>(i + 1);
      m2 += d * (x - mean);
    }
    const double se = std::sqrt(m2 / static_cast<double>(opts.mc_samples - 1) / static_cast<double>(opts.mc_samples));
    const double z = std::abs(kl::logchisq_mean(2.0, 1) - mean) / se;
    detail = "lambda=2, nu=1; error in standard errors";
    return z;
  }));

  out.push_back(check("kl_mc_triangulation", 4.0, [&opts](std::string& detail) {
    double worst = 0.0, where = 0.0;
    std::uint64_t seed = opts.seed;
    for (const auto& p : triangulation_pairs()) {
      const kl::MeanVarParams params(p.mu, p.sigma2);
      const auto mc = kl::kl_mc_oracle(params, {}, opts.mc_samples, seed++);
      const double u = kl::reduced_u(params);
      const double z = std::abs(kl::kl_value(u) - mc.estimate) / mc.std_error;
      if (z > worst) worst = z, where = u;
    }
    detail = at("u", where) + " (error in standard errors)";
    return worst;
  }));

  return out;
}

}  // namespace vdrop::verify
