// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Reference values come from the oracles in oracles.hpp or
// are computed inline; the library is only ever the thing under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "oracles.hpp"
#include "vdrop/dataset.hpp"
#include "vdrop/kl_core.hpp"
#include "vdrop/posterior_probe.hpp"
#include "vdrop/verification.hpp"
#include "vdrop/vdnet.hpp"

namespace kl = vdrop::kl;
namespace probe = vdrop::probe;
namespace vdnet = vdrop::vdnet;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << (ok ? "" : "FAILED ") << what;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<void(Verdict&)>& body) {
  Verdict v;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_s > 0) v.require(secs < budget_s, "runtime " + num(secs) + " s < " + num(budget_s) + " s");
  if (!v.pass) ++failures;
  std::printf("%s [%2d] %s: %s\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.str().c_str());
  std::fflush(stdout);
}

// Reference training runs shared by criteria 8 and 9.
vdnet::TrainConfig reference_train_config() {
  vdnet::TrainConfig cfg;
  cfg.seed = 11;
  cfg.learning_rate = 0.01;
  cfg.epochs = 20000;
  cfg.lr_decay = 0.9998;
  cfg.optimizer = vdnet::Optimizer::adam;
  return cfg;
}

vdnet::NetworkConfig reference_net(vdnet::LayerMode mode) {
  return {{10, 1}, {mode}, vdnet::Activation::identity, 0.1};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int main() {
  const double kl0 = kl::kl_value(0.0);

  criterion(1, "gradient exactness", 1.0, [](Verdict& v) {
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double u = 1e-6 * std::pow(50.0 / 1e-6, i / 199.0);
      const double h = std::min(1e-5 * std::max(1.0, u), 0.5 * u);
      const double fd = (kl::kl_value(u + h) - kl::kl_value(u - h)) / (2 * h);
      worst = std::max(worst, std::abs(kl::kl_grad_u(u) - fd));
    }
    const double h = 1e-6;
    const double one_sided = (kl::kl_value(h) - kl::kl_value(0.0)) / h;
    const double origin = std::abs(kl::kl_grad_u(0.0) - one_sided);
    v.require(worst <= 1e-6, "max |grad - central FD| = " + num(worst) + " <= 1e-6 over 200 log-spaced u");
    v.require(origin <= 1e-6, "|grad(0) - one-sided FD| = " + num(origin) + " <= 1e-6");
  });

  criterion(2, "triple triangulation", 60.0, [](Verdict& v) {
    double worst = 0.0;
    for (int i = 0; i <= 3000; ++i) {
      const double u = 0.01 * i;
      worst = std::max(worst, std::abs(kl::kl_value(u) - kl::kl_series_oracle(u, {}, 400)));
    }
    v.require(worst <= 1e-9, "max |kl_value - series oracle| on [0,30] = " + num(worst) + " <= 1e-9");
    double worst_z = 0.0;
    std::uint64_t seed = 1000;
    for (const auto& p : vdrop::verify::triangulation_pairs()) {
      const kl::MeanVarParams params(p.mu, p.sigma2);
      const auto mc = kl::kl_mc_oracle(params, {}, 1000000, seed++);
      worst_z = std::max(worst_z, std::abs(kl::kl_value(kl::reduced_u(params)) - mc.estimate) / mc.std_error);
    }
    v.require(worst_z <= 4.0, "max MC deviation over 20 pairs = " + num(worst_z) + " stderr <= 4");
  });

  criterion(3, "strict monotonicity", 0.0, [](Verdict& v) {
    int bad_steps = 0, bad_grads = 0;
    double prev = kl::kl_value(0.0);
    if (!(kl::kl_grad_u(0.0) > 0)) ++bad_grads;
    for (int i = 1; i < 10000; ++i) {
      const double u = 50.0 * i / 9999.0;
      const double val = kl::kl_value(u);
      if (!(val > prev)) ++bad_steps;
      if (!(kl::kl_grad_u(u) > 0)) ++bad_grads;
      prev = val;
    }
    v.require(bad_steps == 0, std::to_string(bad_steps) + " non-increasing steps on 10^4 grid");
    v.require(bad_grads == 0, std::to_string(bad_grads) + " non-positive gradients");
  });

  criterion(4, "continuity at the origin", 0.0, [](Verdict& v) {
    const double e = std::abs(kl::kl_grad_u(1e-10) - 1.0);
    v.require(e <= 1e-5, "|grad(1e-10) - 1| = " + num(e) + " <= 1e-5");
  });

  criterion(5, "series identities", 30.0, [](Verdict& v) {
    double worst = 0.0;
    for (double u : {0.1, 0.5, 1.0, 2.0, 5.0}) {
      const auto r = kl::verify_series_identities(u);
      worst = std::max({worst, r.harmonic, r.ei_series});
    }
    v.require(worst <= 1e-9, "max identity residual = " + num(worst) + " <= 1e-9");
    const double closed = std::abs(kl::logchisq_mean(0.0, 1) - (oracle::digamma(0.5) + std::numbers::ln2));
    v.require(closed <= 1e-10, "|logchisq(0,1) - (psi(1/2)+log 2)| = " + num(closed) + " <= 1e-10");
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal;
    const int n = 1000000;
    double mean = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
      const double z = normal(rng) + std::sqrt(2.0);
      const double x = std::log(z * z);
      const double d = x - mean;
      mean += d / (i + 1);
      m2 += d * (x - mean);
    }
    const double se = std::sqrt(m2 / (n - 1) / n);
    const double z = std::abs(kl::logchisq_mean(2.0, 1) - mean) / se;
    v.require(z <= 4.0, "logchisq(2,1) vs 10^6-sample MC = " + num(z) + " stderr <= 4");
  });

  criterion(6, "improper posterior", 10.0, [](Verdict& v) {
    const double c = 1.0;
    const auto tail = probe::logistic_tail_probe(10.0, 10.0 * std::exp(8.0), 8, c);
    const double rel = std::abs(tail.divergence.slope / c - 1.0);
    v.require(rel <= 0.02, "logistic tail slope = " + num(tail.divergence.slope) + " (C within 2%)");
    bool above = true;
    for (const auto& r : tail.reports) above = above && r.estimate > *r.lower_bound;
    v.require(above, "every tail estimate exceeds the closed-form bound");
    v.require(tail.divergence.divergent, "tail verdict divergent");

    const auto origin = probe::origin_probe(probe::logistic_likelihood(), 1e-8, 1e-2, 8, c);
    const double orel = std::abs(origin.divergence.slope / (0.5 * c) - 1.0);
    v.require(origin.divergence.divergent, "origin verdict divergent");
    v.require(orel <= 0.02, "origin sigmoid slope = " + num(origin.divergence.slope) +
                                " vs C/2 within 2% (symmetric annulus: sigmoid(w)+sigmoid(-w)=1 gives C)");
  });

  criterion(7, "network gradient check", 5.0, [](Verdict& v) {
    vdnet::NetworkConfig cfg{{2, 4, 1}, {vdnet::LayerMode::additive, vdnet::LayerMode::additive},
                             vdnet::Activation::relu, 0.1};
    auto net = vdnet::Network::initialise(cfg, 31);
    for (auto& layer : net.layers()) {
      layer.noise.setConstant(std::log(0.3));
      layer.bias.setConstant(0.05);
    }
    vdnet::Batch batch{vdnet::Matrix(8, 2), vdnet::Vector(8)};
    std::mt19937_64 data_rng(8);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 8; ++i) {
      batch.x(i, 0) = normal(data_rng);
      batch.x(i, 1) = normal(data_rng);
      batch.y(i) = batch.x(i, 0) - 0.5 * batch.x(i, 1) * batch.x(i, 1);
    }
    const vdnet::TrainConfig tcfg;
    const std::uint64_t seed = 77;  // frozen noise draw
    auto objective = [&] {
      vdnet::Rng rng(seed);
      return vdnet::elbo_objective(net, batch, tcfg, rng).objective;
    };
    vdnet::Rng rng(seed);
    const auto grads = vdnet::backward(net, vdnet::elbo_objective(net, batch, tcfg, rng), tcfg);

    int checked = 0, failed = 0;
    double worst = 0.0;
    auto check = [&](auto& param, const auto& grad) {
      for (Eigen::Index i = 0; i < param.size(); ++i) {
        const double orig = param(i);
        auto f = [&](double x) {
          param(i) = x;
          const double out = objective();
          param(i) = orig;
          return out;
        };
        const double fd = oracle::five_point(f, orig, 1e-4);
        const double diff = std::abs(grad(i) - fd);
        const double scale = std::max(std::abs(grad(i)), std::abs(fd));
        const double rel = scale > 0.0 ? diff / scale : 0.0;
        if (scale > 1e-6) worst = std::max(worst, rel);
        ++checked;
        if (diff > 1e-8 && rel > 1e-4) ++failed;  // both-near-zero counts as agreement
      }
    };
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      check(net.layers()[l].theta, grads[l].dtheta);
      check(net.layers()[l].noise, grads[l].dnoise);
      check(net.layers()[l].bias, grads[l].dbias);
    }
    v.require(failed == 0, std::to_string(checked - failed) + "/" + std::to_string(checked) +
                               " parameters within rel-tol 1e-4 (worst relative error " + num(worst) + ")");
  });

  const auto data = vdnet::make_redundant_linear(7);
  std::vector<double> additive_log10_alpha;
  vdnet::SparsityReport additive_sparsity;
  bool additive_ok = false;

  criterion(8, "parametrisation split", 0.0, [&](Verdict& v) {
    const auto add = vdnet::train(reference_net(vdnet::LayerMode::additive), reference_train_config(), data);
    const double gap = add.model.min_weight_kl() - kl0;
    v.require(std::abs(gap) <= 1e-3, "additive min per-weight KL - kl_value(0) = " + num(gap) + " <= 1e-3");
    const auto mul =
        vdnet::train(reference_net(vdnet::LayerMode::multiplicative), reference_train_config(), data);
    double closest = INFINITY;
    for (const auto& rec : mul.trace) closest = std::min(closest, rec.min_weight_kl - kl0);
    v.require(closest > 0.0, "multiplicative min over epochs of (per-weight KL - kl_value(0)) = " + num(closest) +
                                 " > 0");
    additive_sparsity = vdnet::sparsity_report(add.model, data.x_test, data.y_test, 3.0);
    additive_ok = true;
  });

  criterion(9, "sparsification", 0.0, [&](Verdict& v) {
    v.require(additive_ok, "additive reference run available");
    if (!additive_ok) return;
    const auto& a = additive_sparsity.log10_alpha[0];
    std::vector<double> signal, noise;
    for (Eigen::Index j = 0; j < a.cols(); ++j) (j < data.signal_features ? signal : noise).push_back(a(0, j));
    const double ms = median(signal), mn = median(noise);
    v.require(mn > ms, "median log10 alpha noise " + num(mn) + " > signal " + num(ms));
    const double change = std::abs(additive_sparsity.rmse_after - additive_sparsity.rmse_before) /
                          additive_sparsity.rmse_before;
    v.require(change < 0.05, "pruned " + std::to_string(additive_sparsity.pruned) + "/" +
                                 std::to_string(additive_sparsity.total) + ", held-out RMSE change " +
                                 num(100 * change) + "% < 5%");
  });

  criterion(10, "correlated-noise diagnostic", 0.0, [](Verdict& v) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> normal;
    int infinite = 0;
    for (int t = 0; t < 5; ++t) {
      vdnet::Matrix theta(3, 4);
      for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = normal(rng);
      vdnet::CorrelatedVDLayer layer{theta, vdnet::Vector::Constant(4, 0.5), vdnet::Vector(),
                                     vdnet::PriorScope::full_weights};
      if (std::holds_alternative<vdnet::InfiniteKL>(vdnet::correlated_kl_diagnostic(layer))) ++infinite;
    }
    v.require(infinite == 5, std::to_string(infinite) + "/5 full_weights configurations report InfiniteKL");
    vdnet::CorrelatedVDLayer layer{vdnet::Matrix::Ones(3, 5), vdnet::Vector::LinSpaced(5, 0.5, 4.0),
                                   vdnet::Vector::Zero(3), vdnet::PriorScope::scalars_only};
    const auto diag = vdnet::correlated_kl_diagnostic(layer);
    const auto* s = std::get_if<vdnet::ScalarOnlyKL>(&diag);
    v.require(s != nullptr, "scalars_only returns per-row KL");
    if (!s) return;
    bool finite = s->rows.size() == 5;
    for (Eigen::Index j = 0; j < 5 && finite; ++j) {
      const double u = 1.0 / (2.0 * layer.row_alpha(j));
      finite = std::isfinite(s->rows[j].value) && std::abs(s->rows[j].u - u) < 1e-15 &&
               std::abs(s->rows[j].value - oracle::kl_quadrature(u)) < 1e-9;
    }
    v.require(finite, "5 finite row KLs matching the quadrature oracle at u = 1/(2 alpha)");
    v.require(s->unregularised_param_count == 18, "unregularised count " +
                                                      std::to_string(s->unregularised_param_count) + " == 15 + 3");
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
