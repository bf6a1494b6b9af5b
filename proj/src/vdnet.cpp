#include "vdrop/vdnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "vdrop/errors.hpp"

namespace vdrop::vdnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double activate(Activation act, double x) {
  return act == Activation::relu ? std::max(0.0, x) : x;
}

double activate_grad(Activation act, double x) {
  return act == Activation::relu ? (x > 0.0 ? 1.0 : 0.0) : 1.0;
}

Matrix apply_activation(Activation act, const Matrix& m) {
  return m.unaryExpr([act](double v) { return activate(act, v); });
}

void mix(std::uint64_t& h, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    h ^= std::bit_cast<std::uint64_t>(data[i]);
    h *= 1099511628211ULL;
  }
}

// Parameter-wise optimiser state mirroring LayerGrad.
struct Slot {
  Matrix m;
  Matrix v;
};

class Stepper {
 public:
  Stepper(const TrainConfig& cfg) : cfg_(cfg) {}

  void step(Matrix& param, const Matrix& grad, Slot& slot, double lr) const {
    if (slot.m.size() == 0) {
      slot.m = Matrix::Zero(grad.rows(), grad.cols());
      slot.v = Matrix::Zero(grad.rows(), grad.cols());
    }
    switch (cfg_.optimizer) {
      case Optimizer::sgd:
        param += lr * grad;
        break;
      case Optimizer::momentum:
        slot.m = cfg_.momentum * slot.m + grad;
        param += lr * slot.m;
        break;
      case Optimizer::adam: {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        slot.m = b1 * slot.m + (1.0 - b1) * grad;
        slot.v = b2 * slot.v + (1.0 - b2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(b1, t_);
        const double c2 = 1.0 - std::pow(b2, t_);
        param.array() += lr * (slot.m.array() / c1) / ((slot.v.array() / c2).sqrt() + eps);
        break;
      }
    }
  }

  void tick() { ++t_; }

 private:
  TrainConfig cfg_;
  double t_ = 0.0;
};

}  // namespace

std::string to_string(LayerMode mode) {
  switch (mode) {
    case LayerMode::multiplicative: return "multiplicative";
    case LayerMode::additive: return "additive";
    case LayerMode::deterministic: return "deterministic";
  }
  return "?";
}

std::string to_string(Activation act) { return act == Activation::relu ? "relu" : "identity"; }

std::string to_string(Optimizer opt) {
  switch (opt) {
    case Optimizer::sgd: return "sgd";
    case Optimizer::momentum: return "momentum";
    case Optimizer::adam: return "adam";
  }
  return "?";
}

LayerMode parse_layer_mode(const std::string& s) {
  if (s == "multiplicative") return LayerMode::multiplicative;
  if (s == "additive") return LayerMode::additive;
  if (s == "deterministic") return LayerMode::deterministic;
  throw ConfigError("unknown layer mode '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "momentum") return Optimizer::momentum;
  if (s == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

// ---------------------------------------------------------------------------
// DenseVDLayer

Matrix DenseVDLayer::weight_variance() const {
  switch (mode) {
    case LayerMode::multiplicative:
      return noise.array().exp() * theta.array().square();
    case LayerMode::additive:
      return (2.0 * noise.array()).exp();
    case LayerMode::deterministic:
      break;
  }
  return Matrix::Zero(theta.rows(), theta.cols());
}

Matrix DenseVDLayer::alpha() const {
  switch (mode) {
    case LayerMode::multiplicative:
      return noise.array().exp();
    case LayerMode::additive: {
      const Matrix var = weight_variance();
      return var.binaryExpr(theta, [](double s2, double t) { return t == 0.0 ? kInf : s2 / (t * t); });
    }
    case LayerMode::deterministic:
      break;
  }
  throw PreconditionError("alpha is undefined for a deterministic layer");
}

Matrix DenseVDLayer::per_weight_kl(kl::PriorConstant prior) const {
  Matrix out = Matrix::Zero(theta.rows(), theta.cols());
  if (mode == LayerMode::multiplicative) {
    // Reads only the noise parameters.
    for (Eigen::Index i = 0; i < noise.size(); ++i) {
      out(i) = kl::kl_value(std::exp(-noise(i)), prior);
    }
  } else if (mode == LayerMode::additive) {
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      out(i) = kl::kl_additive(kl::AdditiveParams(theta(i), noise(i)), prior).kl.value;
    }
  }
  return out;
}

double DenseVDLayer::kl_total(kl::PriorConstant prior) const {
  if (!noisy()) return 0.0;
  return per_weight_kl(prior).sum();
}

void DenseVDLayer::clamp_noise() {
  if (mode == LayerMode::multiplicative) {
    noise = noise.cwiseMax(kLogAlphaMin).cwiseMin(kLogAlphaMax);
  } else if (mode == LayerMode::additive) {
    noise = noise.cwiseMax(kLogSigmaMin).cwiseMin(kLogSigmaMax);
  }
}

void DenseVDLayer::validate() const {
  if (theta.size() == 0) throw ShapeError("layer theta must be non-empty");
  if (bias.size() != theta.rows()) throw ShapeError("layer bias length must equal out dimension");
  if (noisy() && (noise.rows() != theta.rows() || noise.cols() != theta.cols())) {
    throw ShapeError("layer noise shape must match theta");
  }
  if (!theta.allFinite() || !bias.allFinite() || (noisy() && !noise.allFinite())) {
    throw DomainError("layer parameters must be finite");
  }
}

// ---------------------------------------------------------------------------
// NetworkConfig / TrainConfig

int NetworkConfig::total_weights() const {
  int d = 0;
  for (int l = 0; l < num_layers(); ++l) d += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return d;
}

void NetworkConfig::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("network needs at least an input and an output width");
  if (std::any_of(layer_sizes.begin(), layer_sizes.end(), [](int s) { return s < 1; })) {
    throw ConfigError("layer sizes must be positive");
  }
  if (layer_sizes.back() != 1) throw ConfigError("regression output width must be 1");
  if (static_cast<int>(modes.size()) != num_layers()) {
    throw ConfigError("need exactly one mode per weight layer");
  }
  if (!(sigma_n > 0.0) || !std::isfinite(sigma_n)) throw ConfigError("sigma_n must be > 0");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 0) throw ConfigError("batch_size must be >= 0");
  if (!(kl_scale >= 0.0)) throw ConfigError("kl_scale must be >= 0");
  if (!(prior_c > 0.0) || !std::isfinite(prior_c)) throw ConfigError("prior_c must be finite and > 0");
  if (!(lr_decay > 0.0) || lr_decay > 1.0) throw ConfigError("lr_decay must lie in (0, 1]");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// Network

Network::Network(NetworkConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (int l = 0; l < cfg_.num_layers(); ++l) {
    DenseVDLayer layer;
    layer.mode = cfg_.modes[l];
    layer.theta = Matrix::Zero(cfg_.layer_sizes[l + 1], cfg_.layer_sizes[l]);
    layer.noise = Matrix::Zero(cfg_.layer_sizes[l + 1], cfg_.layer_sizes[l]);
    layer.bias = Vector::Zero(cfg_.layer_sizes[l + 1]);
    layers_.push_back(std::move(layer));
  }
}

Network Network::initialise(const NetworkConfig& cfg, std::uint64_t seed) {
  Network net(cfg);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& layer : net.layers_) {
    const double scale = std::sqrt(2.0 / static_cast<double>(layer.in()));
    for (Eigen::Index i = 0; i < layer.theta.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.theta.cols(); ++j) layer.theta(i, j) = scale * normal(rng);
    }
    if (layer.mode == LayerMode::multiplicative) {
      layer.noise.setConstant(-3.0);
    } else if (layer.mode == LayerMode::additive) {
      layer.noise = (0.05 * layer.theta.array().abs() + 1e-8).log();
    }
    layer.clamp_noise();
  }
  return net;
}

Vector Network::predict_mean(const Matrix& x) const {
  if (x.cols() != cfg_.layer_sizes.front()) throw ShapeError("input width does not match network");
  Matrix a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix pre = (a * layers_[l].theta.transpose()).rowwise() + layers_[l].bias.transpose();
    a = l + 1 < layers_.size() ? apply_activation(cfg_.activation, pre) : pre;
  }
  return a.col(0);
}

double Network::rmse(const Matrix& x, const Vector& y) const {
  if (x.rows() != y.size() || y.size() == 0) throw ShapeError("rmse: row count mismatch or empty data");
  const Vector r = predict_mean(x) - y;
  return std::sqrt(r.squaredNorm() / static_cast<double>(y.size()));
}

double Network::kl_total(kl::PriorConstant prior) const {
  double total = 0.0;
  for (const auto& layer : layers_) total += layer.kl_total(prior);
  return total;
}

double Network::min_weight_kl(kl::PriorConstant prior) const {
  double best = kInf;
  for (const auto& layer : layers_) {
    if (layer.noisy()) best = std::min(best, layer.per_weight_kl(prior).minCoeff());
  }
  return best;
}

std::uint64_t Network::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& layer : layers_) {
    mix(h, layer.theta.data(), layer.theta.size());
    mix(h, layer.noise.data(), layer.noise.size());
    mix(h, layer.bias.data(), layer.bias.size());
    h ^= static_cast<std::uint64_t>(layer.mode);
  }
  return h;
}

void Network::validate() const {
  cfg_.validate();
  if (static_cast<int>(layers_.size()) != cfg_.num_layers()) throw ShapeError("layer count mismatch");
  for (int l = 0; l < cfg_.num_layers(); ++l) {
    const auto& layer = layers_[l];
    layer.validate();
    if (layer.in() != cfg_.layer_sizes[l] || layer.out() != cfg_.layer_sizes[l + 1]) {
      throw ShapeError("layer " + std::to_string(l) + " shape does not match layer sizes");
    }
    if (layer.mode != cfg_.modes[l]) throw ShapeError("layer " + std::to_string(l) + " mode mismatch");
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

LayerSample forward_local_reparam(const DenseVDLayer& layer, const Matrix& inputs, Rng& rng) {
  if (inputs.cols() != layer.in()) {
    throw ShapeError("input width " + std::to_string(inputs.cols()) + " does not match layer in-dimension " +
                     std::to_string(layer.in()));
  }
  LayerSample s;
  s.mean = (inputs * layer.theta.transpose()).rowwise() + layer.bias.transpose();
  if (!layer.noisy()) {
    s.variance = Matrix::Zero(s.mean.rows(), s.mean.cols());
    s.preact = s.mean;
    return s;
  }
  s.variance = inputs.array().square().matrix() * layer.weight_variance().transpose();
  s.noise.resize(s.mean.rows(), s.mean.cols());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index n = 0; n < s.noise.rows(); ++n) {
    for (Eigen::Index j = 0; j < s.noise.cols(); ++j) s.noise(n, j) = normal(rng);
  }
  s.preact = s.mean.array() + s.variance.array().sqrt() * s.noise.array();
  return s;
}

ForwardPass elbo_objective(const Network& net, const Batch& batch, const TrainConfig& cfg, Rng& rng,
                           double likelihood_scale) {
  if (batch.x.rows() == 0) throw ShapeError("elbo_objective: empty batch");
  if (batch.x.rows() != batch.y.size()) throw ShapeError("elbo_objective: x/y row count mismatch");
  const auto& ncfg = net.config();
  const kl::PriorConstant prior(cfg.prior_c);

  ForwardPass pass;
  pass.likelihood_scale = likelihood_scale;
  Matrix a = batch.x;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerTape t;
    t.input = a;
    t.sample = forward_local_reparam(layers[l], a, rng);
    a = l + 1 < layers.size() ? apply_activation(ncfg.activation, t.sample.preact) : t.sample.preact;
    pass.tape.push_back(std::move(t));
  }
  pass.output = a.col(0);

  const double s2 = ncfg.sigma_n * ncfg.sigma_n;
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * s2);
  const Vector r = batch.y - pass.output;
  pass.log_lik = likelihood_scale * (static_cast<double>(r.size()) * log_norm - 0.5 * r.squaredNorm() / s2);

  for (const auto& layer : layers) {
    pass.layer_kl.push_back(layer.kl_total(prior));
    pass.kl_total += pass.layer_kl.back();
  }
  pass.objective = pass.log_lik - cfg.kl_scale * pass.kl_total;
  pass.fingerprint = net.fingerprint();
  pass.valid = true;
  pass.residual = r;
  return pass;
}

std::vector<LayerGrad> backward(const Network& net, const ForwardPass& pass, const TrainConfig& cfg) {
  const auto& layers = net.layers();
  if (!pass.valid || pass.tape.size() != layers.size()) {
    throw StateError("backward: no recorded forward pass for this network");
  }
  if (pass.fingerprint != net.fingerprint()) {
    throw StateError("backward: parameters changed since the forward pass was recorded");
  }
  const auto& ncfg = net.config();
  const double s2n = ncfg.sigma_n * ncfg.sigma_n;

  std::vector<LayerGrad> grads(layers.size());
  // d objective / d output pre-activation
  Matrix g = (pass.likelihood_scale / s2n) * pass.residual;

  for (std::size_t idx = layers.size(); idx-- > 0;) {
    const auto& layer = layers[idx];
    const auto& t = pass.tape[idx];
    const Matrix& a = t.input;
    LayerGrad& out = grads[idx];

    out.dtheta = g.transpose() * a;
    out.dbias = g.colwise().sum().transpose();
    out.dnoise = Matrix::Zero(layer.theta.rows(), layer.theta.cols());
    Matrix da = g * layer.theta;

    if (layer.noisy()) {
      // pre = mean + sqrt(var) * z; sqrt(var) is identically 0 where var = 0.
      Matrix dvar = Matrix::Zero(g.rows(), g.cols());
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double v = t.sample.variance(i);
        if (v > 0.0) dvar(i) = g(i) * t.sample.noise(i) / (2.0 * std::sqrt(v));
      }
      const Matrix var_w = layer.weight_variance();
      const Matrix dvar_w = dvar.transpose() * a.array().square().matrix();
      da.array() += 2.0 * a.array() * (dvar * var_w).array();

      const kl::PriorConstant prior(cfg.prior_c);
      for (Eigen::Index i = 0; i < layer.theta.size(); ++i) {
        const double th = layer.theta(i);
        if (layer.mode == LayerMode::multiplicative) {
          const double alpha = std::exp(layer.noise(i));
          out.dtheta(i) += dvar_w(i) * 2.0 * alpha * th;
          out.dnoise(i) = dvar_w(i) * alpha * th * th;
          // dKL/dlog(alpha) = alpha * dKL/dalpha; theta never enters.
          const auto k = kl::kl_multiplicative(kl::MultiplicativeParams(th, alpha), prior);
          out.dnoise(i) -= cfg.kl_scale * k.dalpha * alpha;
        } else {
          out.dnoise(i) = dvar_w(i) * 2.0 * var_w(i);
          const auto k = kl::kl_additive(kl::AdditiveParams(th, layer.noise(i)), prior);
          out.dtheta(i) -= cfg.kl_scale * k.dtheta;
          out.dnoise(i) -= cfg.kl_scale * k.dlog_sigma;
        }
      }
    }

    if (idx > 0) {
      const Matrix& prev = pass.tape[idx - 1].sample.preact;
      g = da.cwiseProduct(prev.unaryExpr([&](double v) { return activate_grad(ncfg.activation, v); }));
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const NetworkConfig& net_cfg, const TrainConfig& train_cfg, const Dataset& data) {
  net_cfg.validate();
  train_cfg.validate();
  const Eigen::Index n = data.x_train.rows();
  if (n == 0 || data.y_train.size() != n) throw ShapeError("train: training data empty or x/y mismatch");
  if (data.x_train.cols() != net_cfg.layer_sizes.front()) {
    throw ShapeError("train: dataset has " + std::to_string(data.x_train.cols()) +
                     " features but the network expects " + std::to_string(net_cfg.layer_sizes.front()));
  }
  const bool has_test = data.x_test.rows() > 0;
  if (has_test && data.x_test.cols() != data.x_train.cols()) throw ShapeError("train: test width mismatch");

  TrainResult result{Network::initialise(net_cfg, train_cfg.seed), {}};
  Network& net = result.model;
  Rng rng(train_cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  const kl::PriorConstant prior(train_cfg.prior_c);

  const Eigen::Index bs =
      train_cfg.batch_size == 0 ? n : std::min<Eigen::Index>(train_cfg.batch_size, n);
  const double scale = static_cast<double>(n) / static_cast<double>(bs);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);

  Stepper stepper(train_cfg);
  std::vector<Slot> slots(net.layers().size() * 3);
  double lr = train_cfg.learning_rate;

  try {
    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
      if (bs < n) std::shuffle(order.begin(), order.end(), rng);
      double objective_sum = 0.0;
      int batches = 0;
      for (Eigen::Index start = 0; start < n; start += bs) {
        const Eigen::Index len = std::min(bs, n - start);
        Batch batch{Matrix(len, data.x_train.cols()), Vector(len)};
        for (Eigen::Index r = 0; r < len; ++r) {
          batch.x.row(r) = data.x_train.row(order[start + r]);
          batch.y(r) = data.y_train(order[start + r]);
        }
        const ForwardPass pass = elbo_objective(net, batch, train_cfg, rng, scale);
        if (!std::isfinite(pass.objective)) {
          throw DivergenceError("objective became non-finite at epoch " + std::to_string(epoch));
        }
        const auto grads = backward(net, pass, train_cfg);
        stepper.tick();
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
          auto& layer = net.layers()[l];
          stepper.step(layer.theta, grads[l].dtheta, slots[3 * l], lr);
          Matrix bias = layer.bias;
          stepper.step(bias, grads[l].dbias, slots[3 * l + 1], lr);
          layer.bias = bias.col(0);
          if (layer.noisy()) {
            stepper.step(layer.noise, grads[l].dnoise, slots[3 * l + 2], lr);
            layer.clamp_noise();
          }
        }
        objective_sum += pass.objective;
        ++batches;
      }

      EpochRecord rec;
      rec.epoch = epoch;
      rec.objective = objective_sum / batches;
      rec.kl_total = net.kl_total(prior);
      rec.rmse_train = net.rmse(data.x_train, data.y_train);
      rec.rmse_test = has_test ? net.rmse(data.x_test, data.y_test) : std::numeric_limits<double>::quiet_NaN();
      rec.min_weight_kl = net.min_weight_kl(prior);
      if (!std::isfinite(rec.objective) || !std::isfinite(rec.rmse_train)) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch));
      }
      result.trace.push_back(rec);
      lr *= train_cfg.lr_decay;
    }
  } catch (const RangeError& e) {
    throw DivergenceError(std::string("training left the supported KL range: ") + e.what());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Sparsity

SparsityReport sparsity_report(const Network& net, const Matrix& x_test, const Vector& y_test,
                               double threshold) {
  SparsityReport rep;
  rep.threshold = threshold;
  rep.pruned_model = net;
  bool any_noisy = false;
  for (auto& layer : rep.pruned_model.layers()) {
    if (!layer.noisy()) {
      rep.log10_alpha.emplace_back();
      continue;
    }
    any_noisy = true;
    Matrix log10a = layer.alpha().unaryExpr([](double a) { return std::log10(a); });
    for (Eigen::Index i = 0; i < log10a.size(); ++i) {
      ++rep.total;
      if (log10a(i) > threshold) {
        ++rep.pruned;
        layer.theta(i) = 0.0;
        if (layer.mode == LayerMode::additive) layer.noise(i) = kLogSigmaMin;
      }
    }
    rep.log10_alpha.push_back(std::move(log10a));
  }
  if (!any_noisy) throw PreconditionError("sparsity_report: model has no variational layers");
  rep.pruned_fraction = static_cast<double>(rep.pruned) / static_cast<double>(rep.total);
  rep.rmse_before = net.rmse(x_test, y_test);
  rep.rmse_after = rep.pruned_model.rmse(x_test, y_test);
  return rep;
}

// ---------------------------------------------------------------------------
// Correlated weight noise

void CorrelatedVDLayer::validate() const {
  if (theta.size() == 0) throw ShapeError("correlated layer theta must be non-empty");
  if (row_alpha.size() != theta.cols()) throw ShapeError("row_alpha needs one entry per input");
  if (bias.size() != 0 && bias.size() != theta.rows()) throw ShapeError("bias length must equal out dimension");
  for (Eigen::Index j = 0; j < row_alpha.size(); ++j) {
    if (!std::isfinite(row_alpha(j)) || !(row_alpha(j) > 0.0)) throw DomainError("row_alpha must be > 0");
  }
}

Matrix forward_correlated(const CorrelatedVDLayer& layer, const Matrix& inputs, Rng& rng) {
  layer.validate();
  if (inputs.cols() != layer.theta.cols()) throw ShapeError("input width does not match layer");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix scaled = inputs;
  for (Eigen::Index n = 0; n < scaled.rows(); ++n) {
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
      scaled(n, j) *= 1.0 + std::sqrt(layer.row_alpha(j)) * normal(rng);
    }
  }
  Matrix out = scaled * layer.theta.transpose();
  if (layer.bias.size() != 0) out.rowwise() += layer.bias.transpose();
  return out;
}

CorrelatedDiagnostic correlated_kl_diagnostic(const CorrelatedVDLayer& layer, kl::PriorConstant prior) {
  layer.validate();
  if (layer.prior_scope == PriorScope::full_weights) {
    // q(W) lives on the span of theta's rows scaled by s, a null set of R^D.
    return InfiniteKL{};
  }
  ScalarOnlyKL out;
  for (Eigen::Index j = 0; j < layer.row_alpha.size(); ++j) {
    const double u = kl::reduced_u(kl::MeanVarParams(1.0, layer.row_alpha(j)));
    out.rows.push_back({u, kl::kl_value(u, prior), kl::kl_grad_u(u)});
  }
  out.unregularised_param_count = static_cast<int>(layer.theta.size() + layer.bias.size());
  return out;
}

}  // namespace vdrop::vdnet
