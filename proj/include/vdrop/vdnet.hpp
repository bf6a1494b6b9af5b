#pragma once

// Small feed-forward regression networks with variational Gaussian dropout
// layers, trained on the pseudo-ELBO with the exact log-uniform KL.
//
// Every weight carries q(w) = N(theta, s^2) with s^2 = alpha theta^2
// (multiplicative) or s^2 = exp(2 log_sigma) (additive). Forward passes use
// the local reparametrisation: each pre-activation is drawn from the Gaussian
// it induces, so one standard normal is consumed per (example, unit).

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "vdrop/kl_core.hpp"

namespace vdrop::vdnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

enum class LayerMode { multiplicative, additive, deterministic };
enum class Activation { relu, identity };
enum class Optimizer { sgd, momentum, adam };

std::string to_string(LayerMode mode);
std::string to_string(Activation act);
std::string to_string(Optimizer opt);
LayerMode parse_layer_mode(const std::string& s);
Activation parse_activation(const std::string& s);
Optimizer parse_optimizer(const std::string& s);

// Box constraints on the unconstrained noise parameters. The lower log-alpha
// bound keeps u = 1/alpha inside kl::kMaxU.
inline constexpr double kLogAlphaMax = 20.0;
inline const double kLogAlphaMin = -std::log(kl::kMaxU);
inline constexpr double kLogSigmaMin = -20.0;
inline constexpr double kLogSigmaMax = 10.0;

struct DenseVDLayer {
  LayerMode mode = LayerMode::deterministic;
  Matrix theta;  // out x in
  // log alpha (multiplicative) or log sigma (additive); ignored when deterministic.
  Matrix noise;
  Vector bias;  // out

  Eigen::Index in() const { return theta.cols(); }
  Eigen::Index out() const { return theta.rows(); }
  bool noisy() const { return mode != LayerMode::deterministic; }

  // Per-weight variance of q(w); all zeros in deterministic mode.
  Matrix weight_variance() const;
  // alpha = variance / theta^2 (+inf where theta = 0 in additive mode).
  Matrix alpha() const;
  Matrix per_weight_kl(kl::PriorConstant prior = {}) const;
  double kl_total(kl::PriorConstant prior = {}) const;

  void clamp_noise();
  void validate() const;
};

struct NetworkConfig {
  std::vector<int> layer_sizes;      // input width first, output width last
  std::vector<LayerMode> modes;      // one per weight layer
  Activation activation = Activation::relu;  // hidden layers; the output layer is linear
  double sigma_n = 0.1;              // Gaussian observation noise

  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  // Weights plus biases.
  int total_weights() const;
  void validate() const;
};

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 1000;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  double kl_scale = 1.0;  // 1 = pseudo-ELBO, 0 = likelihood only
  double prior_c = 1.0;
  Optimizer optimizer = Optimizer::adam;
  double momentum = 0.9;
  double lr_decay = 1.0;  // multiplicative per-epoch decay

  void validate() const;
};

class Network {
 public:
  Network() = default;
  explicit Network(NetworkConfig cfg);

  // theta ~ N(0, 2/fan_in), log alpha = -3, log sigma = log(0.05|theta| + 1e-8), bias = 0.
  static Network initialise(const NetworkConfig& cfg, std::uint64_t seed);

  const NetworkConfig& config() const { return cfg_; }
  std::vector<DenseVDLayer>& layers() { return layers_; }
  const std::vector<DenseVDLayer>& layers() const { return layers_; }

  // Noise-free prediction from the means.
  Vector predict_mean(const Matrix& x) const;
  double rmse(const Matrix& x, const Vector& y) const;
  double kl_total(kl::PriorConstant prior = {}) const;
  // Smallest single-weight KL across noisy layers (+inf if none).
  double min_weight_kl(kl::PriorConstant prior = {}) const;
  // Bitwise digest of all parameters; pairs a forward pass with its backward pass.
  std::uint64_t fingerprint() const;
  void validate() const;

 private:
  NetworkConfig cfg_;
  std::vector<DenseVDLayer> layers_;
};

struct LayerSample {
  Matrix mean;       // batch x out
  Matrix variance;   // batch x out
  Matrix noise;      // standard normals, batch x out (empty when deterministic)
  Matrix preact;     // mean + sqrt(variance) * noise
};

/// Samples pre-activations for one layer under the local reparametrisation.
LayerSample forward_local_reparam(const DenseVDLayer& layer, const Matrix& inputs, Rng& rng);

struct Batch {
  Matrix x;
  Vector y;
};

struct LayerTape {
  Matrix input;
  LayerSample sample;
};

struct ForwardPass {
  double objective = 0.0;
  double log_lik = 0.0;
  double kl_total = 0.0;
  std::vector<double> layer_kl;
  Vector output;
  Vector residual;  // y - output
  std::vector<LayerTape> tape;
  double likelihood_scale = 1.0;
  std::uint64_t fingerprint = 0;
  bool valid = false;
};

/// Single-sample pseudo-ELBO: likelihood_scale * sum log N(y; f(x), sigma_n^2)
/// minus kl_scale * sum of exact per-weight KL.
ForwardPass elbo_objective(const Network& net, const Batch& batch, const TrainConfig& cfg, Rng& rng,
                           double likelihood_scale = 1.0);

struct LayerGrad {
  Matrix dtheta;
  Matrix dnoise;
  Vector dbias;
};

/// Gradient of the recorded objective (ascent direction) by a reverse sweep
/// over the tape. KL contributions use the closed-form chain rules from
/// kl_core. Throws StateError when `pass` was not produced from `net` in its
/// current state.
std::vector<LayerGrad> backward(const Network& net, const ForwardPass& pass, const TrainConfig& cfg);

struct Dataset {
  std::string name;
  Matrix x_train;
  Vector y_train;
  Matrix x_test;
  Vector y_test;
  int signal_features = -1;  // leading informative columns, -1 when unknown
};

struct EpochRecord {
  int epoch = 0;
  double objective = 0.0;  // mean of the epoch's batch objectives
  double kl_total = 0.0;
  double rmse_train = 0.0;
  double rmse_test = 0.0;
  double min_weight_kl = 0.0;
};

struct TrainResult {
  Network model;
  std::vector<EpochRecord> trace;
};

TrainResult train(const NetworkConfig& net_cfg, const TrainConfig& train_cfg, const Dataset& data);

struct SparsityReport {
  std::vector<Matrix> log10_alpha;  // one per layer; empty matrix for deterministic layers
  double threshold = 3.0;
  int pruned = 0;
  int total = 0;
  double pruned_fraction = 0.0;
  double rmse_before = 0.0;
  double rmse_after = 0.0;
  Network pruned_model;
};

inline constexpr double kDefaultPruneThreshold = 3.0;

/// Prunes every weight with log10 alpha > threshold (theta := 0, noise removed)
/// and reports held-out RMSE before and after. Weights with theta = 0 have
/// log10 alpha = +inf and are always pruned.
SparsityReport sparsity_report(const Network& net, const Matrix& x_test, const Vector& y_test,
                               double threshold = kDefaultPruneThreshold);

// Correlated weight noise: w_ij = s_j theta_ij with one s_j ~ N(1, alpha_j)
// shared by every weight fed by input j.
enum class PriorScope { full_weights, scalars_only };

struct CorrelatedVDLayer {
  Matrix theta;      // out x in
  Vector row_alpha;  // in
  Vector bias;       // out, or empty
  PriorScope prior_scope = PriorScope::full_weights;

  void validate() const;
};

Matrix forward_correlated(const CorrelatedVDLayer& layer, const Matrix& inputs, Rng& rng);

struct InfiniteKL {};

struct ScalarOnlyKL {
  std::vector<kl::KlEvaluation> rows;  // KL of N(1, alpha_j) against C/|s|
  int unregularised_param_count = 0;   // theta entries plus biases
};

using CorrelatedDiagnostic = std::variant<InfiniteKL, ScalarOnlyKL>;

CorrelatedDiagnostic correlated_kl_diagnostic(const CorrelatedVDLayer& layer,
                                              kl::PriorConstant prior = {});

}  // namespace vdrop::vdnet
