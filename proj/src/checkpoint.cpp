#include "vdrop/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "vdrop/errors.hpp"

namespace vdrop::io {

using nlohmann::json;
using vdnet::DenseVDLayer;
using vdnet::LayerMode;
using vdnet::Matrix;
using vdnet::Vector;

namespace {

json row_major(const Matrix& m) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
  }
  return arr;
}

Matrix from_row_major(const json& arr, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols) {
    throw ConfigError(std::string("checkpoint: '") + what + "' must hold " + std::to_string(rows * cols) +
                      " numbers");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = arr.at(i * cols + j).get<double>();
  }
  return m;
}

std::string noise_kind(LayerMode mode) {
  switch (mode) {
    case LayerMode::multiplicative: return "log_alpha";
    case LayerMode::additive: return "log_sigma";
    case LayerMode::deterministic: return "none";
  }
  return "none";
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
void optional_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  out = field<T>(j, key);
}

}  // namespace

json to_json(const vdnet::NetworkConfig& cfg) {
  json modes = json::array();
  for (auto m : cfg.modes) modes.push_back(vdnet::to_string(m));
  return {{"layer_sizes", cfg.layer_sizes},
          {"modes", modes},
          {"activation", vdnet::to_string(cfg.activation)},
          {"sigma_n", cfg.sigma_n}};
}

json to_json(const vdnet::TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate}, {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},       {"seed", cfg.seed},
          {"kl_scale", cfg.kl_scale},           {"prior_c", cfg.prior_c},
          {"optimizer", vdnet::to_string(cfg.optimizer)},
          {"momentum", cfg.momentum},           {"lr_decay", cfg.lr_decay}};
}

json to_json(const DenseVDLayer& layer) {
  return {{"mode", vdnet::to_string(layer.mode)},
          {"in", layer.in()},
          {"out", layer.out()},
          {"noise_kind", noise_kind(layer.mode)},
          {"theta", row_major(layer.theta)},
          {"noise", layer.noisy() ? row_major(layer.noise) : json::array()},
          {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}};
}

vdnet::NetworkConfig network_config_from_json(const json& j) {
  vdnet::NetworkConfig cfg;
  cfg.layer_sizes = field<std::vector<int>>(j, "layer_sizes");
  for (const auto& m : field<std::vector<std::string>>(j, "modes")) cfg.modes.push_back(vdnet::parse_layer_mode(m));
  if (j.contains("activation")) cfg.activation = vdnet::parse_activation(field<std::string>(j, "activation"));
  optional_field(j, "sigma_n", cfg.sigma_n);
  cfg.validate();
  return cfg;
}

vdnet::TrainConfig train_config_from_json(const json& j) {
  vdnet::TrainConfig cfg;
  optional_field(j, "learning_rate", cfg.learning_rate);
  optional_field(j, "epochs", cfg.epochs);
  optional_field(j, "batch_size", cfg.batch_size);
  optional_field(j, "seed", cfg.seed);
  optional_field(j, "kl_scale", cfg.kl_scale);
  optional_field(j, "prior_c", cfg.prior_c);
  optional_field(j, "momentum", cfg.momentum);
  optional_field(j, "lr_decay", cfg.lr_decay);
  if (j.contains("optimizer")) cfg.optimizer = vdnet::parse_optimizer(field<std::string>(j, "optimizer"));
  cfg.validate();
  return cfg;
}

DenseVDLayer layer_from_json(const json& j) {
  DenseVDLayer layer;
  layer.mode = vdnet::parse_layer_mode(field<std::string>(j, "mode"));
  const auto in = field<Eigen::Index>(j, "in");
  const auto out = field<Eigen::Index>(j, "out");
  if (in < 1 || out < 1) throw ConfigError("checkpoint: layer dimensions must be positive");
  layer.theta = from_row_major(j.at("theta"), out, in, "theta");
  layer.noise = layer.noisy() ? from_row_major(j.at("noise"), out, in, "noise") : Matrix::Zero(out, in);
  layer.bias = from_row_major(j.at("bias"), out, 1, "bias").col(0);
  layer.validate();
  return layer;
}

json checkpoint_json(const vdnet::Network& net, const vdnet::TrainConfig& train_cfg) {
  json layers = json::array();
  for (const auto& layer : net.layers()) layers.push_back(to_json(layer));
  return {{"schema_version", kSchemaVersion},
          {"seed", train_cfg.seed},
          {"network", to_json(net.config())},
          {"layers", layers},
          {"train", to_json(train_cfg)}};
}

vdnet::Network network_from_checkpoint(const json& j) {
  if (field<int>(j, "schema_version") != kSchemaVersion) {
    throw ConfigError("unsupported checkpoint schema_version");
  }
  vdnet::Network net(network_config_from_json(j.at("network")));
  const auto& layers = j.at("layers");
  if (!layers.is_array() || layers.size() != net.layers().size()) {
    throw ConfigError("checkpoint: layer list does not match network config");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) net.layers()[l] = layer_from_json(layers[l]);
  try {
    net.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  return net;
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

}  // namespace vdrop::io
