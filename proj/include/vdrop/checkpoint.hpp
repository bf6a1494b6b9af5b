#pragma once

// JSON (de)serialisation of networks, configs and run records.
//
// Checkpoint schema (version 1):
//   { "schema_version": 1, "seed": <uint>,
//     "network": { "layer_sizes": [...], "modes": [...], "activation": "...", "sigma_n": <real> },
//     "layers": [ { "mode": "...", "in": n, "out": m, "noise_kind": "log_alpha" | "log_sigma" | "none",
//                   "theta": [row-major out*in], "noise": [row-major out*in], "bias": [out] } ],
//     "train": { ...TrainConfig... },
//     "dataset": { ...dataset settings... },      (optional, written by the CLI)
//     "metrics": { "rmse_train": .., "rmse_test": .. } }  (optional)

#include <json.hpp>
#include <string>

#include "vdrop/vdnet.hpp"

namespace vdrop::io {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const vdnet::NetworkConfig& cfg);
nlohmann::json to_json(const vdnet::TrainConfig& cfg);
nlohmann::json to_json(const vdnet::DenseVDLayer& layer);

vdnet::NetworkConfig network_config_from_json(const nlohmann::json& j);
// Fields missing from `j` keep the TrainConfig defaults.
vdnet::TrainConfig train_config_from_json(const nlohmann::json& j);
vdnet::DenseVDLayer layer_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_json(const vdnet::Network& net, const vdnet::TrainConfig& train_cfg);
vdnet::Network network_from_checkpoint(const nlohmann::json& j);

/// Parses a JSON document, reporting syntax errors as ConfigError with
/// "<source>:<line>:<column>" context.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);
nlohmann::json read_json_file(const std::string& path);

}  // namespace vdrop::io
