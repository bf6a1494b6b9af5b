#include <gtest/gtest.h>

#include "vdrop/checkpoint.hpp"
#include "vdrop/errors.hpp"

using namespace vdrop;

namespace {

vdnet::Network mixed_net() {
  vdnet::NetworkConfig cfg{{3, 4, 2, 1},
                           {vdnet::LayerMode::multiplicative, vdnet::LayerMode::additive,
                            vdnet::LayerMode::deterministic},
                           vdnet::Activation::relu,
                           0.25};
  auto net = vdnet::Network::initialise(cfg, 17);
  net.layers()[2].bias(0) = 1.0 / 3.0;
  return net;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto net = mixed_net();
  vdnet::TrainConfig tcfg;
  tcfg.seed = 123;
  tcfg.optimizer = vdnet::Optimizer::momentum;
  const auto j = io::checkpoint_json(net, tcfg);
  const auto text = j.dump();
  const auto back = io::network_from_checkpoint(io::parse_json_text(text, "mem"));
  EXPECT_EQ(back.fingerprint(), net.fingerprint());
  EXPECT_EQ(back.config().sigma_n, 0.25);
  EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 123u);
  EXPECT_EQ(j.at("layers")[1].at("noise_kind"), "log_sigma");
  EXPECT_EQ(j.at("layers")[2].at("noise_kind"), "none");
  const auto t = io::train_config_from_json(j.at("train"));
  EXPECT_EQ(t.optimizer, vdnet::Optimizer::momentum);
  EXPECT_EQ(t.seed, 123u);
}

TEST(Checkpoint, TrainConfigDefaultsFillMissingFields) {
  const auto t = io::train_config_from_json(nlohmann::json{{"epochs", 5}});
  EXPECT_EQ(t.epochs, 5);
  EXPECT_EQ(t.learning_rate, vdnet::TrainConfig{}.learning_rate);
  EXPECT_THROW(io::train_config_from_json(nlohmann::json{{"epochs", "many"}}), ConfigError);
  EXPECT_THROW(io::train_config_from_json(nlohmann::json{{"epochs", 0}}), ConfigError);
}

TEST(Checkpoint, RejectsInconsistentDocuments) {
  auto j = io::checkpoint_json(mixed_net(), {});
  auto wrong_version = j;
  wrong_version["schema_version"] = 99;
  EXPECT_THROW(io::network_from_checkpoint(wrong_version), ConfigError);
  auto short_theta = j;
  short_theta["layers"][0]["theta"].erase(0);
  EXPECT_THROW(io::network_from_checkpoint(short_theta), ConfigError);
  auto missing_layer = j;
  missing_layer["layers"].erase(2);
  EXPECT_THROW(io::network_from_checkpoint(missing_layer), ConfigError);
}

TEST(Checkpoint, ParseErrorsCarryLineAndColumn) {
  try {
    io::parse_json_text("{\n  \"a\": 1,\n  \"b\": ]\n}", "cfg.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("cfg.json:3:", 0), 0u) << e.what();
  }
  EXPECT_THROW(io::read_json_file("/nonexistent/cfg.json"), ConfigError);
}

}  // namespace
