#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vdrop/checkpoint.hpp"
#include "vdrop/cli.hpp"
#include "vdrop/dataset.hpp"
#include "vdrop/kl_core.hpp"

namespace fs = std::filesystem;
using vdrop::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vdrop_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& mode, int epochs) {
    const auto path = dir_ / ("config_" + mode + ".json");
    std::ofstream(path) << R"({"seed": 5,
      "dataset": {"name": "redundant_linear", "seed": 2, "n": 60},
      "network": {"layer_sizes": [10, 1], "modes": [")"
                        << mode << R"("], "activation": "identity"},
      "train": {"epochs": )" << epochs
                        << R"(, "learning_rate": 0.01},
      "sparsity": {"threshold": 3}})";
    return path;
  }

  fs::path dir_;
};

TEST_F(CliTest, KlTableRows) {
  const auto r = invoke({"kl-table", "--u-min", "0", "--u-max", "30", "--points", "61", "--seed", "9"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# seed=9"), std::string::npos);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 62u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"u", "kl_value", "kl_grad_u", "series_oracle_diff"}));
  EXPECT_EQ(std::stod(rows[1][2]), 1.0);
  double prev = -1e300;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = std::stod(rows[i][1]);
    EXPECT_GT(v, prev);
    prev = v;
    EXPECT_LE(std::stod(rows[i][3]), 1e-9);
  }
}

TEST_F(CliTest, KlTableJsonAndLogGrid) {
  const auto out = dir_ / "t.json";
  const auto r = invoke({"kl-table", "--grid", "log", "--u-max", "100", "--points", "5", "--format", "json",
                         "--out", out.string(), "--c", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(out));
  ASSERT_EQ(j.at("rows").size(), 5u);
  EXPECT_EQ(j["rows"][0]["u"], 0.0);
  EXPECT_EQ(j["rows"][4]["series_oracle_diff"], "nan");  // u = 100 is outside the naive-series range
  EXPECT_NEAR(j["rows"][4]["kl_value"].get<double>(), vdrop::kl::kl_value(100.0) - std::log(2.0), 1e-15);
}

TEST_F(CliTest, KlTableUsageErrors) {
  EXPECT_EQ(invoke({"kl-table", "--u-min", "5", "--u-max", "1"}).code, vdrop::cli::kExitUsage);
  EXPECT_EQ(invoke({"kl-table", "--points", "1"}).code, vdrop::cli::kExitUsage);
  EXPECT_EQ(invoke({"kl-table", "--format", "xml"}).code, vdrop::cli::kExitUsage);
  EXPECT_EQ(invoke({"kl-table", "--bogus"}).code, vdrop::cli::kExitUsage);
  EXPECT_EQ(invoke({"kl-table", "--out", "/nonexistent/dir/t.csv"}).code, vdrop::cli::kExitUsage);
  EXPECT_EQ(invoke({}).code, vdrop::cli::kExitUsage);
}

TEST_F(CliTest, VerifyPassesAndListsChecks) {
  const auto report = dir_ / "verify.json";
  const auto r = invoke({"verify", "--mc-samples", "100000", "--format", "json", "--out", report.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(report));
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_GE(j.at("checks").size(), 10u);
  EXPECT_EQ(j.at("seed"), 42);
}

TEST_F(CliTest, VerifyNamesDigammaChecksUnderFaultInjection) {
  const auto r = invoke({"verify", "--mc-samples", "10000", "--inject-digamma-fault", "1e-3"});
  EXPECT_EQ(r.code, vdrop::cli::kExitVerifyFailed);
  EXPECT_NE(r.err.find("digamma_harmonic"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("digamma_half"), std::string::npos) << r.err;
  // The hook is reset afterwards.
  EXPECT_EQ(invoke({"verify", "--mc-samples", "10000"}).code, 0);
}

TEST_F(CliTest, ProbeLogisticTailDefaults) {
  const auto r = invoke({"probe", "--seed", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# verdict=divergent"), std::string::npos);
  EXPECT_NE(r.out.find("# seed=4"), std::string::npos);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"lo", "hi", "log_scale", "estimate", "lower_bound", "abs_err", "slope"}));
}

TEST_F(CliTest, ProbeOriginGaussian) {
  const auto r = invoke({"probe", "--kind", "origin", "--lik", "gaussian", "--y", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# verdict=divergent"), std::string::npos);
}

TEST_F(CliTest, ProbeEdgeInputWritesNothing) {
  const auto out = dir_ / "probe.csv";
  const auto r = invoke({"probe", "--k", "10", "--K", "10", "--out", out.string()});
  EXPECT_EQ(r.code, vdrop::cli::kExitUsage);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(invoke({"probe", "--kind", "origin", "--lik", "nope"}).code, vdrop::cli::kExitUsage);
  EXPECT_EQ(invoke({"probe", "--points", "3"}).code, vdrop::cli::kExitUsage);
}

TEST_F(CliTest, TrainIsReproducibleAndRoundTrips) {
  const auto cfg = write_config("additive", 300);
  const auto a = dir_ / "a", b = dir_ / "b";
  const auto ra = invoke({"train", "--config", cfg.string(), "--out", a.string()});
  ASSERT_EQ(ra.code, 0) << ra.err;
  EXPECT_NE(ra.out.find("\"seed\": 5"), std::string::npos);  // effective config echo
  ASSERT_EQ(invoke({"train", "--config", cfg.string(), "--out", b.string()}).code, 0);
  EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
  EXPECT_NE(slurp(a / "trace.csv").find("# seed=5"), std::string::npos);
  for (const char* f : {"checkpoint.json", "trace.csv", "sparsity.csv", "sparsity.json"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  const auto trace = csv_rows(slurp(a / "trace.csv"));
  EXPECT_EQ(trace.size(), 301u);
  EXPECT_EQ(trace[0][0], "epoch");

  // Re-reading the checkpoint reproduces the reported held-out RMSE.
  const auto ckpt = vdrop::io::read_json_file((a / "checkpoint.json").string());
  const auto net = vdrop::io::network_from_checkpoint(ckpt);
  const auto data = vdrop::vdnet::make_redundant_linear(2, 60);
  EXPECT_NEAR(net.rmse(data.x_test, data.y_test), ckpt["metrics"]["rmse_test"].get<double>(), 1e-12);

  const auto rs = invoke({"sparsity", "--checkpoint", (a / "checkpoint.json").string(), "--threshold", "-100"});
  ASSERT_EQ(rs.code, 0) << rs.err;
  EXPECT_NE(rs.out.find("# pruned_fraction=1"), std::string::npos);
  EXPECT_NE(rs.out.find("# seed=5"), std::string::npos);
}

TEST_F(CliTest, TrainSeedFlagOverridesConfig) {
  const auto cfg = write_config("multiplicative", 20);
  const auto r = invoke({"train", "--config", cfg.string(), "--out", (dir_ / "s").string(), "--seed", "77"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(dir_ / "s" / "trace.csv").find("# seed=77"), std::string::npos);
}

TEST_F(CliTest, TrainConfigErrors) {
  const auto broken = dir_ / "broken.json";
  std::ofstream(broken) << "{\n  \"seed\": 1,\n  \"network\": {,\n}";
  const auto r = invoke({"train", "--config", broken.string(), "--out", (dir_ / "x").string()});
  EXPECT_EQ(r.code, vdrop::cli::kExitUsage);
  EXPECT_NE(r.err.find("broken.json:3:"), std::string::npos) << r.err;

  const auto bad_dataset = dir_ / "bad_dataset.json";
  std::ofstream(bad_dataset) << R"({"dataset": {"name": "mnist"},
    "network": {"layer_sizes": [10, 1], "modes": ["additive"]}})";
  EXPECT_EQ(invoke({"train", "--config", bad_dataset.string()}).code, vdrop::cli::kExitUsage);
  EXPECT_EQ(invoke({"train", "--config", (dir_ / "missing.json").string()}).code, vdrop::cli::kExitUsage);
  EXPECT_EQ(invoke({"train"}).code, vdrop::cli::kExitUsage);
}

TEST_F(CliTest, TrainDivergenceIsNumericalError) {
  const auto cfg = dir_ / "explode.json";
  std::ofstream(cfg) << R"({"seed": 1, "dataset": {"name": "sine", "n": 40},
    "network": {"layer_sizes": [1, 16, 1], "modes": ["deterministic", "deterministic"]},
    "train": {"epochs": 200, "learning_rate": 1e6, "optimizer": "sgd"}})";
  const auto r = invoke({"train", "--config", cfg.string(), "--out", (dir_ / "e").string()});
  EXPECT_EQ(r.code, vdrop::cli::kExitNumerical) << r.err;
}

}  // namespace
