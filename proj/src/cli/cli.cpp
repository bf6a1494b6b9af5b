#include "vdrop/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "table.hpp"
#include "vdrop/checkpoint.hpp"
#include "vdrop/dataset.hpp"
#include "vdrop/kl_core.hpp"
#include "vdrop/posterior_probe.hpp"
#include "vdrop/specfun.hpp"
#include "vdrop/verification.hpp"
#include "vdrop/vdnet.hpp"

namespace vdrop::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kOracleTerms = 400;

std::string verdict(const probe::DivergenceReport& d) { return d.divergent ? "divergent" : "not divergent"; }

// ---------------------------------------------------------------- kl-table

struct KlTableOptions {
  double u_min = 0.0;
  double u_max = 50.0;
  int points = 101;
  std::string grid = "linear";
  double c = 1.0;
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = 0;
};

std::vector<double> kl_grid(const KlTableOptions& o) {
  std::vector<double> us;
  if (o.grid == "linear") {
    for (int i = 0; i < o.points; ++i) {
      us.push_back(i == o.points - 1 ? o.u_max : o.u_min + (o.u_max - o.u_min) * i / (o.points - 1));
    }
    return us;
  }
  // Log grid; a zero lower end is kept as the first row, followed by a
  // geometric grid from u_max * 1e-6.
  double lo = o.u_min;
  int n = o.points;
  if (lo == 0.0) {
    us.push_back(0.0);
    lo = o.u_max * 1e-6;
    --n;
  }
  for (int i = 0; i < n; ++i) {
    us.push_back(n == 1 ? o.u_max : (i == n - 1 ? o.u_max : lo * std::pow(o.u_max / lo, double(i) / (n - 1))));
  }
  return us;
}

int cmd_kl_table(const KlTableOptions& o, std::ostream& out) {
  if (!(o.u_min >= 0.0) || !(o.u_min < o.u_max) || !std::isfinite(o.u_max)) {
    throw UsageError("kl-table: need 0 <= u-min < u-max");
  }
  if (o.points < 2) throw UsageError("kl-table: need points >= 2");
  if (o.grid != "linear" && o.grid != "log") throw UsageError("kl-table: grid must be linear or log");
  if (!(o.c > 0.0) || !std::isfinite(o.c)) throw UsageError("kl-table: c must be finite and > 0");
  if (o.u_max > kl::kMaxU) throw UsageError("kl-table: u-max must not exceed 1e8");
  const auto format = parse_format(o.format);

  const kl::PriorConstant prior(o.c);
  Table table;
  table.meta["command"] = "kl-table";
  table.meta["seed"] = o.seed;
  table.meta["c"] = o.c;
  table.meta["grid"] = o.grid;
  table.meta["u_min"] = o.u_min;
  table.meta["u_max"] = o.u_max;
  table.meta["points"] = o.points;
  table.meta["oracle_terms"] = kOracleTerms;
  table.columns = {"u", "kl_value", "kl_grad_u", "series_oracle_diff"};
  for (double u : kl_grid(o)) {
    const double value = kl::kl_value(u, prior);
    const double diff = u <= kl::kSeriesOracleMaxU
                            ? std::abs(value - kl::kl_series_oracle(u, prior, kOracleTerms))
                            : std::numeric_limits<double>::quiet_NaN();
    table.rows.push_back({u, value, kl::kl_grad_u(u), diff});
  }
  write_output(o.out, render(table, format), out);
  return kExitOk;
}

// ------------------------------------------------------------------ verify

struct VerifyCliOptions {
  std::uint64_t seed = 42;
  std::int64_t mc_samples = 1000000;
  std::string format = "csv";
  std::string out;
  double inject_digamma_fault = 0.0;
};

class DigammaFault {
 public:
  explicit DigammaFault(double delta) { specfun::testing::set_digamma_perturbation(delta); }
  ~DigammaFault() { specfun::testing::set_digamma_perturbation(0.0); }
  DigammaFault(const DigammaFault&) = delete;
  DigammaFault& operator=(const DigammaFault&) = delete;
};

int cmd_verify(const VerifyCliOptions& o, std::ostream& out, std::ostream& err) {
  if (o.mc_samples < 1000) throw UsageError("verify: mc-samples must be >= 1000");
  const auto format = parse_format(o.format);

  std::vector<verify::CheckResult> results;
  {
    DigammaFault fault(o.inject_digamma_fault);
    results = verify::run_verification({o.seed, o.mc_samples});
  }

  std::vector<std::string> failed;
  for (const auto& r : results) {
    if (!r.passed) failed.push_back(r.name);
  }

  std::string report;
  if (format == Format::json) {
    ordered_json doc;
    doc["command"] = "verify";
    doc["seed"] = o.seed;
    doc["mc_samples"] = o.mc_samples;
    if (o.inject_digamma_fault != 0.0) doc["injected_digamma_fault"] = o.inject_digamma_fault;
    doc["passed"] = failed.empty();
    doc["failed"] = failed;
    ordered_json checks = ordered_json::array();
    for (const auto& r : results) {
      checks.push_back({{"name", r.name},
                        {"passed", r.passed},
                        {"error", format_number(r.error)},
                        {"tolerance", r.tolerance},
                        {"detail", r.detail}});
    }
    doc["checks"] = std::move(checks);
    report = doc.dump(2) + "\n";
  } else {
    std::ostringstream os;
    os << "# command=verify\n# seed=" << o.seed << "\n# mc_samples=" << o.mc_samples << "\n";
    if (o.inject_digamma_fault != 0.0) os << "# injected_digamma_fault=" << format_number(o.inject_digamma_fault) << "\n";
    os << "name,status,error,tolerance,detail\n";
    for (const auto& r : results) {
      os << r.name << "," << (r.passed ? "PASS" : "FAIL") << "," << format_number(r.error) << ","
         << format_number(r.tolerance) << ",\"" << r.detail << "\"\n";
    }
    report = os.str();
  }
  write_output(o.out, report, out);

  if (!o.out.empty() && o.out != "-") {
    for (const auto& r : results) out << (r.passed ? "PASS " : "FAIL ") << r.name << "\n";
  }
  if (!failed.empty()) {
    err << "verify: " << failed.size() << " of " << results.size() << " checks failed:";
    for (const auto& name : failed) err << " " << name;
    err << "\n";
    return kExitVerifyFailed;
  }
  return kExitOk;
}

// ------------------------------------------------------------------- probe

struct ProbeOptions {
  std::string kind = "logistic-tail";
  double k = 10.0;
  double K = 10.0 * std::exp(8.0);
  int points = 8;
  double delta = 1e-8;
  double delta0 = 1.0;
  std::string lik = "sigmoid";
  double y = 0.0;
  double c = 1.0;
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = 0;
};

probe::Likelihood1D probe_likelihood(const ProbeOptions& o) {
  if (o.lik == "sigmoid") return probe::logistic_likelihood(1.0, 1);
  if (o.lik == "gaussian") return probe::gaussian_likelihood(o.y, 1.0);
  if (o.lik == "constant") return probe::constant_likelihood(1.0);
  throw UsageError("probe: lik must be sigmoid, gaussian or constant");
}

int cmd_probe(const ProbeOptions& o, std::ostream& out) {
  const auto format = parse_format(o.format);
  if (!(o.c > 0.0) || !std::isfinite(o.c)) throw UsageError("probe: c must be finite and > 0");
  if (o.points < 4) throw UsageError("probe: points must be >= 4");

  Table table;
  table.meta["command"] = "probe";
  table.meta["kind"] = o.kind;
  table.meta["seed"] = o.seed;
  table.meta["c"] = o.c;
  table.meta["points"] = o.points;

  probe::ProbeRun run;
  if (o.kind == "logistic-tail") {
    if (!(o.k > 0.0) || !(o.K > o.k) || !std::isfinite(o.K)) {
      throw UsageError("probe: logistic-tail needs 0 < k < K (got k=" + format_number(o.k) +
                       ", K=" + format_number(o.K) + ")");
    }
    table.meta["k"] = o.k;
    table.meta["K"] = o.K;
    run = probe::logistic_tail_probe(o.k, o.K, o.points, o.c);
  } else if (o.kind == "origin") {
    if (!(o.delta > 0.0) || !(o.delta < o.delta0) || !std::isfinite(o.delta0)) {
      throw UsageError("probe: origin needs 0 < delta < delta0");
    }
    const auto lik = probe_likelihood(o);
    table.meta["likelihood"] = lik.label;
    table.meta["delta"] = o.delta;
    table.meta["delta0"] = o.delta0;
    run = probe::origin_probe(lik, o.delta, o.delta0, o.points, o.c);
  } else {
    throw UsageError("probe: kind must be origin or logistic-tail");
  }

  const auto& d = run.divergence;
  table.meta["slope"] = d.slope;
  table.meta["intercept"] = d.intercept;
  table.meta["r_squared"] = d.r_squared;
  table.meta["threshold"] = d.threshold;
  table.meta["monotone"] = d.monotone;
  table.meta["verdict"] = verdict(d);
  table.columns = {"lo", "hi", "log_scale", "estimate", "lower_bound", "abs_err", "slope"};
  for (std::size_t i = 0; i < run.reports.size(); ++i) {
    const auto& r = run.reports[i];
    table.rows.push_back({r.lo, r.hi, run.log_scale[i], r.estimate,
                          r.lower_bound.value_or(std::numeric_limits<double>::quiet_NaN()), r.abs_err, d.slope});
  }
  write_output(o.out, render(table, format), out);
  if (!o.out.empty() && o.out != "-") {
    out << "slope=" << format_number(d.slope) << " r_squared=" << format_number(d.r_squared)
        << " verdict=" << verdict(d) << "\n";
  }
  return kExitOk;
}

// ------------------------------------------------------------ train/sparsity

vdnet::Dataset dataset_from_json(const json& spec) {
  const std::string name = spec.value("name", "");
  const double test_fraction = spec.value("test_fraction", vdnet::kDefaultTestFraction);
  const auto seed = spec.value<std::uint64_t>("seed", 0);
  if (name == "redundant_linear") {
    return vdnet::make_redundant_linear(seed, spec.value("n", 200), spec.value("sigma_n", 0.1), test_fraction);
  }
  if (name == "sine") {
    return vdnet::make_sine(seed, spec.value("n", 100), spec.value("sigma_n", 0.1), test_fraction);
  }
  if (name == "csv") {
    if (!spec.contains("path")) throw ConfigError("dataset: csv needs a 'path'");
    return vdnet::load_csv(spec.at("path").get<std::string>(), test_fraction);
  }
  throw ConfigError("dataset: unknown name '" + name + "' (expected redundant_linear, sine or csv)");
}

struct SparsityFiles {
  std::string csv;
  std::string json;
};

SparsityFiles render_sparsity(const vdnet::SparsityReport& rep, std::uint64_t seed) {
  Table table;
  table.meta["command"] = "sparsity";
  table.meta["seed"] = seed;
  table.meta["threshold"] = rep.threshold;
  table.meta["pruned"] = rep.pruned;
  table.meta["total"] = rep.total;
  table.meta["pruned_fraction"] = rep.pruned_fraction;
  table.meta["rmse_before"] = rep.rmse_before;
  table.meta["rmse_after"] = rep.rmse_after;
  table.columns = {"layer", "row", "col", "log10_alpha", "pruned"};
  for (std::size_t l = 0; l < rep.log10_alpha.size(); ++l) {
    const auto& a = rep.log10_alpha[l];
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        table.rows.push_back({double(l), double(i), double(j), a(i, j), a(i, j) > rep.threshold ? 1.0 : 0.0});
      }
    }
  }
  return {render(table, Format::csv), render(table, Format::json)};
}

struct TrainOptions {
  std::string config;
  std::string out = "vdrop_run";
  std::optional<std::uint64_t> seed;
};

struct EffectiveTrainConfig {
  std::uint64_t seed = 0;
  json dataset;
  vdnet::NetworkConfig network;
  vdnet::TrainConfig train;
  double threshold = vdnet::kDefaultPruneThreshold;

  json to_json() const {
    return {{"seed", seed},
            {"dataset", dataset},
            {"network", io::to_json(network)},
            {"train", io::to_json(train)},
            {"sparsity", {{"threshold", threshold}}}};
  }
};

EffectiveTrainConfig resolve_train_config(const json& doc, std::optional<std::uint64_t> seed_flag) {
  if (!doc.is_object()) throw ConfigError("train config must be a JSON object");
  for (const char* key : {"dataset", "network"}) {
    if (!doc.contains(key)) throw ConfigError(std::string("train config: missing section '") + key + "'");
  }
  EffectiveTrainConfig cfg;
  try {
    cfg.seed = seed_flag ? *seed_flag : doc.value<std::uint64_t>("seed", 0);
    cfg.dataset = doc.at("dataset");
    if (!cfg.dataset.contains("seed")) cfg.dataset["seed"] = cfg.seed;
    cfg.network = io::network_config_from_json(doc.at("network"));
    cfg.train = io::train_config_from_json(doc.value("train", json::object()));
    cfg.train.seed = cfg.seed;
    if (doc.contains("sparsity")) cfg.threshold = doc.at("sparsity").value("threshold", cfg.threshold);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return cfg;
}

std::string trace_csv(const std::vector<vdnet::EpochRecord>& trace, std::uint64_t seed, const json& config) {
  std::ostringstream os;
  os << "# command=train\n# seed=" << seed << "\n# config=" << config.dump() << "\n";
  os << "epoch,objective,kl_total,rmse_train,rmse_test,min_weight_kl\n";
  for (const auto& r : trace) {
    os << r.epoch << "," << format_number(r.objective) << "," << format_number(r.kl_total) << ","
       << format_number(r.rmse_train) << "," << format_number(r.rmse_test) << "," << format_number(r.min_weight_kl)
       << "\n";
  }
  return os.str();
}

bool has_noisy_layer(const vdnet::Network& net) {
  return std::any_of(net.layers().begin(), net.layers().end(), [](const auto& l) { return l.noisy(); });
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
  const auto cfg = resolve_train_config(io::read_json_file(o.config), o.seed);
  const json effective = cfg.to_json();
  out << effective.dump(2) << "\n";

  const auto data = dataset_from_json(cfg.dataset);
  if (data.x_train.cols() != cfg.network.layer_sizes.front()) {
    throw ConfigError("network input width " + std::to_string(cfg.network.layer_sizes.front()) +
                      " does not match dataset feature count " + std::to_string(data.x_train.cols()));
  }
  const auto result = vdnet::train(cfg.network, cfg.train, data);

  std::error_code ec;
  std::filesystem::create_directories(o.out, ec);
  if (ec) throw IoError("cannot create output directory '" + o.out + "': " + ec.message());
  const std::filesystem::path dir(o.out);

  json ckpt = io::checkpoint_json(result.model, cfg.train);
  ckpt["dataset"] = cfg.dataset;
  ckpt["config"] = effective;
  ckpt["metrics"] = {{"rmse_train", result.model.rmse(data.x_train, data.y_train)},
                     {"rmse_test", result.model.rmse(data.x_test, data.y_test)},
                     {"kl_total", result.model.kl_total(kl::PriorConstant(cfg.train.prior_c))}};
  write_output((dir / "checkpoint.json").string(), ckpt.dump(2) + "\n", out);
  write_output((dir / "trace.csv").string(), trace_csv(result.trace, cfg.seed, effective), out);

  if (has_noisy_layer(result.model)) {
    const auto rep = vdnet::sparsity_report(result.model, data.x_test, data.y_test, cfg.threshold);
    const auto files = render_sparsity(rep, cfg.seed);
    write_output((dir / "sparsity.csv").string(), files.csv, out);
    write_output((dir / "sparsity.json").string(), files.json, out);
    out << "sparsity: pruned " << rep.pruned << "/" << rep.total << " rmse_test " << format_number(rep.rmse_before)
        << " -> " << format_number(rep.rmse_after) << "\n";
  } else {
    out << "sparsity: skipped (no noisy layers)\n";
  }
  out << "wrote " << o.out << "\n";
  return kExitOk;
}

struct SparsityOptions {
  std::string checkpoint;
  double threshold = vdnet::kDefaultPruneThreshold;
  std::string format = "csv";
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_sparsity(const SparsityOptions& o, std::ostream& out) {
  const auto format = parse_format(o.format);
  if (!std::isfinite(o.threshold)) throw UsageError("sparsity: threshold must be finite");
  const json ckpt = io::read_json_file(o.checkpoint);
  const auto net = io::network_from_checkpoint(ckpt);
  if (!ckpt.contains("dataset")) throw ConfigError("checkpoint '" + o.checkpoint + "' has no dataset record");
  const auto data = dataset_from_json(ckpt.at("dataset"));
  const std::uint64_t seed = o.seed ? *o.seed : ckpt.value<std::uint64_t>("seed", 0);
  const auto rep = vdnet::sparsity_report(net, data.x_test, data.y_test, o.threshold);
  const auto files = render_sparsity(rep, seed);
  write_output(o.out, format == Format::csv ? files.csv : files.json, out);
  return kExitOk;
}

// -------------------------------------------------------------------- app

const char* kKlTableHelp =
    "Tabulate the exact KL and its gradient.\n"
    "Columns: u, kl_value, kl_grad_u, series_oracle_diff (|kl_value - naive series|, nan for u > 30).";
const char* kVerifyHelp =
    "Run the oracle suite. Exit 0 iff every check passes.\n"
    "Columns: name, status, error, tolerance, detail.";
const char* kProbeHelp =
    "Integrate C/|w| * likelihood over growing regions and classify the growth.\n"
    "Columns: lo, hi, log_scale (log K or log 1/delta), estimate, lower_bound, abs_err, slope (fitted, repeated).";
const char* kTrainHelp =
    "Train a variational dropout network from a JSON config.\n"
    "Writes checkpoint.json, trace.csv (epoch, objective, kl_total, rmse_train, rmse_test, min_weight_kl)\n"
    "and sparsity.csv/json (layer, row, col, log10_alpha, pruned).";
const char* kSparsityHelp =
    "Prune a checkpoint at a log10 alpha threshold.\n"
    "Columns: layer, row, col, log10_alpha, pruned.";

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact KL tooling for variational Gaussian dropout", "vdrop"};
  app.require_subcommand(1);

  KlTableOptions kt;
  auto* kl_table = app.add_subcommand("kl-table", kKlTableHelp);
  kl_table->add_option("--u-min", kt.u_min, "Smallest u")->capture_default_str();
  kl_table->add_option("--u-max", kt.u_max, "Largest u")->capture_default_str();
  kl_table->add_option("--points", kt.points, "Number of rows")->capture_default_str();
  kl_table->add_option("--grid", kt.grid, "linear or log")->capture_default_str();
  kl_table->add_option("--c", kt.c, "Prior constant C")->capture_default_str();
  kl_table->add_option("--format", kt.format, "csv or json")->capture_default_str();
  kl_table->add_option("--out", kt.out, "Output file (stdout if omitted)");
  kl_table->add_option("--seed", kt.seed, "Recorded in the header")->capture_default_str();

  VerifyCliOptions vo;
  auto* verify_cmd = app.add_subcommand("verify", kVerifyHelp);
  verify_cmd->add_option("--seed", vo.seed, "Monte Carlo seed")->capture_default_str();
  verify_cmd->add_option("--mc-samples", vo.mc_samples, "Monte Carlo sample count")->capture_default_str();
  verify_cmd->add_option("--format", vo.format, "csv or json")->capture_default_str();
  verify_cmd->add_option("--out", vo.out, "Report file (stdout if omitted)");
  verify_cmd->add_option("--inject-digamma-fault", vo.inject_digamma_fault)->group("");

  ProbeOptions po;
  auto* probe_cmd = app.add_subcommand("probe", kProbeHelp);
  probe_cmd->add_option("--kind", po.kind, "origin or logistic-tail")->capture_default_str();
  probe_cmd->add_option("--k", po.k, "Tail start (logistic-tail)")->capture_default_str();
  probe_cmd->add_option("--K", po.K, "Largest tail end (logistic-tail)")->capture_default_str();
  probe_cmd->add_option("--points", po.points, "Grid points")->capture_default_str();
  probe_cmd->add_option("--delta", po.delta, "Smallest inner radius (origin)")->capture_default_str();
  probe_cmd->add_option("--delta0", po.delta0, "Outer radius (origin)")->capture_default_str();
  probe_cmd->add_option("--lik", po.lik, "sigmoid, gaussian or constant (origin)")->capture_default_str();
  probe_cmd->add_option("--y", po.y, "Observation for the gaussian likelihood")->capture_default_str();
  probe_cmd->add_option("--c", po.c, "Prior constant C")->capture_default_str();
  probe_cmd->add_option("--format", po.format, "csv or json")->capture_default_str();
  probe_cmd->add_option("--out", po.out, "Output file (stdout if omitted)");
  probe_cmd->add_option("--seed", po.seed, "Recorded in the header")->capture_default_str();

  TrainOptions to;
  auto* train_cmd = app.add_subcommand("train", kTrainHelp);
  train_cmd->add_option("--config", to.config, "JSON run config")->required();
  train_cmd->add_option("--out", to.out, "Output directory")->capture_default_str();
  train_cmd->add_option("--seed", to.seed, "Overrides the config seed");

  SparsityOptions so;
  auto* sparsity_cmd = app.add_subcommand("sparsity", kSparsityHelp);
  sparsity_cmd->add_option("--checkpoint", so.checkpoint, "checkpoint.json from train")->required();
  sparsity_cmd->add_option("--threshold", so.threshold, "log10 alpha pruning threshold")->capture_default_str();
  sparsity_cmd->add_option("--format", so.format, "csv or json")->capture_default_str();
  sparsity_cmd->add_option("--out", so.out, "Output file (stdout if omitted)");
  sparsity_cmd->add_option("--seed", so.seed, "Recorded in the header (default: checkpoint seed)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (kl_table->parsed()) return cmd_kl_table(kt, out);
  if (verify_cmd->parsed()) return cmd_verify(vo, out, err);
  if (probe_cmd->parsed()) return cmd_probe(po, out);
  if (train_cmd->parsed()) return cmd_train(to, out);
  return cmd_sparsity(so, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PreconditionError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace vdrop::cli
