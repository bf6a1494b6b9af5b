#pragma once

// The oracle suite behind `vdrop verify`: every identity and cross-check the
// KL machinery relies on, each reduced to a named pass/fail record.

#include <cstdint>
#include <string>
#include <vector>

namespace vdrop::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double error = 0.0;      // worst observed discrepancy
  double tolerance = 0.0;  // bound it was held to
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 42;
  std::int64_t mc_samples = 1000000;
};

std::vector<CheckResult> run_verification(const VerifyOptions& opts = {});

// The 20 (mu, sigma^2) pairs used for Monte Carlo triangulation; their
// reduced parameters span [0, 50].
struct MeanVar {
  double mu;
  double sigma2;
};
std::vector<MeanVar> triangulation_pairs();

}  // namespace vdrop::verify
