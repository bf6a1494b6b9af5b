#pragma once

#include <cstdint>
#include <string>

#include "vdrop/vdnet.hpp"

namespace vdrop::vdnet {

inline constexpr double kDefaultTestFraction = 0.25;

/// y = 2 x0 - x1 + N(0, sigma_n^2) with 8 further pure-noise features, all
/// inputs standard normal. The leading 2 columns are the signal features.
Dataset make_redundant_linear(std::uint64_t seed, int n = 200, double sigma_n = 0.1,
                              double test_fraction = kDefaultTestFraction);

/// y = sin(x) + N(0, sigma_n^2), x ~ U(-3, 3).
Dataset make_sine(std::uint64_t seed, int n = 100, double sigma_n = 0.1,
                  double test_fraction = kDefaultTestFraction);

/// CSV with a header row; the last column is the target. The trailing
/// round(test_fraction * rows) rows form the held-out split.
Dataset load_csv(const std::string& path, double test_fraction = kDefaultTestFraction);

}  // namespace vdrop::vdnet
