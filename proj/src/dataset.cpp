#include "vdrop/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "vdrop/errors.hpp"

namespace vdrop::vdnet {

namespace {

Dataset split(std::string name, const Matrix& x, const Vector& y, double test_fraction) {
  if (test_fraction < 0.0 || test_fraction >= 1.0) throw ConfigError("test_fraction must lie in [0, 1)");
  const Eigen::Index n = x.rows();
  const auto n_test = static_cast<Eigen::Index>(std::lround(test_fraction * static_cast<double>(n)));
  const Eigen::Index n_train = n - n_test;
  if (n_train < 1) throw ConfigError("dataset too small for the requested split");
  Dataset d;
  d.name = std::move(name);
  d.x_train = x.topRows(n_train);
  d.y_train = y.head(n_train);
  d.x_test = x.bottomRows(n_test);
  d.y_test = y.tail(n_test);
  return d;
}

}  // namespace

Dataset make_redundant_linear(std::uint64_t seed, int n, double sigma_n, double test_fraction) {
  if (n < 2) throw ConfigError("redundant_linear: n must be >= 2");
  constexpr int kFeatures = 10;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, kFeatures);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < kFeatures; ++j) x(i, j) = normal(rng);
    y(i) = 2.0 * x(i, 0) - 1.0 * x(i, 1) + sigma_n * normal(rng);
  }
  Dataset d = split("redundant_linear", x, y, test_fraction);
  d.signal_features = 2;
  return d;
}

Dataset make_sine(std::uint64_t seed, int n, double sigma_n, double test_fraction) {
  if (n < 2) throw ConfigError("sine: n must be >= 2");
  Rng rng(seed);
  std::uniform_real_distribution<double> uniform(-3.0, 3.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, 1);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = uniform(rng);
    y(i) = std::sin(x(i, 0)) + sigma_n * normal(rng);
  }
  return split("sine", x, y, test_fraction);
}

Dataset load_csv(const std::string& path, double test_fraction) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": missing header row");
  std::size_t cols = 1;
  for (char c : line) cols += c == ',' ? 1 : 0;
  if (cols < 2) throw ConfigError(path + ": need at least one feature and a target column");

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": cannot parse '" + cell + "'");
      }
    }
    if (row.size() != cols) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                        " columns, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": no data rows");

  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols - 1));
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j + 1 < cols; ++j) x(i, j) = rows[i][j];
    y(i) = rows[i].back();
  }
  return split(path, x, y, test_fraction);
}

}  // namespace vdrop::vdnet
