#pragma once

#include "calibra/dataset.hpp"
#include "calibra/linalg.hpp"
#include "calibra/random.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace testing {

using calibra::Index;

inline constexpr double NA = std::numeric_limits<double>::quiet_NaN();

inline std::string fixture(const std::string& name) { return std::string(CALIBRA_FIXTURE_DIR) + "/" + name; }

inline calibra::DataMatrix make_data(const Eigen::MatrixXd& values, std::vector<std::string> names = {}) {
  std::vector<calibra::VariableMeta> meta;
  for (Index j = 0; j < values.cols(); ++j)
    meta.push_back({names.empty() ? "y" + std::to_string(j + 1) : names[static_cast<std::size_t>(j)],
                    calibra::VariableKind::continuous});
  return calibra::DataMatrix(values, meta);
}

inline Eigen::MatrixXd random_spd(calibra::RngStream& rng, Index dim) {
  Eigen::MatrixXd a(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) a(i, j) = rng.normal();
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(dim, dim);
}

inline Eigen::MatrixXd mvn_sample(calibra::RngStream& rng, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                  Index n) {
  const Eigen::MatrixXd l = sigma.llt().matrixL();
  Eigen::MatrixXd out(n, mu.size());
  for (Index i = 0; i < n; ++i) {
    Eigen::VectorXd z(mu.size());
    for (Index j = 0; j < mu.size(); ++j) z(j) = rng.normal();
    out.row(i) = (mu + l * z).transpose();
  }
  return out;
}

/// Running mean and standard error of a scalar sample.
struct Moments {
  double sum = 0.0, sum2 = 0.0;
  long n = 0;
  void add(double x) {
    sum += x;
    sum2 += x * x;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double var() const { return (sum2 - sum * sum / static_cast<double>(n)) / static_cast<double>(n - 1); }
  double se() const { return std::sqrt(var() / static_cast<double>(n)); }
};

/// Standard error of the mean of an autocorrelated series by non-overlapping batch means.
inline double batch_se(const std::vector<double>& x, std::size_t batches = 40) {
  const std::size_t len = x.size() / batches;
  Moments m;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += x[i];
    m.add(s / static_cast<double>(len));
  }
  return m.se();
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace testing
