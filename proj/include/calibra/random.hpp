#pragma once

#include "calibra/linalg.hpp"

#include <cstdint>
#include <random>

namespace calibra {

/// Seeded random stream. The same (seed, stream_id) pair always yields the
/// same variate sequence; child streams are derived by hashing the parent
/// identity with the child id, so chains and replicates drawn from one master
/// seed never share generator state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  RngStream child(std::uint64_t id) const;

  double uniform();  // [0, 1)
  double normal();
  double gamma(double shape, double scale);
  std::size_t uniform_index(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

Eigen::VectorXd draw_standard_normal(RngStream& rng, Index n);

/// mean + F z with F F^T = cov (see psd_factor).
Eigen::VectorXd draw_mvn(RngStream& rng, const Eigen::VectorXd& mean, const SymMatrix& cov);

/// mean + factor * z for a precomputed factor.
Eigen::VectorXd draw_mvn_factored(RngStream& rng, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& factor);

/// Inverse-Wishart with density proportional to |X|^{-(df+p+1)/2} exp(-tr(scale X^{-1})/2);
/// E[X] = scale / (df - p - 1).
SymMatrix draw_inv_wishart(RngStream& rng, double df, const SymMatrix& scale);

double draw_chisq(RngStream& rng, double df);

int draw_bernoulli(RngStream& rng, double p);

}  // namespace calibra
