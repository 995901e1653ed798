#include "calibra/random.hpp"

#include "calibra/error.hpp"

#include <cmath>

namespace calibra {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x63616C69u};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::child(std::uint64_t id) const {
  const std::uint64_t derived = splitmix64(seed_ ^ splitmix64(stream_id_ + 0xA5A5A5A5ULL));
  return RngStream(derived, id);
}

double RngStream::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double RngStream::normal() { return normal_(engine_); }

double RngStream::gamma(double shape, double scale) {
  return std::gamma_distribution<double>(shape, scale)(engine_);
}

std::size_t RngStream::uniform_index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

Eigen::VectorXd draw_standard_normal(RngStream& rng, Index n) {
  Eigen::VectorXd z(n);
  for (Index i = 0; i < n; ++i) z(i) = rng.normal();
  return z;
}

Eigen::VectorXd draw_mvn(RngStream& rng, const Eigen::VectorXd& mean, const SymMatrix& cov) {
  if (cov.dim() != mean.size()) throw PreconditionError("mean and covariance dimensions differ");
  return draw_mvn_factored(rng, mean, psd_factor(cov));
}

Eigen::VectorXd draw_mvn_factored(RngStream& rng, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& factor) {
  const Eigen::VectorXd z = draw_standard_normal(rng, factor.cols());
  return mean + factor * z;
}

SymMatrix draw_inv_wishart(RngStream& rng, double df, const SymMatrix& scale) {
  const Index p = scale.dim();
  if (!(df > static_cast<double>(p) - 1.0))
    throw PreconditionError("inverse-Wishart degrees of freedom must exceed dim - 1");
  const Eigen::MatrixXd u = cholesky(scale);

  // Bartlett factor A of a Wishart(df, I) draw W = A A^T.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (Index i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(draw_chisq(rng, df - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  // X = U W^{-1} U^T = (U A^{-T}) (U A^{-T})^T.
  const Eigen::MatrixXd b = u * invert_lower(a).transpose();
  return SymMatrix(b * b.transpose());
}

double draw_chisq(RngStream& rng, double df) {
  if (!(df > 0.0)) throw PreconditionError("chi-squared degrees of freedom must be positive");
  return rng.gamma(0.5 * df, 2.0);
}

int draw_bernoulli(RngStream& rng, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("Bernoulli probability outside [0, 1]");
  return rng.uniform() < p ? 1 : 0;
}

}  // namespace calibra
