#include "calibra/glm.hpp"

#include "calibra/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace calibra {

namespace {

// log(1 + exp(x)) without overflow.
double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Asymptotic expansion of the lower tail.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// d/d eta of log Pr(z | eta), for z in {0, 1}.
double score_weight(double eta, double z, BinaryLink link) {
  if (link == BinaryLink::logit) return z - inverse_link(eta, link);
  // phi/Phi for z = 1, -phi/(1 - Phi) for z = 0, via log-space ratios.
  const double logphi = -0.5 * eta * eta - 0.5 * std::log(2.0 * std::numbers::pi);
  return z > 0.5 ? std::exp(logphi - log_normal_cdf(eta)) : -std::exp(logphi - log_normal_cdf(-eta));
}

double info_weight(double eta, BinaryLink link) {
  if (link == BinaryLink::logit) {
    const double p = inverse_link(eta, link);
    return p * (1.0 - p);
  }
  const double p = normal_cdf(eta);
  const double q = 1.0 - p;
  const double phi = normal_pdf(eta);
  if (p <= 0.0 || q <= 0.0) return 0.0;
  return phi * phi / (p * q);
}

}  // namespace

LinearFit fit_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw PreconditionError("design and response lengths differ");
  if (x.rows() < x.cols()) throw RankDeficientError("fewer cases than coefficients");
  const Eigen::MatrixXd xtx = x.transpose() * x;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols() || ldlt.info() != Eigen::Success) throw RankDeficientError("design matrix is rank deficient");
  LinearFit fit;
  fit.coef = qr.solve(y);
  fit.xtx_inv = ldlt.solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
  fit.xtx_inv = 0.5 * (fit.xtx_inv + fit.xtx_inv.transpose());
  fit.rss = (y - x * fit.coef).squaredNorm();
  fit.n = x.rows();
  return fit;
}

const char* to_string(BinaryLink link) { return link == BinaryLink::probit ? "probit" : "logit"; }

BinaryLink parse_binary_link(const std::string& text) {
  if (text == "logit") return BinaryLink::logit;
  if (text == "probit") return BinaryLink::probit;
  throw InputError("unknown link '" + text + "'");
}

double inverse_link(double eta, BinaryLink link) {
  if (link == BinaryLink::probit) return normal_cdf(eta);
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

double binary_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& coef,
                     BinaryLink link) {
  const Eigen::VectorXd eta = x * coef;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    if (link == BinaryLink::logit) ll += z(i) * eta(i) - log1pexp(eta(i));
    else ll += z(i) > 0.5 ? log_normal_cdf(eta(i)) : log_normal_cdf(-eta(i));
  }
  return ll;
}

Eigen::VectorXd binary_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& coef,
                                BinaryLink link) {
  const Eigen::VectorXd eta = x * coef;
  Eigen::VectorXd w(eta.size());
  for (Index i = 0; i < eta.size(); ++i) w(i) = score_weight(eta(i), z(i), link);
  return x.transpose() * w;
}

Eigen::MatrixXd binary_information(const Eigen::MatrixXd& x, const Eigen::VectorXd& coef, BinaryLink link) {
  const Eigen::VectorXd eta = x * coef;
  Eigen::VectorXd w(eta.size());
  for (Index i = 0; i < eta.size(); ++i) w(i) = info_weight(eta(i), link);
  return x.transpose() * w.asDiagonal() * x;
}

namespace {
constexpr double kSeparationProbability = 1e-10;
}  // namespace

BinaryFit fit_binary_mle(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, BinaryLink link,
                         const BinaryFitOptions& options) {
  if (x.rows() != z.size()) throw PreconditionError("design and response lengths differ");
  const double ones = z.sum();
  if (ones <= 0.0 || ones >= static_cast<double>(z.size()))
    throw PreconditionError("binary response has a single class");
  if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(x).rank() < x.cols())
    throw RankDeficientError("design matrix is rank deficient");

  BinaryFit fit;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(x.cols());
  double ll = binary_loglik(x, z, coef, link);
  for (int it = 1; it <= options.max_iter; ++it) {
    const Eigen::VectorXd grad = binary_gradient(x, z, coef, link);
    fit.gradient_norm = grad.norm();
    if (fit.gradient_norm < options.gradient_tol) {
      // A vanishing gradient with fitted probabilities pinned at 0 or 1 is separation, not an MLE.
      const Eigen::VectorXd eta = x * coef;
      for (Index i = 0; i < eta.size(); ++i) {
        const double p = inverse_link(eta(i), link);
        if (std::min(p, 1.0 - p) < kSeparationProbability)
          throw SeparationError("fitted probabilities reached 0 or 1; the outcome is separated");
      }
      fit.iterations = it - 1;
      fit.coef = coef;
      const Eigen::MatrixXd info = binary_information(x, coef, link);
      fit.cov = info.ldlt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
      fit.cov = 0.5 * (fit.cov + fit.cov.transpose());
      return fit;
    }
    const Eigen::MatrixXd info = binary_information(x, coef, link);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
      throw SeparationError("information matrix became singular; the outcome is separated");
    Eigen::VectorXd step = ldlt.solve(grad);
    double scale = 1.0;
    Eigen::VectorXd next = coef + step;
    double ll_next = binary_loglik(x, z, next, link);
    while (!(ll_next >= ll - 1e-12 * std::abs(ll)) && scale > 1e-10) {
      scale *= 0.5;
      next = coef + scale * step;
      ll_next = binary_loglik(x, z, next, link);
    }
    coef = next;
    ll = ll_next;
    if (coef.norm() > options.divergence_norm)
      throw SeparationError("coefficient norm exceeded " + std::to_string(options.divergence_norm) +
                            "; the outcome is separated");
  }
  throw SeparationError("binary regression did not converge; the outcome may be separated");
}

}  // namespace calibra
