#pragma once

#include <Eigen/Dense>

namespace calibra {

using Index = Eigen::Index;

struct LinearFit {
  Eigen::VectorXd coef;
  Eigen::MatrixXd xtx_inv;
  double rss = 0.0;
  Index n = 0;
};

/// Ordinary least squares. Throws RankDeficientError for a singular design.
LinearFit fit_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

enum class BinaryLink { logit, probit };

const char* to_string(BinaryLink link);
BinaryLink parse_binary_link(const std::string& text);

/// Pr(z = 1 | eta).
double inverse_link(double eta, BinaryLink link);

double binary_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& coef,
                     BinaryLink link);
Eigen::VectorXd binary_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& coef,
                                BinaryLink link);
/// Observed information for logit, expected (Fisher) information for probit.
Eigen::MatrixXd binary_information(const Eigen::MatrixXd& x, const Eigen::VectorXd& coef, BinaryLink link);

struct BinaryFit {
  Eigen::VectorXd coef;
  Eigen::MatrixXd cov;  // inverse information at the MLE
  int iterations = 0;
  double gradient_norm = 0.0;
};

struct BinaryFitOptions {
  double gradient_tol = 1e-8;
  int max_iter = 100;
  double divergence_norm = 50.0;
};

/// Maximum likelihood by Newton-Raphson (Fisher scoring for probit) with step
/// halving. Throws SeparationError if the coefficient norm exceeds
/// divergence_norm, the iteration does not converge, or the converged fit has
/// probabilities numerically at 0 or 1; PreconditionError if z
/// has a single class.
BinaryFit fit_binary_mle(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, BinaryLink link,
                         const BinaryFitOptions& options = {});

}  // namespace calibra
