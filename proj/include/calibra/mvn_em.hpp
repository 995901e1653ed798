#pragma once

#include "calibra/dataset.hpp"
#include "calibra/linalg.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace calibra {

/// Expected complete-data sufficient statistics of the multivariate normal.
struct SufficientStats {
  Eigen::VectorXd t1;  // expected column sums
  SymMatrix t2;        // expected cross-product sums
  Index n = 0;
};

struct EmOptions {
  double tol = 1e-8;         // absolute loglikelihood change
  double param_tol = 1e-6;   // max-norm parameter change relative to max-norm of parameters
  int max_iter = 1000;
};

struct EmResult {
  MvnParams params;
  std::vector<double> loglik_trace;  // loglik of the starting point, then one entry per iteration
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Expected sufficient statistics given current parameters. Rows are handled
/// pattern by pattern so each distinct pattern is swept once.
SufficientStats e_step(const DataMatrix& data, const MvnParams& params);
SufficientStats e_step(const Eigen::MatrixXd& values, const PatternSummary& patterns,
                       const MvnParams& params);

/// ML parameters from sufficient statistics (denominator n).
/// Throws DegenerateCovarianceError when the covariance is not positive definite.
MvnParams m_step(const SufficientStats& stats);

/// Available-case means and variances, zero covariances.
MvnParams moment_init(const DataMatrix& data);

EmResult fit_em(const DataMatrix& data, const std::optional<MvnParams>& init = std::nullopt,
                const EmOptions& options = {});

/// Sum over rows of the log density of each row's observed sub-vector.
double observed_loglik(const DataMatrix& data, const MvnParams& params);
double observed_loglik(const Eigen::MatrixXd& values, const PatternSummary& patterns,
                       const MvnParams& params);

/// Gradient of observed_loglik with respect to (mu, lower triangle of Sigma
/// listed column by column). Off-diagonal covariances are single parameters.
Eigen::VectorXd observed_score(const DataMatrix& data, const MvnParams& params);

/// Pack / unpack (mu, lower triangle of Sigma) in the same order as observed_score.
Eigen::VectorXd pack_params(const MvnParams& params);
MvnParams unpack_params(const Eigen::VectorXd& packed, Index dim);

/// {"columns", "mu", "sigma" (row-major), "trace", "iterations", "converged", "warnings"}.
nlohmann::json to_json(const EmResult& result, const std::vector<std::string>& columns);

}  // namespace calibra
