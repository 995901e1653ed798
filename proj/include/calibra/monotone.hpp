#pragma once

#include "calibra/dataset.hpp"
#include "calibra/linalg.hpp"
#include "calibra/random.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace calibra {

/// Maps the values of Y_1..Y_{k-1} for one case to the regression features
/// of block k (intercept excluded). An empty function means the identity,
/// i.e. a linear additive regression.
using BlockDesign = std::function<Eigen::VectorXd(const Eigen::VectorXd& preceding)>;

struct FactoredOptions {
  std::vector<BlockDesign> designs;  // per block; missing or empty entries are linear
};

/// Regression of Y_k on (1, features of Y_1..Y_{k-1}) fitted on the r_k cases
/// with Y_1..Y_k observed.
struct RegressionBlock {
  Eigen::VectorXd coef;      // intercept first
  double residual_var = 0.0; // RSS / r_k
  Index cases = 0;           // r_k
  Eigen::MatrixXd xtx_inv;
};

struct FactoredParams {
  std::vector<RegressionBlock> blocks;
};

struct FactoredFit {
  FactoredParams ml;
  /// Implied (mu, Sigma) for linear blocks; absent when a custom design is used.
  std::optional<MvnParams> derived;
};

/// Factored-likelihood ML for data that are monotone in their column order.
FactoredFit fit_factored_ml(const DataMatrix& data, const FactoredOptions& options = {});

/// Back-substitutes linear block parameters into (mu, Sigma).
MvnParams derive_mvn(const FactoredParams& params);

/// One posterior draw of every block under the uniform reference prior:
/// sigma2 = r * s2 / chi2_{r - q}, coef ~ N(coef_hat, sigma2 (X^T X)^{-1}).
FactoredParams draw_block_params(const FactoredParams& ml, RngStream& rng);

/// Posterior draws of the implied (mu, Sigma) for linear monotone data.
/// Draw d uses stream rng.child(d).
std::vector<MvnParams> draw_factored_posterior(const DataMatrix& data, int n_draws, const RngStream& rng);

struct MonotoneImputeOptions {
  FactoredOptions design;
  bool fix_at_ml = false;       // test hook: use ML parameters instead of draws
  bool suppress_noise = false;  // test hook: impute regression predictions
};

/// D completed datasets; imputation d uses stream rng.child(d).
std::vector<DataMatrix> impute_monotone_m(const DataMatrix& data, int n_imputations, const RngStream& rng,
                                          const MonotoneImputeOptions& options = {});

}  // namespace calibra
