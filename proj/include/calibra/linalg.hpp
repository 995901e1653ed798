#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace calibra {

using Index = Eigen::Index;

/// Square symmetric matrix. Construction averages (G + G^T) / 2, so the
/// stored entries are exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Eigen::MatrixXd& m);

  static SymMatrix identity(Index dim);
  static SymMatrix zero(Index dim);

  Index dim() const { return m_.rows(); }
  double operator()(Index i, Index j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double max_abs_diagonal() const;

  /// Submatrix on the given rows/columns.
  SymMatrix block(std::span<const Index> idx) const;

 private:
  Eigen::MatrixXd m_;
};

/// Mean vector and covariance of a multivariate normal.
struct MvnParams {
  Eigen::VectorXd mu;
  SymMatrix sigma;

  Index dim() const { return mu.size(); }
  /// Dimension consistency and a successful Cholesky of sigma.
  void validate() const;
};

/// Regression of target variables on conditioning variables implied by an MVN.
struct ConditionalMvn {
  std::vector<Index> targets;
  std::vector<Index> observed;
  Eigen::VectorXd intercept;   // one per target
  Eigen::MatrixXd slopes;      // targets x observed
  SymMatrix residual_cov;      // over targets

  Eigen::VectorXd mean_given(const Eigen::VectorXd& observed_values) const {
    if (observed.empty()) return intercept;
    return intercept + slopes * observed_values;
  }
};

constexpr double kDefaultPivotTolerance = 1e-12;

/// Sweep operator on pivot k (0-based):
/// h_kk = -1/g_kk, h_jk = g_jk/g_kk, h_jl = g_jl - g_jk g_kl / g_kk.
/// Throws SingularPivotError when |g_kk| <= rel_tol * max|diag|.
SymMatrix sweep(const SymMatrix& g, Index k, double rel_tol = kDefaultPivotTolerance);
SymMatrix reverse_sweep(const SymMatrix& g, Index k, double rel_tol = kDefaultPivotTolerance);
SymMatrix sweep(const SymMatrix& g, std::span<const Index> pivots,
                double rel_tol = kDefaultPivotTolerance);

/// Conditional distribution of the variables not in `observed` given those in
/// `observed`, computed by sweeping [[-1, mu^T], [mu, Sigma]] on `observed`.
/// Requires the observed block of Sigma to be positive definite and the
/// residual covariance to be positive semi-definite; otherwise throws
/// NotPositiveDefiniteError.
ConditionalMvn conditional_mvn(const MvnParams& params, std::span<const Index> observed);

/// Lower-triangular L with L L^T = g. Throws NotPositiveDefiniteError.
Eigen::MatrixXd cholesky(const SymMatrix& g);

bool is_positive_definite(const SymMatrix& g);
bool is_positive_semidefinite(const SymMatrix& g, double eig_tol = 1e-10);

/// Factor F with F F^T = g for positive semi-definite g: Cholesky when it
/// succeeds, else a clamped eigen factor. Throws NotPositiveDefiniteError when
/// an eigenvalue is below -eig_tol * max(1, max eigenvalue).
Eigen::MatrixXd psd_factor(const SymMatrix& g, double eig_tol = 1e-10);

/// Inverse of an SPD matrix via its Cholesky factor.
SymMatrix inverse_spd(const SymMatrix& g);
double log_det_spd(const SymMatrix& g);

/// Inverse of a lower-triangular matrix with nonzero diagonal.
Eigen::MatrixXd invert_lower(const Eigen::MatrixXd& l);

}  // namespace calibra
