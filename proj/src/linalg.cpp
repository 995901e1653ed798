#include "calibra/linalg.hpp"

#include "calibra/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace calibra {

namespace {

constexpr double kAsymmetryGate = 1e-8;
constexpr double kCholeskyPivotFloor = 1e-13;

double pivot_threshold(const SymMatrix& g, double rel_tol) {
  return rel_tol * std::max(g.max_abs_diagonal(), 1e-300);
}

void check_pivot(const SymMatrix& g, Index k, double rel_tol) {
  if (k < 0 || k >= g.dim()) throw PreconditionError("sweep pivot out of range");
  if (std::abs(g(k, k)) <= pivot_threshold(g, rel_tol))
    throw SingularPivotError("singular pivot at index " + std::to_string(k));
}

// Shared body of sweep / reverse sweep: the two differ only in the sign of
// the pivot row and column.
SymMatrix sweep_impl(const SymMatrix& g, Index k, double sign) {
  const Eigen::MatrixXd& a = g.matrix();
  const Index n = g.dim();
  const double d = a(k, k);
  Eigen::MatrixXd h(n, n);
  for (Index j = 0; j < n; ++j) {
    if (j == k) continue;
    for (Index l = j; l < n; ++l) {
      if (l == k) continue;
      const double v = a(j, l) - a(j, k) * a(k, l) / d;
      h(j, l) = v;
      h(l, j) = v;
    }
  }
  for (Index j = 0; j < n; ++j) {
    if (j == k) continue;
    const double v = sign * a(j, k) / d;
    h(j, k) = v;
    h(k, j) = v;
  }
  h(k, k) = -1.0 / d;
  return SymMatrix(h);
}

}  // namespace

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw PreconditionError("symmetric matrix must be square");
  if (m.size() > 0) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= kAsymmetryGate * scale)) throw PreconditionError("matrix is not symmetric");
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Index dim) { return SymMatrix(Eigen::MatrixXd::Identity(dim, dim)); }

SymMatrix SymMatrix::zero(Index dim) { return SymMatrix(Eigen::MatrixXd::Zero(dim, dim)); }

double SymMatrix::max_abs_diagonal() const {
  return m_.size() == 0 ? 0.0 : m_.diagonal().cwiseAbs().maxCoeff();
}

SymMatrix SymMatrix::block(std::span<const Index> idx) const {
  const auto k = static_cast<Index>(idx.size());
  Eigen::MatrixXd b(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index c = 0; c < k; ++c) b(a, c) = m_(idx[a], idx[c]);
  return SymMatrix(b);
}

void MvnParams::validate() const {
  if (mu.size() != sigma.dim()) throw PreconditionError("mean and covariance dimensions differ");
  if (!mu.allFinite()) throw PreconditionError("mean has non-finite entries");
  cholesky(sigma);
}

SymMatrix sweep(const SymMatrix& g, Index k, double rel_tol) {
  check_pivot(g, k, rel_tol);
  return sweep_impl(g, k, 1.0);
}

SymMatrix reverse_sweep(const SymMatrix& g, Index k, double rel_tol) {
  check_pivot(g, k, rel_tol);
  return sweep_impl(g, k, -1.0);
}

SymMatrix sweep(const SymMatrix& g, std::span<const Index> pivots, double rel_tol) {
  SymMatrix out = g;
  for (Index k : pivots) out = sweep(out, k, rel_tol);
  return out;
}

ConditionalMvn conditional_mvn(const MvnParams& params, std::span<const Index> observed) {
  const Index k = params.dim();
  if (params.sigma.dim() != k) throw PreconditionError("mean and covariance dimensions differ");

  std::vector<bool> is_obs(static_cast<std::size_t>(k), false);
  for (Index j : observed) {
    if (j < 0 || j >= k) throw PreconditionError("observed index out of range");
    if (is_obs[static_cast<std::size_t>(j)]) throw PreconditionError("duplicate observed index");
    is_obs[static_cast<std::size_t>(j)] = true;
  }

  if (!observed.empty() && !is_positive_definite(params.sigma.block(observed)))
    throw NotPositiveDefiniteError("covariance of the conditioning variables is not positive definite");

  ConditionalMvn out;
  out.observed.assign(observed.begin(), observed.end());
  for (Index j = 0; j < k; ++j)
    if (!is_obs[static_cast<std::size_t>(j)]) out.targets.push_back(j);

  // Augmented matrix: row/col 0 carries the mean; variable j sits at j + 1.
  Eigen::MatrixXd aug(k + 1, k + 1);
  aug(0, 0) = -1.0;
  aug.block(0, 1, 1, k) = params.mu.transpose();
  aug.block(1, 0, k, 1) = params.mu;
  aug.block(1, 1, k, k) = params.sigma.matrix();
  SymMatrix swept(aug);
  for (Index j : observed) swept = sweep(swept, j + 1);

  const auto nt = static_cast<Index>(out.targets.size());
  const auto no = static_cast<Index>(out.observed.size());
  out.intercept.resize(nt);
  out.slopes.resize(nt, no);
  Eigen::MatrixXd resid(nt, nt);
  for (Index a = 0; a < nt; ++a) {
    const Index t = out.targets[a] + 1;
    out.intercept(a) = swept(0, t);
    for (Index b = 0; b < no; ++b) out.slopes(a, b) = swept(out.observed[b] + 1, t);
    for (Index c = 0; c < nt; ++c) resid(a, c) = swept(t, out.targets[c] + 1);
  }
  out.residual_cov = SymMatrix(resid);
  if (nt > 0 && !is_positive_semidefinite(out.residual_cov))
    throw NotPositiveDefiniteError("covariance matrix is not positive semi-definite");
  return out;
}

namespace {

bool cholesky_into(const SymMatrix& g, Eigen::MatrixXd& l) {
  const Index n = g.dim();
  const Eigen::MatrixXd& a = g.matrix();
  l = Eigen::MatrixXd::Zero(n, n);
  const double floor = kCholeskyPivotFloor * std::max(g.max_abs_diagonal(), 1e-300);
  for (Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Index p = 0; p < j; ++p) d -= l(j, p) * l(j, p);
    if (!(d > floor)) return false;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Index p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
      l(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

Eigen::MatrixXd cholesky(const SymMatrix& g) {
  Eigen::MatrixXd l;
  if (!cholesky_into(g, l)) throw NotPositiveDefiniteError("matrix is not positive definite");
  return l;
}

bool is_positive_definite(const SymMatrix& g) {
  Eigen::MatrixXd l;
  return cholesky_into(g, l);
}

bool is_positive_semidefinite(const SymMatrix& g, double eig_tol) {
  if (is_positive_definite(g)) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.matrix(), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();
  return ev.minCoeff() >= -eig_tol * std::max(1.0, ev.maxCoeff());
}

Eigen::MatrixXd psd_factor(const SymMatrix& g, double eig_tol) {
  Eigen::MatrixXd l;
  if (cholesky_into(g, l)) return l;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.matrix());
  Eigen::VectorXd ev = es.eigenvalues();
  const double top = std::max(1.0, ev.size() ? ev.maxCoeff() : 0.0);
  if (ev.size() && ev.minCoeff() < -eig_tol * top)
    throw NotPositiveDefiniteError("matrix is not positive semi-definite");
  ev = ev.cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

Eigen::MatrixXd invert_lower(const Eigen::MatrixXd& l) {
  const Index n = l.rows();
  return l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
}

SymMatrix inverse_spd(const SymMatrix& g) {
  const Eigen::MatrixXd linv = invert_lower(cholesky(g));
  return SymMatrix(linv.transpose() * linv);
}

double log_det_spd(const SymMatrix& g) {
  const Eigen::MatrixXd l = cholesky(g);
  return 2.0 * l.diagonal().array().log().sum();
}

}  // namespace calibra
