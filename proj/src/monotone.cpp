#include "calibra/monotone.hpp"

#include "calibra/error.hpp"

#include <cmath>
#include <numeric>

namespace calibra {

namespace {

bool has_design(const FactoredOptions& options, std::size_t k) {
  return k < options.designs.size() && static_cast<bool>(options.designs[k]);
}

Eigen::VectorXd features(const FactoredOptions& options, std::size_t k, const Eigen::VectorXd& preceding) {
  Eigen::VectorXd f = has_design(options, k) ? options.designs[k](preceding) : preceding;
  Eigen::VectorXd x(f.size() + 1);
  x(0) = 1.0;
  x.tail(f.size()) = f;
  return x;
}

void require_monotone(const MissingMask& mask) {
  std::vector<Index> order(static_cast<std::size_t>(mask.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  if (!is_monotone_in_order(mask, order))
    throw NonMonotoneError("missingness pattern is not monotone in the given column order");
}

void require_drawable(const FactoredParams& ml) {
  for (std::size_t k = 0; k < ml.blocks.size(); ++k) {
    const auto& b = ml.blocks[k];
    const Index q = b.coef.size();
    if (b.cases <= q + 1)
      throw PreconditionError("block " + std::to_string(k + 1) + " has too few cases for posterior draws");
    if (!(b.residual_var > 0.0))
      throw PreconditionError("block " + std::to_string(k + 1) + " has zero residual variance");
  }
}

}  // namespace

FactoredFit fit_factored_ml(const DataMatrix& data, const FactoredOptions& options) {
  const MissingMask mask = compute_mask(data);
  require_monotone(mask);
  const Index kdim = data.cols();
  FactoredFit fit;
  bool linear = true;
  for (Index k = 0; k < kdim; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    linear = linear && !has_design(options, ks);
    std::vector<Index> rows;
    for (Index i = 0; i < data.rows(); ++i)
      if (!mask.missing(i, k)) rows.push_back(i);
    const auto r = static_cast<Index>(rows.size());
    if (r == 0) throw PreconditionError("column '" + data.column(k).name + "' has no observed values");

    Eigen::MatrixXd x;
    Eigen::VectorXd y(r);
    for (Index a = 0; a < r; ++a) {
      const Index i = rows[static_cast<std::size_t>(a)];
      const Eigen::VectorXd xi = features(options, ks, data.values().row(i).head(k).transpose());
      if (a == 0) x.resize(r, xi.size());
      x.row(a) = xi.transpose();
      y(a) = data(i, k);
    }
    const Index q = x.cols();
    if (r < q)
      throw PreconditionError("block " + std::to_string(k + 1) + " has fewer cases than coefficients");
    const Eigen::MatrixXd xtx = x.transpose() * x;
    Eigen::LLT<Eigen::MatrixXd> llt(xtx);
    if (llt.info() != Eigen::Success || Eigen::FullPivLU<Eigen::MatrixXd>(xtx).rank() < q)
      throw RankDeficientError("block " + std::to_string(k + 1) + " design is rank deficient");

    RegressionBlock block;
    block.coef = llt.solve(x.transpose() * y);
    block.cases = r;
    block.residual_var = (y - x * block.coef).squaredNorm() / static_cast<double>(r);
    block.xtx_inv = llt.solve(Eigen::MatrixXd::Identity(q, q));
    fit.ml.blocks.push_back(std::move(block));
  }
  if (linear) fit.derived = derive_mvn(fit.ml);
  return fit;
}

MvnParams derive_mvn(const FactoredParams& params) {
  const auto kdim = static_cast<Index>(params.blocks.size());
  Eigen::VectorXd mu(kdim);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(kdim, kdim);
  for (Index k = 0; k < kdim; ++k) {
    const auto& b = params.blocks[static_cast<std::size_t>(k)];
    if (b.coef.size() != k + 1) throw PreconditionError("block is not a linear regression on its predecessors");
    const Eigen::VectorXd slopes = b.coef.tail(k);
    mu(k) = b.coef(0) + slopes.dot(mu.head(k));
    if (k > 0) {
      const Eigen::VectorXd cross = s.topLeftCorner(k, k) * slopes;
      s.block(k, 0, 1, k) = cross.transpose();
      s.block(0, k, k, 1) = cross;
      s(k, k) = b.residual_var + slopes.dot(cross);
    } else {
      s(0, 0) = b.residual_var;
    }
  }
  return MvnParams{mu, SymMatrix(s)};
}

FactoredParams draw_block_params(const FactoredParams& ml, RngStream& rng) {
  require_drawable(ml);
  FactoredParams out;
  for (const auto& b : ml.blocks) {
    const auto q = static_cast<double>(b.coef.size());
    const auto r = static_cast<double>(b.cases);
    RegressionBlock d = b;
    d.residual_var = r * b.residual_var / draw_chisq(rng, r - q);
    d.coef = draw_mvn(rng, b.coef, SymMatrix(d.residual_var * b.xtx_inv));
    out.blocks.push_back(std::move(d));
  }
  return out;
}

std::vector<MvnParams> draw_factored_posterior(const DataMatrix& data, int n_draws, const RngStream& rng) {
  if (n_draws < 1) throw PreconditionError("need at least one posterior draw");
  const FactoredFit fit = fit_factored_ml(data);
  require_drawable(fit.ml);
  std::vector<MvnParams> draws;
  draws.reserve(static_cast<std::size_t>(n_draws));
  for (int d = 0; d < n_draws; ++d) {
    RngStream s = rng.child(static_cast<std::uint64_t>(d));
    draws.push_back(derive_mvn(draw_block_params(fit.ml, s)));
  }
  return draws;
}

std::vector<DataMatrix> impute_monotone_m(const DataMatrix& data, int n_imputations, const RngStream& rng,
                                          const MonotoneImputeOptions& options) {
  if (n_imputations < 1) throw PreconditionError("need at least one imputation");
  const MissingMask mask = compute_mask(data);
  const FactoredFit fit = fit_factored_ml(data, options.design);
  if (!options.fix_at_ml) require_drawable(fit.ml);
  std::vector<DataMatrix> out;
  out.reserve(static_cast<std::size_t>(n_imputations));
  for (int d = 0; d < n_imputations; ++d) {
    RngStream s = rng.child(static_cast<std::uint64_t>(d));
    const FactoredParams params = options.fix_at_ml ? fit.ml : draw_block_params(fit.ml, s);
    Eigen::MatrixXd y = data.values();
    for (Index k = 0; k < data.cols(); ++k) {
      const auto& b = params.blocks[static_cast<std::size_t>(k)];
      const double sd = std::sqrt(b.residual_var);
      for (Index i = 0; i < data.rows(); ++i) {
        if (!mask.missing(i, k)) continue;
        const Eigen::VectorXd x =
            features(options.design, static_cast<std::size_t>(k), y.row(i).head(k).transpose());
        double v = b.coef.dot(x);
        if (!options.suppress_noise) v += sd * s.normal();
        y(i, k) = v;
      }
    }
    out.push_back(data.completed_with(y));
  }
  return out;
}

}  // namespace calibra
