#include "calibra/mvn_em.hpp"

#include "calibra/error.hpp"

#include <cmath>
#include <numbers>

namespace calibra {

namespace {

MvnParams m_step_unchecked(const SufficientStats& stats) {
  if (stats.n < 2) throw PreconditionError("M-step needs at least two cases");
  const double n = static_cast<double>(stats.n);
  MvnParams p;
  p.mu = stats.t1 / n;
  p.sigma = SymMatrix(stats.t2.matrix() / n - p.mu * p.mu.transpose());
  return p;
}

double max_abs(const MvnParams& p) {
  return std::max(p.mu.cwiseAbs().maxCoeff(), p.sigma.matrix().cwiseAbs().maxCoeff());
}

double relative_change(const MvnParams& prev, const MvnParams& next) {
  const double diff = std::max((next.mu - prev.mu).cwiseAbs().maxCoeff(),
                               (next.sigma.matrix() - prev.sigma.matrix()).cwiseAbs().maxCoeff());
  return diff / std::max(max_abs(prev), 1e-300);
}

void gather(const Eigen::MatrixXd& values, Index row, const std::vector<Index>& idx,
            Eigen::VectorXd& out) {
  out.resize(static_cast<Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out(static_cast<Index>(a)) = values(row, idx[a]);
}

}  // namespace

SufficientStats e_step(const DataMatrix& data, const MvnParams& params) {
  return e_step(data.values(), analyze_patterns(compute_mask(data)), params);
}

SufficientStats e_step(const Eigen::MatrixXd& values, const PatternSummary& patterns,
                       const MvnParams& params) {
  const Index k = values.cols();
  if (params.dim() != k) throw PreconditionError("parameter dimension does not match data");
  Eigen::VectorXd t1 = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd t2 = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd row(k), yo;
  params.validate();

  for (const auto& pat : patterns.patterns) {
    const auto obs = pat.observed_indices();
    if (pat.complete()) {
      for (Index i : pat.rows) {
        row = values.row(i).transpose();
        t1 += row;
        t2.noalias() += row * row.transpose();
      }
      continue;
    }
    const ConditionalMvn cond = conditional_mvn(params, obs);
    for (Index i : pat.rows) {
      gather(values, i, obs, yo);
      const Eigen::VectorXd fill = cond.mean_given(yo);
      for (std::size_t a = 0; a < obs.size(); ++a) row(obs[a]) = yo(static_cast<Index>(a));
      for (std::size_t a = 0; a < cond.targets.size(); ++a)
        row(cond.targets[a]) = fill(static_cast<Index>(a));
      t1 += row;
      t2.noalias() += row * row.transpose();
    }
    const double count = static_cast<double>(pat.rows.size());
    for (std::size_t a = 0; a < cond.targets.size(); ++a)
      for (std::size_t b = 0; b < cond.targets.size(); ++b)
        t2(cond.targets[a], cond.targets[b]) +=
            count * cond.residual_cov(static_cast<Index>(a), static_cast<Index>(b));
  }
  return SufficientStats{t1, SymMatrix(t2), values.rows()};
}

MvnParams m_step(const SufficientStats& stats) {
  MvnParams p = m_step_unchecked(stats);
  if (!is_positive_definite(p.sigma))
    throw DegenerateCovarianceError("M-step covariance is not positive definite");
  return p;
}

MvnParams moment_init(const DataMatrix& data) {
  const Index k = data.cols();
  MvnParams p;
  p.mu.resize(k);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
  for (Index j = 0; j < k; ++j) {
    double sum = 0.0, sq = 0.0;
    Index n = 0;
    for (Index i = 0; i < data.rows(); ++i) {
      if (data.is_missing(i, j)) continue;
      sum += data(i, j);
      ++n;
    }
    if (n < 2) throw PreconditionError("column '" + data.column(j).name + "' has fewer than 2 observed values");
    const double mean = sum / static_cast<double>(n);
    for (Index i = 0; i < data.rows(); ++i)
      if (!data.is_missing(i, j)) sq += (data(i, j) - mean) * (data(i, j) - mean);
    p.mu(j) = mean;
    s(j, j) = sq / static_cast<double>(n);
    if (!(s(j, j) > 0.0))
      throw DegenerateCovarianceError("column '" + data.column(j).name + "' has zero observed variance");
  }
  p.sigma = SymMatrix(s);
  return p;
}

EmResult fit_em(const DataMatrix& data, const std::optional<MvnParams>& init, const EmOptions& options) {
  if (!(options.tol > 0.0)) throw PreconditionError("EM tolerance must be positive");
  if (options.max_iter < 1) throw PreconditionError("EM needs at least one iteration");
  const MissingMask mask = compute_mask(data);
  for (Index j = 0; j < data.cols(); ++j)
    if (mask.observed_count(j) < 2)
      throw PreconditionError("column '" + data.column(j).name + "' has fewer than 2 observed values");
  const PatternSummary patterns = analyze_patterns(mask);
  const Eigen::MatrixXd& y = data.values();

  EmResult result;
  if (!mask.any_missing()) {
    // E-step is the identity: a single M-step gives the ML estimate.
    result.params = m_step(e_step(y, patterns, moment_init(data)));
    result.loglik_trace.push_back(observed_loglik(y, patterns, result.params));
    result.iterations = 1;
    result.converged = true;
    return result;
  }

  MvnParams current = init ? *init : moment_init(data);
  if (current.dim() != data.cols()) throw PreconditionError("initial parameters have the wrong dimension");
  current.validate();
  double ll = observed_loglik(y, patterns, current);
  result.loglik_trace.push_back(ll);
  bool ridge_used = false;

  for (int it = 1; it <= options.max_iter; ++it) {
    const SufficientStats stats = e_step(y, patterns, current);
    MvnParams next = m_step_unchecked(stats);
    if (!is_positive_definite(next.sigma)) {
      if (ridge_used) throw DegenerateCovarianceError("EM covariance lost positive definiteness");
      const double ridge = 1e-10 * next.sigma.matrix().trace() / static_cast<double>(data.cols());
      Eigen::MatrixXd s = next.sigma.matrix();
      s.diagonal().array() += ridge;
      next.sigma = SymMatrix(s);
      if (!is_positive_definite(next.sigma))
        throw DegenerateCovarianceError("EM covariance is degenerate");
      ridge_used = true;
      result.warnings.push_back("ridge of " + format_double(ridge) + " added to covariance diagonal at iteration " +
                                std::to_string(it));
    }
    const double ll_next = observed_loglik(y, patterns, next);
    result.loglik_trace.push_back(ll_next);
    const double change = relative_change(current, next);
    current = std::move(next);
    result.iterations = it;
    const bool ll_done = std::abs(ll_next - ll) < options.tol;
    ll = ll_next;
    if (ll_done && change < options.param_tol) {
      result.converged = true;
      break;
    }
  }
  result.params = std::move(current);
  return result;
}

double observed_loglik(const DataMatrix& data, const MvnParams& params) {
  return observed_loglik(data.values(), analyze_patterns(compute_mask(data)), params);
}

double observed_loglik(const Eigen::MatrixXd& values, const PatternSummary& patterns,
                       const MvnParams& params) {
  if (params.dim() != values.cols()) throw PreconditionError("parameter dimension does not match data");
  params.validate();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  Eigen::VectorXd yo;
  for (const auto& pat : patterns.patterns) {
    const auto obs = pat.observed_indices();
    if (obs.empty()) continue;
    const SymMatrix s = params.sigma.block(obs);
    const Eigen::MatrixXd l = cholesky(s);
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    Eigen::VectorXd mo(static_cast<Index>(obs.size()));
    for (std::size_t a = 0; a < obs.size(); ++a) mo(static_cast<Index>(a)) = params.mu(obs[a]);
    const double base = static_cast<double>(obs.size()) * log2pi + logdet;
    for (Index i : pat.rows) {
      gather(values, i, obs, yo);
      const Eigen::VectorXd z = l.triangularView<Eigen::Lower>().solve(yo - mo);
      total += -0.5 * (base + z.squaredNorm());
    }
  }
  return total;
}

Eigen::VectorXd pack_params(const MvnParams& params) {
  const Index k = params.dim();
  Eigen::VectorXd out(k + k * (k + 1) / 2);
  out.head(k) = params.mu;
  Index pos = k;
  for (Index l = 0; l < k; ++l)
    for (Index j = l; j < k; ++j) out(pos++) = params.sigma(j, l);
  return out;
}

MvnParams unpack_params(const Eigen::VectorXd& packed, Index dim) {
  if (packed.size() != dim + dim * (dim + 1) / 2) throw PreconditionError("packed parameter size mismatch");
  MvnParams p;
  p.mu = packed.head(dim);
  Eigen::MatrixXd s(dim, dim);
  Index pos = dim;
  for (Index l = 0; l < dim; ++l)
    for (Index j = l; j < dim; ++j) {
      s(j, l) = packed(pos);
      s(l, j) = packed(pos);
      ++pos;
    }
  p.sigma = SymMatrix(s);
  return p;
}

Eigen::VectorXd observed_score(const DataMatrix& data, const MvnParams& params) {
  const Index k = data.cols();
  params.validate();
  const PatternSummary patterns = analyze_patterns(compute_mask(data));
  Eigen::VectorXd dmu = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);  // d loglik / d Sigma_jl, entries treated as free
  Eigen::VectorXd yo;
  for (const auto& pat : patterns.patterns) {
    const auto obs = pat.observed_indices();
    if (obs.empty()) continue;
    const auto no = static_cast<Index>(obs.size());
    const Eigen::MatrixXd inv = inverse_spd(params.sigma.block(obs)).matrix();
    Eigen::VectorXd mo(no);
    for (Index a = 0; a < no; ++a) mo(a) = params.mu(obs[a]);
    Eigen::VectorXd sum_w = Eigen::VectorXd::Zero(no);
    Eigen::MatrixXd sum_ww = Eigen::MatrixXd::Zero(no, no);
    for (Index i : pat.rows) {
      gather(data.values(), i, obs, yo);
      const Eigen::VectorXd w = inv * (yo - mo);
      sum_w += w;
      sum_ww.noalias() += w * w.transpose();
    }
    const double count = static_cast<double>(pat.rows.size());
    const Eigen::MatrixXd gb = 0.5 * (sum_ww - count * inv);
    for (Index a = 0; a < no; ++a) {
      dmu(obs[a]) += sum_w(a);
      for (Index b = 0; b < no; ++b) g(obs[a], obs[b]) += gb(a, b);
    }
  }
  Eigen::VectorXd out(k + k * (k + 1) / 2);
  out.head(k) = dmu;
  Index pos = k;
  for (Index l = 0; l < k; ++l)
    for (Index j = l; j < k; ++j) out(pos++) = (j == l) ? g(j, j) : g(j, l) + g(l, j);
  return out;
}

nlohmann::json to_json(const EmResult& result, const std::vector<std::string>& columns) {
  const Index k = result.params.dim();
  std::vector<double> mu(result.params.mu.data(), result.params.mu.data() + k);
  std::vector<double> sigma;
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) sigma.push_back(result.params.sigma(i, j));
  return nlohmann::json{{"columns", columns},       {"mu", mu},
                        {"sigma", sigma},           {"trace", result.loglik_trace},
                        {"iterations", result.iterations}, {"converged", result.converged},
                        {"warnings", result.warnings}};
}

}  // namespace calibra
