#include "calibra/mvn_da.hpp"

#include "calibra/error.hpp"
#include "calibra/mvn_em.hpp"
#include "calibra/parallel.hpp"

#include <cmath>

namespace calibra {

namespace {

void require_continuous_targets(const DataMatrix& data) {
  const MissingMask mask = compute_mask(data);
  for (Index j = 0; j < data.cols(); ++j)
    if (data.column(j).kind == VariableKind::binary && mask.observed_count(j) < data.rows())
      throw PreconditionError("column '" + data.column(j).name +
                              "' is binary; the multivariate normal imputer handles continuous columns only");
}

void require_two_observed(const DataMatrix& data) {
  const MissingMask mask = compute_mask(data);
  for (Index j = 0; j < data.cols(); ++j)
    if (mask.observed_count(j) < 2)
      throw PreconditionError("column '" + data.column(j).name + "' has fewer than 2 observed values");
}

}  // namespace

void DaConfig::validate(Index dim) const {
  if (n_chains < 1) throw PreconditionError("n_chains must be at least 1");
  if (thin < 1) throw PreconditionError("thin must be at least 1");
  if (burn_in < 0) throw PreconditionError("burn_in must be non-negative");
  if (n_draws < 0) throw PreconditionError("n_draws must be non-negative");
  if (spacing_factor < 1) throw PreconditionError("spacing_factor must be at least 1");
  if (const auto* niw = std::get_if<NormalInverseWishartPrior>(&prior)) {
    if (niw->m0.size() != dim || niw->s0.dim() != dim)
      throw PreconditionError("prior hyperparameters have the wrong dimension");
    if (!(niw->k0 > 0.0)) throw PreconditionError("prior k0 must be positive");
    if (!(niw->v0 > static_cast<double>(dim) - 1.0)) throw PreconditionError("prior v0 must exceed K - 1");
    if (!is_positive_definite(niw->s0)) throw PreconditionError("prior scale S0 must be positive definite");
  }
  if (const auto* p = std::get_if<MvnParams>(&init)) {
    if (p->dim() != dim) throw PreconditionError("initial parameters have the wrong dimension");
    p->validate();
  }
}

Eigen::MatrixXd i_step(const Eigen::MatrixXd& values, const PatternSummary& patterns,
                       const MvnParams& params, RngStream& rng) {
  if (params.dim() != values.cols()) throw PreconditionError("parameter dimension does not match data");
  Eigen::MatrixXd out = values;
  Eigen::VectorXd yo;
  for (const auto& pat : patterns.patterns) {
    if (pat.complete()) continue;
    const auto obs = pat.observed_indices();
    const ConditionalMvn cond = conditional_mvn(params, obs);
    const Eigen::MatrixXd factor = psd_factor(cond.residual_cov);
    yo.resize(static_cast<Index>(obs.size()));
    for (Index i : pat.rows) {
      for (std::size_t a = 0; a < obs.size(); ++a) yo(static_cast<Index>(a)) = values(i, obs[a]);
      const Eigen::VectorXd draw = draw_mvn_factored(rng, cond.mean_given(yo), factor);
      for (std::size_t a = 0; a < cond.targets.size(); ++a)
        out(i, cond.targets[a]) = draw(static_cast<Index>(a));
    }
  }
  return out;
}

DataMatrix i_step(const DataMatrix& data, const MvnParams& params, RngStream& rng) {
  return data.completed_with(i_step(data.values(), analyze_patterns(compute_mask(data)), params, rng));
}

MvnParams p_step(const Eigen::MatrixXd& completed, const MvnPrior& prior, RngStream& rng) {
  const Index n = completed.rows();
  const Index k = completed.cols();
  if (!completed.allFinite()) throw PreconditionError("P-step needs a completed dataset");
  const Eigen::VectorXd ybar = completed.colwise().mean().transpose();
  const Eigen::MatrixXd centered = completed.rowwise() - ybar.transpose();
  const Eigen::MatrixXd scatter = centered.transpose() * centered;  // n * S

  if (std::holds_alternative<JeffreysPrior>(prior)) {
    if (n <= k) throw PreconditionError("Jeffreys prior needs more cases than variables");
    const SymMatrix scale(scatter);
    if (!is_positive_definite(scale)) throw DegenerateCovarianceError("completed-data covariance is degenerate");
    MvnParams p;
    p.sigma = draw_inv_wishart(rng, static_cast<double>(n - 1), scale);
    p.mu = draw_mvn(rng, ybar, SymMatrix(p.sigma.matrix() / static_cast<double>(n)));
    return p;
  }

  const auto& niw = std::get<NormalInverseWishartPrior>(prior);
  if (niw.m0.size() != k || niw.s0.dim() != k) throw PreconditionError("prior hyperparameters have the wrong dimension");
  const double nn = static_cast<double>(n);
  const double kn = niw.k0 + nn;
  const Eigen::VectorXd mn = (niw.k0 * niw.m0 + nn * ybar) / kn;
  const Eigen::VectorXd dev = ybar - niw.m0;
  const SymMatrix sn(niw.s0.matrix() + scatter + (niw.k0 * nn / kn) * dev * dev.transpose());
  MvnParams p;
  p.sigma = draw_inv_wishart(rng, niw.v0 + nn, sn);
  p.mu = draw_mvn(rng, mn, SymMatrix(p.sigma.matrix() / kn));
  return p;
}

MvnParams p_step(const DataMatrix& completed, const MvnPrior& prior, RngStream& rng) {
  if (completed.has_missing()) throw PreconditionError("P-step needs a completed dataset");
  return p_step(completed.values(), prior, rng);
}

MvnParams da_initial_params(const DataMatrix& data, const DaConfig& config) {
  if (const auto* p = std::get_if<MvnParams>(&config.init)) return *p;
  if (std::get<DaInit>(config.init) == DaInit::em) {
    try {
      return fit_em(data).params;
    } catch (const Error&) {
    }
  }
  return moment_init(data);
}

std::vector<DaChain> run_da(const DataMatrix& data, const DaConfig& config, const RngStream& rng) {
  config.validate(data.cols());
  require_two_observed(data);
  require_continuous_targets(data);
  const PatternSummary patterns = analyze_patterns(compute_mask(data));
  const MvnParams init = da_initial_params(data, config);
  const Eigen::MatrixXd& y = data.values();

  std::vector<DaChain> chains(static_cast<std::size_t>(config.n_chains));
  parallel_for(chains.size(), config.jobs, [&](std::size_t c) {
    RngStream s = rng.child(c);
    DaChain& chain = chains[c];
    chain.seed = s.seed();
    chain.stream_id = s.stream_id();
    chain.draws.reserve(static_cast<std::size_t>(config.n_draws));
    MvnParams params = init;
    const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.n_draws) * config.thin;
    for (long it = 1; it <= total; ++it) {
      Eigen::MatrixXd completed = i_step(y, patterns, params, s);
      params = p_step(completed, config.prior, s);
      if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
        DaDraw d{params, std::nullopt};
        if (config.keep_completed) d.completed = std::move(completed);
        chain.draws.push_back(std::move(d));
      }
    }
  });
  return chains;
}

std::vector<DataMatrix> impute_da_m(const DataMatrix& data, const DaConfig& config, int n_imputations,
                                    const RngStream& rng) {
  if (n_imputations < 1) throw PreconditionError("need at least one imputation");
  config.validate(data.cols());
  require_two_observed(data);
  std::vector<DataMatrix> out;
  out.reserve(static_cast<std::size_t>(n_imputations));
  if (!data.has_missing()) {
    for (int d = 0; d < n_imputations; ++d) out.push_back(data.completed_with(data.values()));
    return out;
  }
  require_continuous_targets(data);
  const PatternSummary patterns = analyze_patterns(compute_mask(data));
  MvnParams params = da_initial_params(data, config);
  const Eigen::MatrixXd& y = data.values();
  RngStream s = rng.child(0);
  const long spacing = static_cast<long>(config.thin) * config.spacing_factor;
  const long total = static_cast<long>(config.burn_in) + spacing * n_imputations;
  for (long it = 1; it <= total; ++it) {
    Eigen::MatrixXd completed = i_step(y, patterns, params, s);
    if (it > config.burn_in && (it - config.burn_in) % spacing == 0) out.push_back(data.completed_with(completed));
    params = p_step(completed, config.prior, s);
  }
  return out;
}

}  // namespace calibra
