#include "calibra/pspp.hpp"

#include "calibra/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace calibra {

namespace {

constexpr double kTinyVariance = 1e-300;

Eigen::MatrixXd gather_columns(const DataMatrix& data, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Index>(r), static_cast<Index>(c)) = data(rows[r], cols[c]);
  return out;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(x.cols()) = x;
  return out;
}

std::vector<Index> all_rows(Index n) {
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

Index resolve_name(const DataMatrix& data, const std::string& name) {
  const auto idx = data.column_index(name);
  if (!idx) throw InputError("unknown column '" + name + "'");
  return *idx;
}

Index resolve_outcome(const DataMatrix& data, const PsppConfig& config) {
  if (config.outcome) return resolve_name(data, *config.outcome);
  std::optional<Index> found;
  for (Index j = 0; j < data.cols(); ++j) {
    bool missing = false;
    for (Index i = 0; i < data.rows() && !missing; ++i) missing = data.is_missing(i, j);
    if (!missing) continue;
    if (found) throw PreconditionError("more than one column has missing values; name the outcome");
    found = j;
  }
  return found ? *found : data.cols() - 1;
}

double sample_sd(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(std::max<Index>(v.size() - 1, 1)));
}

double type7_quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

struct Problem {
  Eigen::MatrixXd fixed;  // [1, pstar, g]
  Eigen::MatrixXd knot;   // truncated terms
  Eigen::VectorXd y;
};

}  // namespace

Eigen::VectorXd PropensityModel::linear_predictor(const Eigen::MatrixXd& x) const {
  if (x.cols() + 1 != psi.size()) throw PreconditionError("propensity covariate count mismatch");
  return (x * psi.tail(psi.size() - 1)).array() + psi(0);
}

Eigen::VectorXd PropensityModel::pstar(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd eta = linear_predictor(x);
  if (link == BinaryLink::probit)
    for (Index i = 0; i < eta.size(); ++i) {
      const double p = inverse_link(eta(i), link);
      eta(i) = std::log(p) - std::log1p(-p);
    }
  return eta;
}

double propensity_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& missing, const Eigen::VectorXd& psi,
                         BinaryLink link) {
  return binary_loglik(with_intercept(x), Eigen::VectorXd::Ones(missing.size()) - missing, psi, link);
}

Eigen::VectorXd propensity_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& missing,
                                    const Eigen::VectorXd& psi, BinaryLink link) {
  return binary_gradient(with_intercept(x), Eigen::VectorXd::Ones(missing.size()) - missing, psi, link);
}

PropensityModel fit_propensity(const Eigen::MatrixXd& x, const Eigen::VectorXd& missing, BinaryLink link) {
  if (x.rows() != missing.size()) throw PreconditionError("covariate and indicator lengths differ");
  for (Index i = 0; i < missing.size(); ++i)
    if (missing(i) != 0.0 && missing(i) != 1.0) throw PreconditionError("missingness indicators must be 0 or 1");
  const BinaryFit fit = fit_binary_mle(with_intercept(x), Eigen::VectorXd::Ones(missing.size()) - missing, link);
  return {fit.coef, link, fit.cov};
}

Eigen::MatrixXd SplineBasis::design(const Eigen::VectorXd& pstar) const {
  Eigen::MatrixXd out(pstar.size(), dim());
  out.col(0).setOnes();
  out.col(1) = pstar;
  for (std::size_t k = 0; k < knots.size(); ++k)
    out.col(static_cast<Index>(k) + 2) = (pstar.array() - knots[k]).max(0.0);
  return out;
}

SplineBasis build_spline_basis(const Eigen::VectorXd& pstar, int k) {
  if (k < 1) throw PreconditionError("knot count must be at least 1");
  std::vector<double> sorted(pstar.data(), pstar.data() + pstar.size());
  if (std::any_of(sorted.begin(), sorted.end(), [](double v) { return !std::isfinite(v); }))
    throw PreconditionError("propensity values must be finite");
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (static_cast<int>(uniq.size()) < k + 2)
    throw PreconditionError("too few distinct propensity values for " + std::to_string(k) + " knots");
  SplineBasis basis;
  for (int j = 1; j <= k; ++j) {
    const double q = type7_quantile(sorted, static_cast<double>(j) / (k + 1.0));
    if (basis.knots.empty() || q > basis.knots.back()) basis.knots.push_back(q);
  }
  return basis;
}

void PsppConfig::validate() const {
  if (knots && *knots < 1) throw PreconditionError("knot count must be at least 1");
  if (fixed_lambda && !(*fixed_lambda > 0.0)) throw PreconditionError("fixed lambda must be positive");
  if (burn_in < 0) throw PreconditionError("burn_in must be non-negative");
  if (spacing < 1) throw PreconditionError("spacing must be at least 1");
}

PsppConfig parse_pspp_config(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("PSPP config must be a JSON object");
  PsppConfig c;
  try {
    if (j.contains("outcome") && !j.at("outcome").is_null()) c.outcome = j.at("outcome").get<std::string>();
    if (j.contains("K") && !j.at("K").is_null()) c.knots = j.at("K").get<int>();
    if (j.contains("link")) c.link = parse_binary_link(j.at("link").get<std::string>());
    if (j.contains("g_terms") && !j.at("g_terms").is_null()) c.g_terms = j.at("g_terms").get<std::vector<std::string>>();
    if (j.contains("omit_covariate") && !j.at("omit_covariate").is_null())
      c.omit_covariate = j.at("omit_covariate").get<std::string>();
    if (j.contains("burn_in")) c.burn_in = j.at("burn_in").get<int>();
    if (j.contains("spacing")) c.spacing = j.at("spacing").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid PSPP config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const PsppConfig& c) {
  nlohmann::json j{{"link", to_string(c.link)}, {"burn_in", c.burn_in}, {"spacing", c.spacing}};
  j["outcome"] = c.outcome ? nlohmann::json(*c.outcome) : nlohmann::json(nullptr);
  j["K"] = c.knots ? nlohmann::json(*c.knots) : nlohmann::json(nullptr);
  j["g_terms"] = c.g_terms ? nlohmann::json(*c.g_terms) : nlohmann::json(nullptr);
  j["omit_covariate"] = c.omit_covariate ? nlohmann::json(*c.omit_covariate) : nlohmann::json(nullptr);
  return j;
}

PenalizedSolution penalized_least_squares(const Eigen::MatrixXd& fixed, const Eigen::MatrixXd& knot,
                                          const Eigen::VectorXd& y, double lambda) {
  const Index r = fixed.rows();
  const Index qf = fixed.cols();
  const Index k = knot.cols();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(r + k, qf + k);
  a.topLeftCorner(r, qf) = fixed;
  a.topRightCorner(r, k) = knot;
  a.bottomRightCorner(k, k).diagonal().setConstant(std::sqrt(lambda));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(r + k);
  rhs.head(r) = y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols()) throw RankDeficientError("penalized spline design is rank deficient");
  PenalizedSolution s;
  s.coef = qr.solve(rhs);
  s.rss_pen = (rhs - a * s.coef).squaredNorm();
  return s;
}

namespace {

struct Profiler {
  const Problem& p;
  Eigen::VectorXd ztz_eigen;

  explicit Profiler(const Problem& prob) : p(prob) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.knot.transpose() * p.knot, Eigen::EigenvaluesOnly);
    ztz_eigen = es.eigenvalues().cwiseMax(0.0);
  }

  double operator()(double log10_lambda) const {
    const double lambda = std::pow(10.0, log10_lambda);
    const PenalizedSolution s = penalized_least_squares(p.fixed, p.knot, p.y, lambda);
    const double n = static_cast<double>(p.y.size());
    double logdet = 0.0;
    for (Index i = 0; i < ztz_eigen.size(); ++i) logdet += std::log1p(ztz_eigen(i) / lambda);
    return n * std::log(std::max(s.rss_pen / n, kTinyVariance)) + logdet;
  }
};

}  // namespace

double profile_objective(const Eigen::MatrixXd& fixed, const Eigen::MatrixXd& knot, const Eigen::VectorXd& y,
                         double log10_lambda) {
  const Problem p{fixed, knot, y};
  return Profiler(p)(log10_lambda);
}

Eigen::MatrixXd PsppFit::design(const DataMatrix& data, const std::vector<Index>& rows) const {
  const Eigen::VectorXd ps = propensity.pstar(gather_columns(data, rows, covariates));
  const Eigen::MatrixXd spline = basis.design(ps);
  Eigen::MatrixXd out(spline.rows(), spline.cols() + static_cast<Index>(g_columns.size()));
  out.leftCols(spline.cols()) = spline;
  out.rightCols(static_cast<Index>(g_columns.size())) = gather_columns(data, rows, g_columns);
  return out;
}

Eigen::VectorXd PsppFit::coefficients() const {
  Eigen::VectorXd c(beta.size() + phi.size());
  c << beta, phi;
  return c;
}

Eigen::VectorXd PsppFit::predict(const DataMatrix& data, const std::vector<Index>& rows) const {
  return design(data, rows) * coefficients();
}

PsppFit fit_pspp(const DataMatrix& data, const PsppConfig& config) {
  config.validate();
  PsppFit fit;
  fit.outcome = resolve_outcome(data, config);
  const Index n = data.rows();
  for (Index j = 0; j < data.cols(); ++j) {
    if (j == fit.outcome) continue;
    for (Index i = 0; i < n; ++i)
      if (data.is_missing(i, j))
        throw PreconditionError("covariate '" + data.column(j).name + "' has missing values");
    fit.covariates.push_back(j);
  }
  if (fit.covariates.empty()) throw PreconditionError("PSPP needs at least one covariate");

  const std::vector<Index> rows = all_rows(n);
  const Eigen::MatrixXd x = gather_columns(data, rows, fit.covariates);
  Eigen::VectorXd missing(n);
  std::vector<Index> complete;
  for (Index i = 0; i < n; ++i) {
    missing(i) = data.is_missing(i, fit.outcome) ? 1.0 : 0.0;
    if (missing(i) == 0.0) complete.push_back(i);
  }
  fit.propensity = fit_propensity(x, missing, config.link);
  const auto r = static_cast<Index>(complete.size());

  // Parametric part: the covariates minus the one most predictive of response.
  if (config.g_terms) {
    for (const auto& name : *config.g_terms) {
      const Index j = resolve_name(data, name);
      if (std::find(fit.covariates.begin(), fit.covariates.end(), j) == fit.covariates.end())
        throw PreconditionError("g term '" + name + "' is not a covariate");
      fit.g_columns.push_back(j);
    }
  } else {
    std::optional<Index> omit;
    if (config.omit_covariate) {
      if (*config.omit_covariate != "none") {
        omit = resolve_name(data, *config.omit_covariate);
        if (*omit == fit.outcome) throw PreconditionError("cannot omit the outcome");
      }
    } else {
      double best = -1.0;
      for (std::size_t a = 0; a < fit.covariates.size(); ++a) {
        const double score =
            std::abs(fit.propensity.psi(static_cast<Index>(a) + 1)) * sample_sd(x.col(static_cast<Index>(a)));
        if (score > best) {
          best = score;
          omit = fit.covariates[a];
        }
      }
    }
    for (Index j : fit.covariates)
      if (!omit || j != *omit) fit.g_columns.push_back(j);
  }

  const Eigen::VectorXd ps_all = fit.propensity.pstar(x);
  Eigen::VectorXd ps_obs(r), y(r);
  for (Index a = 0; a < r; ++a) {
    ps_obs(a) = ps_all(complete[static_cast<std::size_t>(a)]);
    y(a) = data(complete[static_cast<std::size_t>(a)], fit.outcome);
  }
  const int k = config.knots ? *config.knots : std::min<int>(35, static_cast<int>(r / 4));
  if (k < 1) throw PreconditionError("too few complete cases to place a knot");
  fit.basis = build_spline_basis(ps_obs, k);
  const Index kk = static_cast<Index>(fit.basis.knots.size());
  const auto ng = static_cast<Index>(fit.g_columns.size());
  if (r < kk + 2 + ng) throw PreconditionError("too few complete cases for the spline and g terms");

  Problem prob;
  const Eigen::MatrixXd spline = fit.basis.design(ps_obs);
  prob.fixed.resize(r, 2 + ng);
  prob.fixed.leftCols(2) = spline.leftCols(2);
  prob.fixed.rightCols(ng) = gather_columns(data, complete, fit.g_columns);
  prob.knot = spline.rightCols(kk);
  prob.y = y;
  if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(prob.fixed).rank() < prob.fixed.cols())
    throw RankDeficientError("propensity and g terms are collinear");

  double log10_lambda;
  if (config.fixed_lambda) {
    log10_lambda = std::log10(*config.fixed_lambda);
  } else {
    const Profiler f(prob);
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = kLog10LambdaMin, b = kLog10LambdaMax;
    double c = b - golden * (b - a), d = a + golden * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > 1e-6) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - golden * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + golden * (b - a);
        fd = f(d);
      }
    }
    log10_lambda = 0.5 * (a + b);
    double best = f(log10_lambda);
    for (double end : {kLog10LambdaMin, kLog10LambdaMax}) {
      const double fe = f(end);
      if (fe < best) {
        best = fe;
        log10_lambda = end;
      }
    }
    fit.lambda_at_boundary = log10_lambda - kLog10LambdaMin < 1e-3 || kLog10LambdaMax - log10_lambda < 1e-3;
  }
  fit.lambda = std::pow(10.0, log10_lambda);
  const PenalizedSolution sol = penalized_least_squares(prob.fixed, prob.knot, prob.y, fit.lambda);
  fit.beta.resize(2 + kk);
  fit.beta.head(2) = sol.coef.head(2);
  fit.beta.tail(kk) = sol.coef.tail(kk);
  fit.phi = sol.coef.segment(2, ng);
  fit.sigma2 = std::max(sol.rss_pen / static_cast<double>(r), kTinyVariance);
  fit.tau2 = fit.sigma2 / fit.lambda;
  return fit;
}

PsppMeanReport estimate_mean(const PsppFit& fit, const DataMatrix& data) {
  PsppMeanReport rep;
  std::vector<Index> mis;
  double sum_obs = 0.0;
  for (Index i = 0; i < data.rows(); ++i) {
    if (data.is_missing(i, fit.outcome)) mis.push_back(i);
    else sum_obs += data(i, fit.outcome);
  }
  rep.n_mis = static_cast<Index>(mis.size());
  rep.n_obs = data.rows() - rep.n_mis;
  if (rep.n_obs == 0) throw PreconditionError("outcome has no observed values");
  rep.mean_observed = sum_obs / static_cast<double>(rep.n_obs);
  double sum_mis = 0.0;
  if (!mis.empty()) {
    sum_mis = fit.predict(data, mis).sum();
    rep.mean_imputed = sum_mis / static_cast<double>(rep.n_mis);
  } else {
    rep.mean_imputed = std::numeric_limits<double>::quiet_NaN();
  }
  rep.mu_hat = (sum_obs + sum_mis) / static_cast<double>(data.rows());
  return rep;
}

nlohmann::json to_json(const PsppMeanReport& r) {
  return {{"mu_hat", r.mu_hat},
          {"n_obs", r.n_obs},
          {"n_mis", r.n_mis},
          {"mean_observed", r.mean_observed},
          {"mean_imputed", std::isnan(r.mean_imputed) ? nlohmann::json(nullptr) : nlohmann::json(r.mean_imputed)}};
}

PsppChain run_pspp_chain(const DataMatrix& data, const PsppConfig& config, int n_keep, RngStream& rng) {
  if (n_keep < 0) throw PreconditionError("number of retained states must be non-negative");
  config.validate();
  PsppFit fit = fit_pspp(data, config);
  const Index n = data.rows();
  const std::vector<Index> rows = all_rows(n);
  std::vector<Index> obs, mis;
  for (Index i = 0; i < n; ++i) (data.is_missing(i, fit.outcome) ? mis : obs).push_back(i);
  const auto r = static_cast<Index>(obs.size());
  const Index kk = static_cast<Index>(fit.basis.knots.size());
  if (kk < 2) throw PreconditionError("posterior draws need at least 2 knots");

  Eigen::VectorXd y_obs(r);
  for (Index a = 0; a < r; ++a) y_obs(a) = data(obs[static_cast<std::size_t>(a)], fit.outcome);
  const PropensityModel ml_prop = fit.propensity;
  const SymMatrix psi_cov(ml_prop.cov);
  const Eigen::MatrixXd psi_factor = psd_factor(psi_cov);

  Eigen::VectorXd theta = fit.coefficients();
  double sigma2 = fit.sigma2;
  double tau2 = std::max(fit.tau2, kTinyVariance);
  Eigen::MatrixXd filled = data.values();

  PsppChain chain;
  const long total = static_cast<long>(config.burn_in) + static_cast<long>(n_keep) * config.spacing;
  for (long it = 1; it <= total; ++it) {
    fit.propensity.psi = draw_mvn_factored(rng, ml_prop.psi, psi_factor);
    const Eigen::MatrixXd c_all = fit.design(data, rows);
    Eigen::MatrixXd c_obs(r, c_all.cols());
    for (Index a = 0; a < r; ++a) c_obs.row(a) = c_all.row(obs[static_cast<std::size_t>(a)]);

    Eigen::MatrixXd m = c_obs.transpose() * c_obs;
    m.diagonal().segment(2, kk).array() += sigma2 / tau2;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw RankDeficientError("spline posterior precision is singular");
    const Eigen::VectorXd mean = llt.solve(c_obs.transpose() * y_obs);
    const Eigen::VectorXd z = draw_standard_normal(rng, m.cols());
    theta = mean + std::sqrt(sigma2) * llt.matrixU().solve(z);

    sigma2 = (y_obs - c_obs * theta).squaredNorm() / draw_chisq(rng, static_cast<double>(r));
    tau2 = std::max(theta.segment(2, kk).squaredNorm() / draw_chisq(rng, static_cast<double>(kk - 1)), kTinyVariance);
    sigma2 = std::max(sigma2, kTinyVariance);

    const double sd = std::sqrt(sigma2);
    for (Index i : mis) filled(i, fit.outcome) = c_all.row(i).dot(theta) + sd * rng.normal();
    chain.sigma2_trace.push_back(sigma2);
    chain.tau2_trace.push_back(tau2);
    chain.mu_trace.push_back(filled.col(fit.outcome).mean());
    if (it > config.burn_in && (it - config.burn_in) % config.spacing == 0)
      chain.imputations.push_back(data.completed_with(filled));
  }
  return chain;
}

std::vector<DataMatrix> impute_pspp_m(const DataMatrix& data, const PsppConfig& config, int n_imputations,
                                      const RngStream& rng) {
  if (n_imputations < 1) throw PreconditionError("need at least one imputation");
  if (!data.has_missing()) return std::vector<DataMatrix>(static_cast<std::size_t>(n_imputations), data);
  RngStream s = rng.child(0);
  return run_pspp_chain(data, config, n_imputations, s).imputations;
}

}  // namespace calibra
