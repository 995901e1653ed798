#pragma once

#include "calibra/dataset.hpp"
#include "calibra/glm.hpp"
#include "calibra/random.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace calibra {

/// Response-propensity model; pstar is the logit of Pr(observed | x).
struct PropensityModel {
  Eigen::VectorXd psi;  // intercept first
  BinaryLink link = BinaryLink::logit;
  Eigen::MatrixXd cov;  // inverse information at the MLE

  Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd pstar(const Eigen::MatrixXd& x) const;
};

/// `missing(i)` is 1 when the outcome of row i is missing. The model is for
/// the probability of being observed.
PropensityModel fit_propensity(const Eigen::MatrixXd& x, const Eigen::VectorXd& missing, BinaryLink link);

/// Log-likelihood and its gradient in psi for the propensity model.
double propensity_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& missing, const Eigen::VectorXd& psi,
                         BinaryLink link);
Eigen::VectorXd propensity_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& missing,
                                    const Eigen::VectorXd& psi, BinaryLink link);

/// Truncated linear basis (1, p, (p - k_1)_+, ..., (p - k_K)_+).
struct SplineBasis {
  std::vector<double> knots;

  Index dim() const { return static_cast<Index>(knots.size()) + 2; }
  Eigen::MatrixXd design(const Eigen::VectorXd& pstar) const;
};

/// Knots at the k/(K+1) sample quantiles (linear interpolation). Tied
/// quantiles are merged, so the result may have fewer than K knots.
SplineBasis build_spline_basis(const Eigen::VectorXd& pstar, int k);

struct PsppConfig {
  std::optional<std::string> outcome;  // default: the only column with missing values
  std::optional<int> knots;            // default min(35, floor(r / 4))
  BinaryLink link = BinaryLink::logit;
  std::optional<std::vector<std::string>> g_terms;  // default: covariates minus the omitted one
  std::optional<std::string> omit_covariate;        // name or "none"
  std::optional<double> fixed_lambda;               // test hook: skip the search
  int burn_in = 100;
  int spacing = 10;

  void validate() const;
};

PsppConfig parse_pspp_config(const nlohmann::json& j);
nlohmann::json to_json(const PsppConfig& config);

struct PsppFit {
  Index outcome = 0;
  std::vector<Index> covariates;  // propensity predictors
  std::vector<Index> g_columns;   // parametric part of the outcome model
  PropensityModel propensity;
  SplineBasis basis;
  Eigen::VectorXd beta;  // spline coefficients; entries 2.. are the penalized knot terms
  Eigen::VectorXd phi;   // g coefficients
  double sigma2 = 0.0;
  double tau2 = 0.0;
  double lambda = 0.0;  // sigma2 / tau2
  bool lambda_at_boundary = false;

  /// Full design [spline basis | g columns] for the given rows.
  Eigen::MatrixXd design(const DataMatrix& data, const std::vector<Index>& rows) const;
  Eigen::VectorXd coefficients() const;
  Eigen::VectorXd predict(const DataMatrix& data, const std::vector<Index>& rows) const;
};

struct PenalizedSolution {
  Eigen::VectorXd coef;
  double rss_pen = 0.0;  // residual sum of squares plus lambda * |knot coefficients|^2
};

/// Ridge-penalized least squares on [fixed | knot] columns, penalty on the knot block only.
PenalizedSolution penalized_least_squares(const Eigen::MatrixXd& fixed, const Eigen::MatrixXd& knot,
                                          const Eigen::VectorXd& y, double lambda);

/// -2 profile log-likelihood of the mixed model (up to a constant) at log10(lambda).
double profile_objective(const Eigen::MatrixXd& fixed, const Eigen::MatrixXd& knot, const Eigen::VectorXd& y,
                         double log10_lambda);

inline constexpr double kLog10LambdaMin = -12.0;
inline constexpr double kLog10LambdaMax = 12.0;

PsppFit fit_pspp(const DataMatrix& data, const PsppConfig& config = {});

struct PsppMeanReport {
  double mu_hat = 0.0;
  Index n_obs = 0;
  Index n_mis = 0;
  double mean_observed = 0.0;
  double mean_imputed = 0.0;  // NaN when nothing is missing
};

/// Observed values plus model predictions for the missing ones, averaged.
PsppMeanReport estimate_mean(const PsppFit& fit, const DataMatrix& data);
nlohmann::json to_json(const PsppMeanReport& report);

struct PsppChain {
  std::vector<DataMatrix> imputations;
  std::vector<double> sigma2_trace;
  std::vector<double> tau2_trace;
  std::vector<double> mu_trace;  // mean of the completed outcome
};

/// Gibbs sampler started at the ML fit; keeps `n_keep` states spaced by
/// config.spacing after config.burn_in iterations.
PsppChain run_pspp_chain(const DataMatrix& data, const PsppConfig& config, int n_keep, RngStream& rng);

/// D imputations from one chain on rng.child(0).
std::vector<DataMatrix> impute_pspp_m(const DataMatrix& data, const PsppConfig& config, int n_imputations,
                                      const RngStream& rng);

}  // namespace calibra
