#pragma once

#include "calibra/linalg.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <utility>

namespace calibra {

/// Complete-data point estimate and covariance from one imputed dataset.
struct PerImputationEstimate {
  Eigen::VectorXd theta_hat;
  SymMatrix v_hat;
};

/// Combined inference over D imputations. Degrees of freedom are
/// component-wise; +infinity marks a component with no between-imputation
/// variance.
struct PooledEstimate {
  int d = 0;
  Eigen::VectorXd theta_bar;
  Eigen::MatrixXd v_bar;
  Eigen::MatrixXd b;
  Eigen::MatrixXd t_total;
  Eigen::VectorXd df;
  Eigen::VectorXd fmi;
};

/// Rubin's rules: theta_bar = mean theta_hat, V_bar = mean V, B = sample
/// covariance of theta_hat (divisor D - 1), T = V_bar + (1 + 1/D) B.
/// df is Rubin-Schenker; with `nu_com` it is the Barnard-Rubin small-sample form.
PooledEstimate pool(std::span<const PerImputationEstimate> estimates,
                    std::optional<double> nu_com = std::nullopt);

/// Student-t (normal when df is infinite) interval for one component.
std::pair<double, double> interval(const PooledEstimate& pooled, Index component, double level);

/// Quantile of Student's t; the normal quantile when df is infinite.
double t_quantile(double df, double p);

nlohmann::json to_json(const PooledEstimate& pooled, double level);

}  // namespace calibra
