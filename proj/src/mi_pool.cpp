#include "calibra/mi_pool.hpp"

#include "calibra/error.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>

namespace calibra {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rubin_schenker_df(int d, double b, double v) {
  if (b == 0.0) return kInf;
  if (v == 0.0) return d - 1.0;
  const double r = (1.0 + 1.0 / d) * b / v;
  return (d - 1.0) * (1.0 + 1.0 / r) * (1.0 + 1.0 / r);
}

double barnard_rubin_df(double nu_rs, double nu_com, double gamma) {
  const double nu_obs = (nu_com + 1.0) / (nu_com + 3.0) * nu_com * (1.0 - gamma);
  if (!(nu_obs > 0.0)) return nu_rs;
  if (std::isinf(nu_rs)) return nu_obs;
  return 1.0 / (1.0 / nu_rs + 1.0 / nu_obs);
}

}  // namespace

PooledEstimate pool(std::span<const PerImputationEstimate> estimates, std::optional<double> nu_com) {
  const auto d = static_cast<int>(estimates.size());
  if (d < 2) throw PreconditionError("pooling needs at least 2 imputations");
  if (nu_com && !(*nu_com > 0.0)) throw PreconditionError("complete-data degrees of freedom must be positive");
  const Index p = estimates.front().theta_hat.size();
  for (const auto& e : estimates) {
    if (e.theta_hat.size() != p || e.v_hat.dim() != p)
      throw PreconditionError("per-imputation estimates have inconsistent dimensions");
    if (!e.theta_hat.allFinite() || !e.v_hat.matrix().allFinite())
      throw PreconditionError("per-imputation estimate is not finite");
    if (!is_positive_semidefinite(e.v_hat))
      throw PreconditionError("per-imputation covariance is not positive semi-definite");
  }

  PooledEstimate out;
  out.d = d;
  out.theta_bar = Eigen::VectorXd::Zero(p);
  out.v_bar = Eigen::MatrixXd::Zero(p, p);
  for (const auto& e : estimates) {
    out.theta_bar += e.theta_hat;
    out.v_bar += e.v_hat.matrix();
  }
  out.theta_bar /= d;
  out.v_bar /= d;
  out.b = Eigen::MatrixXd::Zero(p, p);
  for (const auto& e : estimates) {
    const Eigen::VectorXd dev = e.theta_hat - out.theta_bar;
    out.b.noalias() += dev * dev.transpose();
  }
  out.b /= (d - 1.0);
  const double inflate = 1.0 + 1.0 / d;
  out.t_total = out.v_bar + inflate * out.b;

  out.df.resize(p);
  out.fmi.resize(p);
  for (Index j = 0; j < p; ++j) {
    const double b = out.b(j, j);
    const double v = out.v_bar(j, j);
    const double t = out.t_total(j, j);
    const double gamma = t > 0.0 ? inflate * b / t : 0.0;
    out.fmi(j) = gamma;
    const double rs = rubin_schenker_df(d, b, v);
    out.df(j) = nu_com ? barnard_rubin_df(rs, *nu_com, gamma) : rs;
  }
  return out;
}

double t_quantile(double df, double p) {
  if (!(p > 0.0 && p < 1.0)) throw PreconditionError("quantile probability outside (0, 1)");
  if (std::isinf(df)) return boost::math::quantile(boost::math::normal_distribution<double>(), p);
  if (!(df > 0.0)) throw PreconditionError("t degrees of freedom must be positive");
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

std::pair<double, double> interval(const PooledEstimate& pooled, Index component, double level) {
  if (!(level > 0.0 && level < 1.0)) throw PreconditionError("interval level must lie in (0, 1)");
  if (component < 0 || component >= pooled.theta_bar.size()) throw PreconditionError("component out of range");
  const double half = t_quantile(pooled.df(component), 0.5 * (1.0 + level)) *
                      std::sqrt(pooled.t_total(component, component));
  return {pooled.theta_bar(component) - half, pooled.theta_bar(component) + half};
}

nlohmann::json to_json(const PooledEstimate& pooled, double level) {
  nlohmann::json theta = nlohmann::json::array(), se = nlohmann::json::array(), df = nlohmann::json::array(),
                 fmi = nlohmann::json::array(), iv = nlohmann::json::array(), vbar = nlohmann::json::array(),
                 b = nlohmann::json::array(), t = nlohmann::json::array();
  for (Index j = 0; j < pooled.theta_bar.size(); ++j) {
    theta.push_back(pooled.theta_bar(j));
    se.push_back(std::sqrt(pooled.t_total(j, j)));
    // JSON has no infinity; the unbounded-df sentinel is written as null.
    if (std::isinf(pooled.df(j))) df.push_back(nullptr);
    else df.push_back(pooled.df(j));
    fmi.push_back(pooled.fmi(j));
    const auto [lo, hi] = interval(pooled, j, level);
    iv.push_back({lo, hi});
    vbar.push_back(pooled.v_bar(j, j));
    b.push_back(pooled.b(j, j));
    t.push_back(pooled.t_total(j, j));
  }
  return nlohmann::json{{"d", pooled.d}, {"theta_bar", theta}, {"se", se},   {"df", df},
                        {"fmi", fmi},    {"interval", iv},     {"level", level}, {"v_bar", vbar},
                        {"b", b},        {"t", t}};
}

}  // namespace calibra
