#include "calibra/srmi.hpp"

#include "calibra/error.hpp"
#include "calibra/glm.hpp"
#include "calibra/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace calibra {

namespace {

Eigen::MatrixXd design(const Eigen::MatrixXd& values, const std::vector<Index>& rows,
                       const std::vector<Index>& predictors) {
  Eigen::MatrixXd x(static_cast<Index>(rows.size()), static_cast<Index>(predictors.size()) + 1);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Index>(r);
    x(i, 0) = 1.0;
    for (std::size_t a = 0; a < predictors.size(); ++a) x(i, static_cast<Index>(a) + 1) = values(rows[r], predictors[a]);
  }
  return x;
}

Eigen::VectorXd response(const Eigen::MatrixXd& values, const std::vector<Index>& rows, Index col) {
  Eigen::VectorXd y(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) y(static_cast<Index>(r)) = values(rows[r], col);
  return y;
}

Index resolve_column(const nlohmann::json& j, const DataMatrix& data) {
  if (j.is_string()) {
    const auto idx = data.column_index(j.get<std::string>());
    if (!idx) throw InputError("unknown column '" + j.get<std::string>() + "' in model spec");
    return *idx;
  }
  if (j.is_number_integer()) {
    const auto idx = j.get<Index>();
    if (idx < 0 || idx >= data.cols()) throw InputError("column index out of range in model spec");
    return idx;
  }
  throw InputError("model spec columns must be names or indices");
}

std::vector<Index> others(Index target, Index k) {
  std::vector<Index> out;
  for (Index j = 0; j < k; ++j)
    if (j != target) out.push_back(j);
  return out;
}

}  // namespace

const char* to_string(ModelFamily family) { return family == ModelFamily::logistic ? "logistic" : "linear"; }

ModelFamily parse_model_family(const std::string& text) {
  if (text == "linear") return ModelFamily::linear;
  if (text == "logistic") return ModelFamily::logistic;
  throw InputError("unknown model family '" + text + "'");
}

std::vector<ConditionalModelSpec> default_specs(const DataMatrix& data) {
  const MissingMask mask = compute_mask(data);
  std::vector<ConditionalModelSpec> specs;
  for (Index j = 0; j < data.cols(); ++j) {
    if (mask.observed_count(j) == data.rows()) continue;
    specs.push_back({j, others(j, data.cols()),
                     data.column(j).kind == VariableKind::binary ? ModelFamily::logistic : ModelFamily::linear});
  }
  return specs;
}

std::vector<ConditionalModelSpec> parse_specs(const nlohmann::json& j, const DataMatrix& data) {
  if (!j.is_array()) throw InputError("model specs must be a JSON list");
  std::vector<ConditionalModelSpec> specs;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("target")) throw InputError("each model spec needs a target");
    ConditionalModelSpec s;
    s.target = resolve_column(item.at("target"), data);
    if (item.contains("predictors")) {
      if (!item.at("predictors").is_array()) throw InputError("predictors must be a list");
      for (const auto& p : item.at("predictors")) s.predictors.push_back(resolve_column(p, data));
    } else {
      s.predictors = others(s.target, data.cols());
    }
    if (item.contains("family")) s.family = parse_model_family(item.at("family").get<std::string>());
    else s.family = data.column(s.target).kind == VariableKind::binary ? ModelFamily::logistic : ModelFamily::linear;
    specs.push_back(std::move(s));
  }
  validate_specs(specs, data);
  return specs;
}

nlohmann::json specs_to_json(const std::vector<ConditionalModelSpec>& specs, const DataMatrix& data) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : specs) {
    nlohmann::json preds = nlohmann::json::array();
    for (Index p : s.predictors) preds.push_back(data.column(p).name);
    out.push_back({{"target", data.column(s.target).name}, {"predictors", preds}, {"family", to_string(s.family)}});
  }
  return out;
}

void validate_specs(const std::vector<ConditionalModelSpec>& specs, const DataMatrix& data) {
  std::vector<bool> covered(static_cast<std::size_t>(data.cols()), false);
  for (const auto& s : specs) {
    if (s.target < 0 || s.target >= data.cols()) throw PreconditionError("model spec target out of range");
    const std::string& name = data.column(s.target).name;
    for (Index p : s.predictors) {
      if (p < 0 || p >= data.cols()) throw PreconditionError("model spec predictor out of range");
      if (p == s.target) throw PreconditionError("column '" + name + "' cannot predict itself");
    }
    std::vector<Index> sorted = s.predictors;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw PreconditionError("duplicate predictor in model for '" + name + "'");
    const bool binary = data.column(s.target).kind == VariableKind::binary;
    if (binary != (s.family == ModelFamily::logistic))
      throw PreconditionError("model family for '" + name + "' does not match its column kind");
    covered[static_cast<std::size_t>(s.target)] = true;
  }
  const MissingMask mask = compute_mask(data);
  for (Index j = 0; j < data.cols(); ++j)
    if (mask.observed_count(j) < data.rows() && !covered[static_cast<std::size_t>(j)])
      throw PreconditionError("column '" + data.column(j).name + "' has missing values but no model");
}

void SrmiConfig::validate() const {
  if (n_cycles < 1) throw PreconditionError("n_cycles must be at least 1");
  if (d < 1) throw PreconditionError("number of imputations must be at least 1");
}

DataMatrix initial_impute(const DataMatrix& data, RngStream& rng) {
  const MissingMask mask = compute_mask(data);
  Eigen::MatrixXd filled = data.values();
  for (Index j = 0; j < data.cols(); ++j) {
    const Index n_obs = mask.observed_count(j);
    if (n_obs == data.rows()) continue;
    if (n_obs == 0) throw PreconditionError("column '" + data.column(j).name + "' has no observed values");
    std::vector<double> pool;
    pool.reserve(static_cast<std::size_t>(n_obs));
    for (Index i = 0; i < data.rows(); ++i)
      if (!mask.missing(i, j)) pool.push_back(data(i, j));
    if (data.column(j).kind == VariableKind::binary) {
      double rate = 0.0;
      for (double v : pool) rate += v;
      rate /= static_cast<double>(pool.size());
      for (Index i = 0; i < data.rows(); ++i)
        if (mask.missing(i, j)) filled(i, j) = draw_bernoulli(rng, rate);
    } else {
      for (Index i = 0; i < data.rows(); ++i)
        if (mask.missing(i, j)) filled(i, j) = pool[rng.uniform_index(pool.size())];
    }
  }
  return data.completed_with(filled);
}

ModelDraw draw_model_posterior(const Eigen::MatrixXd& completed, const std::vector<Index>& rows,
                               const ConditionalModelSpec& spec, RngStream& rng, bool suppress_noise) {
  const Eigen::MatrixXd x = design(completed, rows, spec.predictors);
  const Eigen::VectorXd y = response(completed, rows, spec.target);
  ModelDraw out;
  out.family = spec.family;
  if (spec.family == ModelFamily::linear) {
    const Index q = x.cols();
    if (x.rows() <= q) throw RankDeficientError("too few cases to fit the linear model");
    const LinearFit fit = fit_least_squares(x, y);
    if (suppress_noise) {
      out.coef = fit.coef;
      out.sigma2 = fit.rss / static_cast<double>(x.rows() - q);
      return out;
    }
    out.sigma2 = fit.rss / draw_chisq(rng, static_cast<double>(x.rows() - q));
    out.coef = draw_mvn(rng, fit.coef, SymMatrix(out.sigma2 * fit.xtx_inv));
    return out;
  }
  const BinaryFit fit = fit_binary_mle(x, y, BinaryLink::logit);
  out.coef = suppress_noise ? fit.coef : draw_mvn(rng, fit.coef, SymMatrix(fit.cov));
  return out;
}

Eigen::MatrixXd srmi_cycle(const Eigen::MatrixXd& completed, const MissingMask& mask,
                           const std::vector<ConditionalModelSpec>& specs, RngStream& rng, bool suppress_noise) {
  if (!completed.allFinite()) throw PreconditionError("chained-equations cycle needs a completed dataset");
  if (mask.rows() != completed.rows() || mask.cols() != completed.cols())
    throw PreconditionError("mask does not match the dataset");
  Eigen::MatrixXd cur = completed;
  for (const auto& spec : specs) {
    std::vector<Index> fit_rows, fill_rows;
    for (Index i = 0; i < cur.rows(); ++i) (mask.missing(i, spec.target) ? fill_rows : fit_rows).push_back(i);
    if (fill_rows.empty()) continue;
    const ModelDraw draw = draw_model_posterior(cur, fit_rows, spec, rng, suppress_noise);
    const Eigen::VectorXd eta = design(cur, fill_rows, spec.predictors) * draw.coef;
    const double sd = std::sqrt(draw.sigma2);
    for (std::size_t r = 0; r < fill_rows.size(); ++r) {
      const double e = eta(static_cast<Index>(r));
      double v;
      if (spec.family == ModelFamily::linear) v = suppress_noise ? e : e + sd * rng.normal();
      else {
        const double p = inverse_link(e, BinaryLink::logit);
        v = suppress_noise ? (p >= 0.5 ? 1.0 : 0.0) : draw_bernoulli(rng, p);
      }
      cur(fill_rows[r], spec.target) = v;
    }
  }
  return cur;
}

SrmiResult run_srmi(const DataMatrix& data, const std::vector<ConditionalModelSpec>& specs,
                    const SrmiConfig& config, const RngStream& rng) {
  config.validate();
  validate_specs(specs, data);
  const MissingMask mask = compute_mask(data);
  for (const auto& s : specs)
    if (mask.observed_count(s.target) < 2)
      throw PreconditionError("column '" + data.column(s.target).name + "' has fewer than 2 observed values");

  SrmiResult out;
  const auto d = static_cast<std::size_t>(config.d);
  std::vector<std::optional<DataMatrix>> slots(d);
  out.trace.resize(d);
  parallel_for(d, config.jobs, [&](std::size_t c) {
    RngStream s = rng.child(c);
    Eigen::MatrixXd cur = initial_impute(data, s).values();
    auto& trace = out.trace[c];
    trace.push_back(cur.colwise().mean().transpose());
    for (int t = 0; t < config.n_cycles; ++t) {
      cur = srmi_cycle(cur, mask, specs, s, config.suppress_noise);
      trace.push_back(cur.colwise().mean().transpose());
    }
    slots[c] = data.completed_with(cur);
  });
  out.imputations.reserve(d);
  for (auto& m : slots) out.imputations.push_back(std::move(*m));
  return out;
}

}  // namespace calibra
