#pragma once

#include "calibra/dataset.hpp"
#include "calibra/random.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace calibra {

enum class ModelFamily { linear, logistic };

const char* to_string(ModelFamily family);
ModelFamily parse_model_family(const std::string& text);

/// Conditional model for one target column given a set of predictor columns.
struct ConditionalModelSpec {
  Index target = 0;
  std::vector<Index> predictors;
  ModelFamily family = ModelFamily::linear;
};

/// One model per column with missing values, visited in column order; each
/// conditions on every other column. Family follows the column kind.
std::vector<ConditionalModelSpec> default_specs(const DataMatrix& data);

/// Parses a JSON list of {target, predictors, family}; columns are referenced
/// by name. Omitted predictors default to every other column.
std::vector<ConditionalModelSpec> parse_specs(const nlohmann::json& j, const DataMatrix& data);
nlohmann::json specs_to_json(const std::vector<ConditionalModelSpec>& specs, const DataMatrix& data);

/// Checks target/predictor disjointness, family/kind agreement and that every
/// column with missing values is the target of some spec.
void validate_specs(const std::vector<ConditionalModelSpec>& specs, const DataMatrix& data);

struct SrmiConfig {
  int n_cycles = 10;
  int d = 5;
  int jobs = 1;
  /// Test hook: use point estimates and the conditional mean (or the modal
  /// class) instead of posterior and predictive draws.
  bool suppress_noise = false;

  void validate() const;
};

/// Fills missing continuous cells by sampling the column's observed values and
/// missing binary cells by Bernoulli draws at the observed rate.
DataMatrix initial_impute(const DataMatrix& data, RngStream& rng);

struct ModelDraw {
  ModelFamily family = ModelFamily::linear;
  Eigen::VectorXd coef;  // intercept first, then predictors in spec order
  double sigma2 = 0.0;   // linear family only
};

/// Posterior draw of one conditional model fitted on `rows` of `completed`.
/// Linear: sigma^2 ~ RSS / chi^2_{n-q}, coef ~ N(beta_hat, sigma^2 (X'X)^-1).
/// Logistic: coef ~ N(beta_hat, inverse information at the MLE).
ModelDraw draw_model_posterior(const Eigen::MatrixXd& completed, const std::vector<Index>& rows,
                               const ConditionalModelSpec& spec, RngStream& rng, bool suppress_noise = false);

/// One pass over the specs. Only cells missing in `mask` are redrawn; each
/// model is fitted on the rows where its target was originally observed.
Eigen::MatrixXd srmi_cycle(const Eigen::MatrixXd& completed, const MissingMask& mask,
                           const std::vector<ConditionalModelSpec>& specs, RngStream& rng,
                           bool suppress_noise = false);

struct SrmiResult {
  std::vector<DataMatrix> imputations;
  /// trace[d][t] = column means of chain d after cycle t (t = 0 is the initial fill).
  std::vector<std::vector<Eigen::VectorXd>> trace;
};

/// D independent chains, chain d on rng.child(d); the final state of each is
/// imputation d.
SrmiResult run_srmi(const DataMatrix& data, const std::vector<ConditionalModelSpec>& specs,
                    const SrmiConfig& config, const RngStream& rng);

}  // namespace calibra
