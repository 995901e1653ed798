#pragma once

#include "calibra/dataset.hpp"
#include "calibra/linalg.hpp"
#include "calibra/mi_pool.hpp"
#include "calibra/random.hpp"

#include <nlohmann/json.hpp>

#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace calibra {

/// Columns y1..yK drawn from N(mu, Sigma).
struct MvnTruth {
  MvnParams params;
};

/// Covariates x1..xp ~ N(0, I) and an outcome
/// y = intercept + sum linear_j x_j + sum quadratic_j x_j^2 + noise_sd * e.
struct StructuralTruth {
  double intercept = 0.0;
  std::vector<double> linear;
  std::vector<double> quadratic;
  double noise_sd = 1.0;

  Index covariates() const { return static_cast<Index>(linear.size()); }
};

using Truth = std::variant<MvnTruth, StructuralTruth>;

std::vector<std::string> truth_columns(const Truth& truth);
Eigen::MatrixXd generate_complete(const Truth& truth, Index n, RngStream& rng);

enum class MechanismKind { mcar, mar };

/// Deletes cells of the target columns. MCAR: each target cell independently
/// with probability `rate`. MAR: a row loses all its target cells with
/// probability logistic(intercept + sum c_j y_j + sum d_j y_j^2), where the
/// terms reference columns that are never deleted.
struct Mechanism {
  MechanismKind kind = MechanismKind::mcar;
  std::vector<Index> targets;
  double rate = 0.0;
  double intercept = 0.0;
  std::vector<std::pair<Index, double>> linear;
  std::vector<std::pair<Index, double>> quadratic;

  void validate(Index cols) const;
};

Eigen::MatrixXd apply_mechanism(const Eigen::MatrixXd& complete, const Mechanism& mechanism, RngStream& rng);

enum class ImputeMethod { da, srmi, monotone, pspp };

const char* to_string(ImputeMethod method);
ImputeMethod parse_impute_method(const std::string& text);

enum class EstimandKind { mean, variance };

struct Estimand {
  EstimandKind kind = EstimandKind::mean;
  Index column = 0;
};

std::string describe(const Estimand& estimand, const std::vector<std::string>& columns);
double true_value(const Truth& truth, const Estimand& estimand);

/// Complete-data estimate and variance: the sample mean with s^2 / n, or the
/// sample variance with 2 s^4 / (n - 1).
PerImputationEstimate complete_data_estimate(const Eigen::MatrixXd& completed, const Estimand& estimand);

struct SimScenario {
  Truth truth;
  Mechanism mechanism;
  Index n = 100;
  int replicates = 100;
  ImputeMethod method = ImputeMethod::da;
  int d = 5;
  double level = 0.95;
  Estimand estimand;
  nlohmann::json method_config = nlohmann::json::object();

  void validate() const;
};

SimScenario parse_scenario(const nlohmann::json& j);
nlohmann::json to_json(const SimScenario& scenario);

/// D imputations of `data` by the named method; `method_config` carries the
/// method's own settings.
std::vector<DataMatrix> impute_with(const DataMatrix& data, ImputeMethod method, int d,
                                    const nlohmann::json& method_config, const RngStream& rng);

struct ReplicateRecord {
  int replicate = 0;
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool covered = false;
  double df = 0.0;
  double fmi = 0.0;
};

struct CoverageReport {
  std::string estimand;
  double truth = 0.0;
  double level = 0.0;
  int replicates = 0;
  double coverage = 0.0;
  double mc_se = 0.0;  // sqrt(c (1 - c) / R)
  double avg_width = 0.0;
  double bias = 0.0;
  std::vector<ReplicateRecord> records;
};

/// Replicate r runs on rng.child(r); replicates run on up to `jobs` threads.
CoverageReport run_coverage(const SimScenario& scenario, const RngStream& rng, int jobs = 1);

nlohmann::json to_json(const CoverageReport& report);
std::string records_csv(const CoverageReport& report);

/// Gelman-Rubin potential scale reduction of m >= 2 equal-length chains.
/// Values below 1 are reported as 1; zero within-chain variance gives +infinity.
double psrf(const std::vector<std::vector<double>>& chains);

inline constexpr double kPsrfSentinel = std::numeric_limits<double>::infinity();

struct PsrfReport {
  std::vector<std::string> names;
  std::vector<double> values;
  int chains = 0;
  int draws = 0;

  double max() const;
};

/// traces[c][t] is the parameter vector of chain c at draw t.
PsrfReport psrf_report(const std::vector<std::vector<Eigen::VectorXd>>& traces, const std::vector<std::string>& names);
nlohmann::json to_json(const PsrfReport& report);

struct PpcResult {
  std::string discrepancy;
  double observed = 0.0;
  std::vector<double> replicates;
  double ppp = 0.0;  // fraction of replicate discrepancies >= observed
};

/// Discrepancies on the observed cells: "mean:<col>", "variance:<col>",
/// "kurtosis:<col>" and "max_corr" (largest absolute pairwise correlation
/// over rows where both columns are observed).
double discrepancy_value(const Eigen::MatrixXd& values, const std::vector<std::string>& columns,
                         const std::string& name);
void validate_discrepancy(const std::string& name, const std::vector<std::string>& columns);

/// One replicate dataset from `params` carrying the missingness of `data`.
Eigen::MatrixXd predictive_replicate(const DataMatrix& data, const MvnParams& params, RngStream& rng);

/// Posterior predictive check: for each draw a replicate dataset is simulated
/// from the drawn parameters and masked with the data's own missingness.
PpcResult ppc(const DataMatrix& data, const std::vector<MvnParams>& draws, const std::string& discrepancy,
              const RngStream& rng);

inline constexpr std::size_t kMinPpcDraws = 100;

nlohmann::json to_json(const PpcResult& result);

}  // namespace calibra
