#pragma once

#include "calibra/dataset.hpp"
#include "calibra/linalg.hpp"
#include "calibra/random.hpp"

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace calibra {

/// pi(mu, Sigma) proportional to |Sigma|^{-(K+1)/2}.
struct JeffreysPrior {};

/// Sigma ~ IW(v0, S0), mu | Sigma ~ N(m0, Sigma / k0).
struct NormalInverseWishartPrior {
  Eigen::VectorXd m0;
  double k0 = 1.0;
  double v0 = 0.0;
  SymMatrix s0;
};

using MvnPrior = std::variant<JeffreysPrior, NormalInverseWishartPrior>;

enum class DaInit { em, moments };

struct DaConfig {
  int n_chains = 4;
  int burn_in = 500;
  int thin = 1;
  int n_draws = 1000;        // retained draws per chain in run_da
  int spacing_factor = 10;   // imputations are thin * spacing_factor iterations apart
  MvnPrior prior = JeffreysPrior{};
  std::variant<DaInit, MvnParams> init = DaInit::em;
  bool keep_completed = false;
  int jobs = 1;

  void validate(Index dim) const;
};

struct DaDraw {
  MvnParams params;
  std::optional<Eigen::MatrixXd> completed;
};

struct DaChain {
  std::vector<DaDraw> draws;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

/// Draws each row's missing cells from their conditional normal given the
/// row's observed cells. Observed cells are copied unchanged.
Eigen::MatrixXd i_step(const Eigen::MatrixXd& values, const PatternSummary& patterns,
                       const MvnParams& params, RngStream& rng);
DataMatrix i_step(const DataMatrix& data, const MvnParams& params, RngStream& rng);

/// Draw of (mu, Sigma) from the completed-data posterior.
MvnParams p_step(const Eigen::MatrixXd& completed, const MvnPrior& prior, RngStream& rng);
MvnParams p_step(const DataMatrix& completed, const MvnPrior& prior, RngStream& rng);

/// Starting parameters per config.init (EM falls back to moments if EM fails).
MvnParams da_initial_params(const DataMatrix& data, const DaConfig& config);

/// Chain c runs on rng.child(c); chains are merged by index.
std::vector<DaChain> run_da(const DataMatrix& data, const DaConfig& config, const RngStream& rng);

/// D completed datasets from one chain (stream rng.child(0)) taken every
/// thin * spacing_factor iterations after burn-in.
std::vector<DataMatrix> impute_da_m(const DataMatrix& data, const DaConfig& config, int n_imputations,
                                    const RngStream& rng);

}  // namespace calibra
