// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "calibra/calibrate.hpp"
#include "calibra/cli.hpp"
#include "calibra/error.hpp"
#include "calibra/mi_pool.hpp"
#include "calibra/monotone.hpp"
#include "calibra/mvn_da.hpp"
#include "calibra/mvn_em.hpp"
#include "calibra/parallel.hpp"
#include "calibra/pspp.hpp"
#include "calibra/srmi.hpp"

#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

using namespace calibra;
using testing::Moments;
using testing::NA;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Verdict()> run;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

double logistic(double e) { return 1.0 / (1.0 + std::exp(-e)); }

// y1 always observed; later columns deleted together with probability rising in y1.
DataMatrix mar_dataset(RngStream& rng, Index n, Index k) {
  const Eigen::MatrixXd s = testing::random_spd(rng, k);
  Eigen::VectorXd mu(k);
  for (Index j = 0; j < k; ++j) mu(j) = rng.normal();
  Eigen::MatrixXd y = testing::mvn_sample(rng, mu, s, n);
  const double scale = 1.0 / std::sqrt(s(0, 0));
  for (Index i = 0; i < n; ++i)
    for (Index j = 1; j < k; ++j)
      if (rng.uniform() < logistic(-0.5 + scale * (y(i, 0) - mu(0)) + 0.3 * rng.normal())) y(i, j) = NA;
  return testing::make_data(y);
}

DataMatrix sort_complete_first(const DataMatrix& d) {
  std::vector<Index> obs, mis;
  for (Index i = 0; i < d.rows(); ++i) (d.is_missing(i, 1) ? mis : obs).push_back(i);
  obs.insert(obs.end(), mis.begin(), mis.end());
  Eigen::MatrixXd v(d.rows(), d.cols());
  for (Index r = 0; r < d.rows(); ++r) v.row(r) = d.values().row(obs[static_cast<std::size_t>(r)]);
  return testing::make_data(v, d.column_names());
}

Verdict em_ascent() {
  RngStream rng(101);
  double worst = 0.0;
  int steps = 0;
  for (int t = 0; t < 100; ++t) {
    const Index k = 2 + t % 2;
    const Index n = 30 + static_cast<Index>(rng.uniform_index(171));
    const EmResult r = fit_em(mar_dataset(rng, n, k));
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i) {
      worst = std::max(worst, r.loglik_trace[i - 1] - r.loglik_trace[i]);
      ++steps;
    }
  }
  return {worst <= 1e-10, "largest decrease " + fmt(worst) + " over " + std::to_string(steps) + " iterations"};
}

Verdict anderson_agreement() {
  std::vector<DataMatrix> sets{sort_complete_first(load_csv(testing::fixture("monotone2.csv")))};
  RngStream rng(102);
  for (int t = 0; t < 9; ++t) sets.push_back(sort_complete_first(mar_dataset(rng, 40 + 20 * t, 2)));
  EmOptions opt;
  opt.tol = 1e-14;
  opt.param_tol = 1e-12;
  opt.max_iter = 20000;
  double worst = 0.0;
  for (const auto& d : sets) {
    const MvnParams em = fit_em(d, std::nullopt, opt).params;
    const MvnParams ml = *fit_factored_ml(d).derived;
    worst = std::max({worst, max_abs(em.mu - ml.mu), max_abs(em.sigma.matrix() - ml.sigma.matrix())});
  }
  return {worst < 1e-8, "max |EM - factored ML| = " + fmt(worst) + " on " + std::to_string(sets.size()) + " datasets"};
}

Verdict conjugate_pstep() {
  RngStream rng(103);
  const Index n = 20;
  Eigen::MatrixXd y(n, 1);
  for (Index i = 0; i < n; ++i) y(i, 0) = 3.0 + 2.0 * rng.normal();
  const double ybar = y.mean();
  const double s2 = (y.array() - ybar).square().sum() / (n - 1.0);
  const int draws = 100000;
  Moments mu;
  for (int t = 0; t < draws; ++t) mu.add(p_step(y, JeffreysPrior{}, rng).mu(0));
  // Posterior of the mean: ybar + sqrt(s2 / n) t_{n-1}.
  const double df = n - 1.0;
  const double var = s2 / n * df / (df - 2.0);
  const double kurt_excess = 6.0 / (df - 4.0);
  const double var_se = var * std::sqrt((2.0 + kurt_excess) / draws);
  const double zm = std::abs(mu.mean() - ybar) / mu.se();
  const double zv = std::abs(mu.var() - var) / var_se;
  return {zm < 3.0 && zv < 3.0, "mean off by " + fmt(zm) + " SE, variance off by " + fmt(zv) + " SE"};
}

Verdict coverage() {
  const auto j = nlohmann::json::parse(R"({
    "truth": {"type": "mvn", "mu": [0, 1], "sigma": [[1, 0.5], [0.5, 1]]},
    "mechanism": {"type": "mcar", "columns": ["y2"], "rate": 0.3},
    "n": 200, "replicates": 500, "method": "da", "d": 20, "level": 0.95,
    "estimand": {"type": "mean", "column": "y2"}
  })");
  const CoverageReport r = run_coverage(parse_scenario(j), RngStream(104), default_jobs());
  return {r.coverage >= 0.92 && r.coverage <= 0.97,
          "coverage " + fmt(r.coverage) + " (mc_se " + fmt(r.mc_se) + ", bias " + fmt(r.bias) + ")"};
}

Verdict rubin_arithmetic() {
  double worst = 0.0;
  auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b))); };

  // Scalar fixture from estimates.csv: theta 1 and 3, se^2 0.5.
  const DataMatrix f = load_csv(testing::fixture("estimates.csv"));
  std::vector<PerImputationEstimate> e;
  for (Index i = 0; i < f.rows(); ++i)
    e.push_back({Eigen::VectorXd::Constant(1, f(i, 1)), SymMatrix(Eigen::MatrixXd::Constant(1, 1, f(i, 2) * f(i, 2)))});
  const PooledEstimate p = pool(e);
  track(p.theta_bar(0), 2.0);
  track(p.b(0, 0), 2.0);
  track(p.t_total(0, 0), 3.5);
  track(p.df(0), 49.0 / 36.0);

  // Five-imputation fixture evaluated by hand: theta = 1..5, within variances 1..5.
  std::vector<PerImputationEstimate> g;
  for (int d = 1; d <= 5; ++d)
    g.push_back({Eigen::VectorXd::Constant(1, d), SymMatrix(Eigen::MatrixXd::Constant(1, 1, d))});
  const PooledEstimate q = pool(g);
  // theta_bar 3, U_bar 3, B = 10/4 = 2.5, T = 3 + 1.2 * 2.5 = 6, r = 3/3 = 1, df = 4 * 4 = 16.
  track(q.theta_bar(0), 3.0);
  track(q.v_bar(0, 0), 3.0);
  track(q.b(0, 0), 2.5);
  track(q.t_total(0, 0), 6.0);
  track(q.df(0), 16.0);
  track(q.fmi(0), 0.5);
  // With nu_com = 20: nu_obs = 21/23 * 20 * 0.5, df = 1 / (1/16 + 1/nu_obs).
  const PooledEstimate br = pool(g, 20.0);
  const double obs = 21.0 / 23.0 * 20.0 * 0.5;
  track(br.df(0), 1.0 / (1.0 / 16.0 + 1.0 / obs));
  return {worst <= 1e-12, "max relative error " + fmt(worst)};
}

Verdict srmi_da_equivalence() {
  RngStream rng(106);
  Eigen::Matrix3d s;
  s << 1.0, 0.5, 0.3, 0.5, 1.0, 0.4, 0.3, 0.4, 1.0;
  const int reps = 200;
  std::vector<double> diff(reps);
  parallel_for(reps, default_jobs(), [&](std::size_t r) {
    RngStream local = rng.child(r);
    Eigen::MatrixXd y = testing::mvn_sample(local, Eigen::Vector3d(0.0, 1.0, 2.0), s, 200);
    for (Index i = 0; i < 200; ++i)
      for (Index j = 1; j < 3; ++j)
        if (local.uniform() < 0.25) y(i, j) = NA;
    const DataMatrix d = testing::make_data(y);
    auto pooled = [](const std::vector<DataMatrix>& imps) {
      std::vector<PerImputationEstimate> e;
      for (const auto& m : imps) e.push_back(complete_data_estimate(m.values(), {EstimandKind::mean, 1}));
      return pool(e).theta_bar(0);
    };
    SrmiConfig sc;
    sc.d = 10;
    const double a = pooled(run_srmi(d, default_specs(d), sc, local.child(1)).imputations);
    const double b = pooled(impute_da_m(d, DaConfig{}, 10, local.child(2)));
    diff[r] = a - b;
  });
  Moments m;
  for (double x : diff) m.add(x);
  const double z = std::abs(m.mean()) / m.se();
  return {z < 3.0, "mean paired difference " + fmt(m.mean()) + " = " + fmt(z) + " SE"};
}

Verdict pspp_double_robustness() {
  const int reps = 200;
  const Index n = 500;
  // A: propensity right, outcome regression misses the x2^2 term. Truth mean 1.5.
  // B: propensity misses 0.5 x1^2, outcome regression right. Truth mean 1.
  struct Scenario {
    const char* name;
    double truth;
    std::function<void(RngStream&, Eigen::RowVectorXd&)> draw;
  };
  const std::vector<Scenario> scenarios{
      {"A", 1.5,
       [](RngStream& rng, Eigen::RowVectorXd& row) {
         const double x1 = rng.normal(), x2 = rng.normal();
         row << x1, x2, 1.0 + x1 + 0.5 * x2 + 0.5 * x2 * x2 + rng.normal();
         if (rng.uniform() >= logistic(0.3 + x1 + 0.5 * x2)) row(2) = NA;
       }},
      {"B", 1.0,
       [](RngStream& rng, Eigen::RowVectorXd& row) {
         const double x1 = rng.normal(), x2 = rng.normal();
         row << x1, x2, 1.0 + x1 + x2 + rng.normal();
         if (rng.uniform() >= logistic(0.3 + x1 + 0.5 * x2 - 0.5 * x1 * x1)) row(2) = NA;
       }}};
  bool pass = true;
  std::string detail;
  RngStream master(107);
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    std::vector<double> est(reps), cc(reps);
    parallel_for(reps, default_jobs(), [&](std::size_t r) {
      RngStream rng = master.child(1000 * s + r);
      Eigen::MatrixXd v(n, 3);
      for (Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd row(3);
        scenarios[s].draw(rng, row);
        v.row(i) = row;
      }
      const DataMatrix d = testing::make_data(v, {"x1", "x2", "y"});
      PsppConfig cfg;
      cfg.g_terms = std::vector<std::string>{"x2"};
      const PsppMeanReport rep = estimate_mean(fit_pspp(d, cfg), d);
      est[r] = rep.mu_hat;
      cc[r] = rep.mean_observed;
    });
    Moments e, c;
    for (int r = 0; r < reps; ++r) {
      e.add(est[static_cast<std::size_t>(r)]);
      c.add(cc[static_cast<std::size_t>(r)]);
    }
    const double bias = e.mean() - scenarios[s].truth, cc_bias = c.mean() - scenarios[s].truth;
    pass = pass && std::abs(bias) < 0.05 && std::abs(cc_bias) > 0.15;
    detail += std::string(s ? "; " : "") + scenarios[s].name + ": bias " + fmt(bias) + " (mc_se " + fmt(e.se()) +
              "), complete-case bias " + fmt(cc_bias);
  }
  return {pass, detail};
}

Verdict sweep_algebra() {
  RngStream rng(108);
  double worst_inv = 0.0, worst_rev = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Index dim = 1 + static_cast<Index>(rng.uniform_index(8));
    const Eigen::MatrixXd g = testing::random_spd(rng, dim);
    std::vector<Index> order(static_cast<std::size_t>(dim));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    const SymMatrix swept = sweep(SymMatrix(g), order);
    const Eigen::MatrixXd inv = -g.inverse();
    worst_inv = std::max(worst_inv, max_abs(swept.matrix() - inv) / std::max(1.0, max_abs(inv)));
    const Index k = order.front();
    worst_rev = std::max(worst_rev, max_abs(reverse_sweep(sweep(SymMatrix(g), k), k).matrix() - g) / std::max(1.0, max_abs(g)));
  }
  return {worst_inv <= 1e-8 && worst_rev <= 1e-10,
          "full sweep vs -inverse " + fmt(worst_inv) + ", reverse identity " + fmt(worst_rev)};
}

Verdict propensity_gradient_check() {
  RngStream rng(109);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 30 + static_cast<Index>(rng.uniform_index(170)), p = 1 + static_cast<Index>(rng.uniform_index(4));
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd m(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < p; ++j) x(i, j) = rng.normal();
      m(i) = rng.uniform() < 0.4 ? 1.0 : 0.0;
    }
    Eigen::VectorXd psi(p + 1);
    for (Index j = 0; j <= p; ++j) psi(j) = 0.5 * rng.normal();
    const Eigen::VectorXd g = propensity_gradient(x, m, psi, BinaryLink::logit);
    for (Index j = 0; j <= p; ++j) {
      Eigen::VectorXd a = psi, b = psi;
      a(j) += 1e-6;
      b(j) -= 1e-6;
      const double fd = (propensity_loglik(x, m, a, BinaryLink::logit) - propensity_loglik(x, m, b, BinaryLink::logit)) / 2e-6;
      worst = std::max(worst, std::abs(fd - g(j)));
    }
  }
  return {worst < 1e-6, "max |analytic - central difference| = " + fmt(worst)};
}

Verdict replay_determinism() {
  const fs::path root = fs::temp_directory_path() / ("calibra_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string exe = CALIBRA_CLI_PATH;
  const std::string scenario = (root / "scenario.json").string();
  {
    std::ofstream f(scenario);
    f << R"({"truth": {"type": "mvn", "mu": [0, 1], "sigma": [[1, 0.5], [0.5, 1]]},
            "mechanism": {"type": "mcar", "columns": ["y2"], "rate": 0.3},
            "n": 60, "replicates": 10, "method": "da", "d": 5,
            "estimand": {"type": "mean", "column": "y2"}, "method_config": {"burn_in": 100}})";
  }
  const std::vector<std::pair<std::string, std::string>> runs{
      {"em", "em --input " + testing::fixture("monotone3.csv") + " --seed 11"},
      {"impute", "impute --method da --d 3 --input " + testing::fixture("monotone3.csv") +
                     " --seed 12 --config '{\"n_draws\": 200, \"burn_in\": 100}'"},
      {"simulate", "simulate --input " + scenario + " --seed 13 --jobs 2"}};
  bool pass = true;
  std::string detail;
  for (const auto& [name, args] : runs) {
    const fs::path a = root / (name + "_a"), b = root / (name + "_b");
    const int first = std::system((exe + " " + args + " --out " + a.string() + " > /dev/null 2>&1").c_str());
    const int second = std::system(
        (exe + " replay --manifest " + (a / "manifest.json").string() + " --out " + b.string() + " > /dev/null 2>&1").c_str());
    int files = 0, same = 0;
    if (fs::exists(a))
      for (const auto& f : fs::directory_iterator(a)) {
        ++files;
        if (fs::exists(b / f.path().filename()) && testing::slurp(f.path()) == testing::slurp(b / f.path().filename())) ++same;
      }
    const bool ok = WEXITSTATUS(first) != 1 && WEXITSTATUS(second) != 1 && files > 1 && same == files;
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + name + " " + std::to_string(same) + "/" + std::to_string(files) + " identical";
  }
  fs::remove_all(root);
  return {pass, detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "EM observed log-likelihood never decreases", 10, em_ascent},
      {2, "EM matches the factored ML on monotone data", 1, anderson_agreement},
      {3, "complete-data P-step matches the Student-t posterior", 30, conjugate_pstep},
      {4, "nominal 95% intervals cover within [0.92, 0.97]", 600, coverage},
      {5, "pooling arithmetic matches hand evaluation", 1, rubin_arithmetic},
      {6, "SRMI and DA agree under a compatible normal model", 600, srmi_da_equivalence},
      {7, "PSPP mean is doubly robust", 600, pspp_double_robustness},
      {8, "sweep algebra on random SPD matrices", 5, sweep_algebra},
      {9, "propensity gradient matches finite differences", 5, propensity_gradient_check},
      {10, "CLI replay is byte-identical", 600, replay_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = v.pass && in_time;
    failures += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << v.detail << " (" << fmt(secs)
              << " s of " << fmt(c.budget_s) << " s" << (in_time ? "" : ", over budget") << ")" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
