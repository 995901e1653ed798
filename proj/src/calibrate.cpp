#include "calibra/calibrate.hpp"

#include "calibra/error.hpp"
#include "calibra/glm.hpp"
#include "calibra/monotone.hpp"
#include "calibra/mvn_da.hpp"
#include "calibra/parallel.hpp"
#include "calibra/pspp.hpp"
#include "calibra/srmi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace calibra {

namespace {

using nlohmann::json;

Index column_ref(const json& j, const std::vector<std::string>& columns) {
  if (j.is_number_integer()) {
    const auto idx = j.get<Index>();
    if (idx < 0 || idx >= static_cast<Index>(columns.size())) throw InputError("column index out of range");
    return idx;
  }
  if (j.is_string()) {
    const auto it = std::find(columns.begin(), columns.end(), j.get<std::string>());
    if (it == columns.end()) throw InputError("unknown column '" + j.get<std::string>() + "'");
    return static_cast<Index>(it - columns.begin());
  }
  throw InputError("columns must be referenced by name or index");
}

std::vector<std::pair<Index, double>> parse_terms(const json& j, const std::vector<std::string>& columns) {
  std::vector<std::pair<Index, double>> out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw InputError("mechanism terms must be an object of column: coefficient");
  for (auto it = j.begin(); it != j.end(); ++it) out.emplace_back(column_ref(json(it.key()), columns), it->get<double>());
  return out;
}

json terms_json(const std::vector<std::pair<Index, double>>& terms, const std::vector<std::string>& columns) {
  json out = json::object();
  for (const auto& [c, v] : terms) out[columns[static_cast<std::size_t>(c)]] = v;
  return out;
}

std::vector<double> observed_of(const Eigen::MatrixXd& values, Index col) {
  std::vector<double> out;
  for (Index i = 0; i < values.rows(); ++i)
    if (!std::isnan(values(i, col))) out.push_back(values(i, col));
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int config_int(const json& cfg, const char* key, int fallback) {
  return cfg.contains(key) ? cfg.at(key).get<int>() : fallback;
}

}  // namespace

std::vector<std::string> truth_columns(const Truth& truth) {
  std::vector<std::string> out;
  if (const auto* t = std::get_if<MvnTruth>(&truth)) {
    for (Index j = 0; j < t->params.dim(); ++j) out.push_back("y" + std::to_string(j + 1));
  } else {
    const auto& s = std::get<StructuralTruth>(truth);
    for (Index j = 0; j < s.covariates(); ++j) out.push_back("x" + std::to_string(j + 1));
    out.push_back("y");
  }
  return out;
}

Eigen::MatrixXd generate_complete(const Truth& truth, Index n, RngStream& rng) {
  if (const auto* t = std::get_if<MvnTruth>(&truth)) {
    const Eigen::MatrixXd factor = psd_factor(t->params.sigma);
    Eigen::MatrixXd out(n, t->params.dim());
    for (Index i = 0; i < n; ++i) out.row(i) = draw_mvn_factored(rng, t->params.mu, factor).transpose();
    return out;
  }
  const auto& s = std::get<StructuralTruth>(truth);
  const Index p = s.covariates();
  Eigen::MatrixXd out(n, p + 1);
  for (Index i = 0; i < n; ++i) {
    double y = s.intercept;
    for (Index j = 0; j < p; ++j) {
      const double x = rng.normal();
      out(i, j) = x;
      y += s.linear[static_cast<std::size_t>(j)] * x + s.quadratic[static_cast<std::size_t>(j)] * x * x;
    }
    out(i, p) = y + s.noise_sd * rng.normal();
  }
  return out;
}

void Mechanism::validate(Index cols) const {
  if (targets.empty()) throw PreconditionError("mechanism needs at least one target column");
  for (Index t : targets)
    if (t < 0 || t >= cols) throw PreconditionError("mechanism target out of range");
  if (kind == MechanismKind::mcar) {
    if (!(rate >= 0.0 && rate < 1.0)) throw PreconditionError("MCAR rate must lie in [0, 1)");
    return;
  }
  for (const auto* terms : {&linear, &quadratic})
    for (const auto& [c, v] : *terms) {
      if (c < 0 || c >= cols) throw PreconditionError("mechanism term column out of range");
      if (std::find(targets.begin(), targets.end(), c) != targets.end())
        throw PreconditionError("MAR terms may only reference columns that are never deleted");
      if (!std::isfinite(v)) throw PreconditionError("MAR coefficient must be finite");
    }
}

Eigen::MatrixXd apply_mechanism(const Eigen::MatrixXd& complete, const Mechanism& mechanism, RngStream& rng) {
  mechanism.validate(complete.cols());
  Eigen::MatrixXd out = complete;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index i = 0; i < out.rows(); ++i) {
    if (mechanism.kind == MechanismKind::mcar) {
      for (Index t : mechanism.targets)
        if (rng.uniform() < mechanism.rate) out(i, t) = nan;
      continue;
    }
    double eta = mechanism.intercept;
    for (const auto& [c, v] : mechanism.linear) eta += v * complete(i, c);
    for (const auto& [c, v] : mechanism.quadratic) eta += v * complete(i, c) * complete(i, c);
    if (rng.uniform() < inverse_link(eta, BinaryLink::logit))
      for (Index t : mechanism.targets) out(i, t) = nan;
  }
  return out;
}

const char* to_string(ImputeMethod method) {
  switch (method) {
    case ImputeMethod::da: return "da";
    case ImputeMethod::srmi: return "srmi";
    case ImputeMethod::monotone: return "monotone";
    case ImputeMethod::pspp: return "pspp";
  }
  return "da";
}

ImputeMethod parse_impute_method(const std::string& text) {
  if (text == "da") return ImputeMethod::da;
  if (text == "srmi") return ImputeMethod::srmi;
  if (text == "monotone") return ImputeMethod::monotone;
  if (text == "pspp") return ImputeMethod::pspp;
  throw InputError("unknown imputation method '" + text + "'");
}

std::string describe(const Estimand& e, const std::vector<std::string>& columns) {
  const std::string& name = columns.at(static_cast<std::size_t>(e.column));
  return (e.kind == EstimandKind::mean ? "mean(" : "variance(") + name + ")";
}

double true_value(const Truth& truth, const Estimand& e) {
  if (const auto* t = std::get_if<MvnTruth>(&truth))
    return e.kind == EstimandKind::mean ? t->params.mu(e.column) : t->params.sigma(e.column, e.column);
  const auto& s = std::get<StructuralTruth>(truth);
  if (e.column < s.covariates()) return e.kind == EstimandKind::mean ? 0.0 : 1.0;
  double mean = s.intercept, var = s.noise_sd * s.noise_sd;
  for (std::size_t j = 0; j < s.linear.size(); ++j) {
    mean += s.quadratic[j];
    var += s.linear[j] * s.linear[j] + 2.0 * s.quadratic[j] * s.quadratic[j];
  }
  return e.kind == EstimandKind::mean ? mean : var;
}

PerImputationEstimate complete_data_estimate(const Eigen::MatrixXd& completed, const Estimand& e) {
  const Eigen::VectorXd col = completed.col(e.column);
  const double n = static_cast<double>(col.size());
  if (col.size() < 2) throw PreconditionError("estimate needs at least 2 rows");
  if (!col.allFinite()) throw PreconditionError("estimate needs a completed column");
  const double mean = col.mean();
  const double s2 = (col.array() - mean).square().sum() / (n - 1.0);
  PerImputationEstimate out;
  out.theta_hat = Eigen::VectorXd::Constant(1, e.kind == EstimandKind::mean ? mean : s2);
  const double v = e.kind == EstimandKind::mean ? s2 / n : 2.0 * s2 * s2 / (n - 1.0);
  out.v_hat = SymMatrix(Eigen::MatrixXd::Constant(1, 1, v));
  return out;
}

void SimScenario::validate() const {
  const auto columns = truth_columns(truth);
  const auto k = static_cast<Index>(columns.size());
  if (const auto* t = std::get_if<MvnTruth>(&truth)) t->params.validate();
  else {
    const auto& s = std::get<StructuralTruth>(truth);
    if (s.linear.empty() || s.linear.size() != s.quadratic.size())
      throw PreconditionError("structural truth needs equal-length linear and quadratic coefficients");
    if (!(s.noise_sd >= 0.0)) throw PreconditionError("noise_sd must be non-negative");
  }
  mechanism.validate(k);
  if (n < 2) throw PreconditionError("sample size must be at least 2");
  if (replicates < 1) throw PreconditionError("replicates must be at least 1");
  if (d < 2) throw PreconditionError("coverage needs at least 2 imputations");
  if (!(level > 0.0 && level < 1.0)) throw PreconditionError("level must lie in (0, 1)");
  if (estimand.column < 0 || estimand.column >= k) throw PreconditionError("estimand column out of range");
}

SimScenario parse_scenario(const json& j) {
  try {
    if (!j.is_object()) throw InputError("scenario must be a JSON object");
    SimScenario s;
    const json& tj = j.at("truth");
    const std::string type = tj.value("type", "mvn");
    if (type == "mvn") {
      const auto mu = tj.at("mu").get<std::vector<double>>();
      const auto sigma = tj.at("sigma").get<std::vector<std::vector<double>>>();
      const auto k = static_cast<Index>(mu.size());
      if (k == 0 || sigma.size() != mu.size()) throw InputError("truth mu and sigma sizes differ");
      MvnParams p;
      p.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), k);
      Eigen::MatrixXd sg(k, k);
      for (Index a = 0; a < k; ++a) {
        if (sigma[static_cast<std::size_t>(a)].size() != mu.size()) throw InputError("truth sigma is not square");
        for (Index b = 0; b < k; ++b) sg(a, b) = sigma[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      }
      p.sigma = SymMatrix(sg);
      s.truth = MvnTruth{p};
    } else if (type == "structural") {
      StructuralTruth st;
      st.intercept = tj.value("intercept", 0.0);
      st.linear = tj.at("linear").get<std::vector<double>>();
      st.quadratic = tj.contains("quadratic") ? tj.at("quadratic").get<std::vector<double>>()
                                              : std::vector<double>(st.linear.size(), 0.0);
      st.noise_sd = tj.value("noise_sd", 1.0);
      s.truth = st;
    } else {
      throw InputError("unknown truth type '" + type + "'");
    }
    const auto columns = truth_columns(s.truth);

    const json& mj = j.at("mechanism");
    const std::string mtype = mj.value("type", "mcar");
    if (mtype == "mcar") s.mechanism.kind = MechanismKind::mcar;
    else if (mtype == "mar") s.mechanism.kind = MechanismKind::mar;
    else throw InputError("unknown mechanism type '" + mtype + "'");
    for (const auto& c : mj.at("columns")) s.mechanism.targets.push_back(column_ref(c, columns));
    s.mechanism.rate = mj.value("rate", 0.0);
    s.mechanism.intercept = mj.value("intercept", 0.0);
    if (mj.contains("coefficients")) s.mechanism.linear = parse_terms(mj.at("coefficients"), columns);
    if (mj.contains("quadratic")) s.mechanism.quadratic = parse_terms(mj.at("quadratic"), columns);

    s.n = j.at("n").get<Index>();
    s.replicates = j.at("replicates").get<int>();
    s.method = parse_impute_method(j.value("method", "da"));
    s.d = j.value("d", 5);
    s.level = j.value("level", 0.95);
    const json& ej = j.at("estimand");
    const std::string etype = ej.value("type", "mean");
    if (etype == "mean") s.estimand.kind = EstimandKind::mean;
    else if (etype == "variance") s.estimand.kind = EstimandKind::variance;
    else throw InputError("unknown estimand type '" + etype + "'");
    s.estimand.column = column_ref(ej.at("column"), columns);
    if (j.contains("method_config")) s.method_config = j.at("method_config");
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid scenario: ") + e.what());
  } catch (const PreconditionError& e) {
    throw InputError(std::string("invalid scenario: ") + e.what());
  }
}

json to_json(const SimScenario& s) {
  const auto columns = truth_columns(s.truth);
  json truth;
  if (const auto* t = std::get_if<MvnTruth>(&s.truth)) {
    json sigma = json::array();
    for (Index a = 0; a < t->params.dim(); ++a) {
      json row = json::array();
      for (Index b = 0; b < t->params.dim(); ++b) row.push_back(t->params.sigma(a, b));
      sigma.push_back(row);
    }
    truth = {{"type", "mvn"},
             {"mu", std::vector<double>(t->params.mu.data(), t->params.mu.data() + t->params.mu.size())},
             {"sigma", sigma}};
  } else {
    const auto& st = std::get<StructuralTruth>(s.truth);
    truth = {{"type", "structural"},
             {"intercept", st.intercept},
             {"linear", st.linear},
             {"quadratic", st.quadratic},
             {"noise_sd", st.noise_sd}};
  }
  json targets = json::array();
  for (Index t : s.mechanism.targets) targets.push_back(columns[static_cast<std::size_t>(t)]);
  json mech{{"type", s.mechanism.kind == MechanismKind::mcar ? "mcar" : "mar"}, {"columns", targets}};
  if (s.mechanism.kind == MechanismKind::mcar) {
    mech["rate"] = s.mechanism.rate;
  } else {
    mech["intercept"] = s.mechanism.intercept;
    mech["coefficients"] = terms_json(s.mechanism.linear, columns);
    mech["quadratic"] = terms_json(s.mechanism.quadratic, columns);
  }
  return {{"truth", truth},
          {"mechanism", mech},
          {"n", s.n},
          {"replicates", s.replicates},
          {"method", to_string(s.method)},
          {"d", s.d},
          {"level", s.level},
          {"estimand",
           {{"type", s.estimand.kind == EstimandKind::mean ? "mean" : "variance"},
            {"column", columns[static_cast<std::size_t>(s.estimand.column)]}}},
          {"method_config", s.method_config}};
}

std::vector<DataMatrix> impute_with(const DataMatrix& data, ImputeMethod method, int d, const json& cfg,
                                    const RngStream& rng) {
  try {
    switch (method) {
      case ImputeMethod::da: {
        DaConfig c;
        c.burn_in = config_int(cfg, "burn_in", c.burn_in);
        c.thin = config_int(cfg, "thin", c.thin);
        c.spacing_factor = config_int(cfg, "spacing_factor", c.spacing_factor);
        if (cfg.value("init", std::string("em")) == "moments") c.init = DaInit::moments;
        return impute_da_m(data, c, d, rng);
      }
      case ImputeMethod::srmi: {
        SrmiConfig c;
        c.n_cycles = config_int(cfg, "n_cycles", c.n_cycles);
        c.d = d;
        const auto specs = cfg.contains("specs") ? parse_specs(cfg.at("specs"), data) : default_specs(data);
        return run_srmi(data, specs, c, rng).imputations;
      }
      case ImputeMethod::monotone: {
        const PatternSummary ps = analyze_patterns(compute_mask(data));
        if (!ps.monotone_order) throw NonMonotoneError("missingness pattern is not monotone in any column order");
        const std::vector<Index>& order = *ps.monotone_order;
        std::vector<Index> inverse(order.size());
        for (std::size_t a = 0; a < order.size(); ++a) inverse[static_cast<std::size_t>(order[a])] = static_cast<Index>(a);
        auto imps = impute_monotone_m(data.select_columns(order), d, rng);
        for (auto& m : imps) m = m.select_columns(inverse);
        return imps;
      }
      case ImputeMethod::pspp:
        return impute_pspp_m(data, parse_pspp_config(cfg.is_null() ? json::object() : cfg), d, rng);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid method config: ") + e.what());
  }
  throw InputError("unknown imputation method");
}

CoverageReport run_coverage(const SimScenario& scenario, const RngStream& rng, int jobs) {
  scenario.validate();
  const auto columns = truth_columns(scenario.truth);
  std::vector<VariableMeta> meta;
  for (const auto& c : columns) meta.push_back({c, VariableKind::continuous});

  CoverageReport rep;
  rep.estimand = describe(scenario.estimand, columns);
  rep.truth = true_value(scenario.truth, scenario.estimand);
  rep.level = scenario.level;
  rep.replicates = scenario.replicates;
  rep.records.resize(static_cast<std::size_t>(scenario.replicates));

  parallel_for(rep.records.size(), jobs, [&](std::size_t r) {
    RngStream s = rng.child(r);
    const Eigen::MatrixXd complete = generate_complete(scenario.truth, scenario.n, s);
    const DataMatrix data(apply_mechanism(complete, scenario.mechanism, s), meta);
    const auto imps = impute_with(data, scenario.method, scenario.d, scenario.method_config, s.child(1));
    std::vector<PerImputationEstimate> ests;
    ests.reserve(imps.size());
    for (const auto& m : imps) ests.push_back(complete_data_estimate(m.values(), scenario.estimand));
    const PooledEstimate pooled = pool(ests, static_cast<double>(scenario.n - 1));
    const auto [lo, hi] = interval(pooled, 0, scenario.level);
    ReplicateRecord& rec = rep.records[r];
    rec.replicate = static_cast<int>(r);
    rec.estimate = pooled.theta_bar(0);
    rec.se = std::sqrt(pooled.t_total(0, 0));
    rec.lower = lo;
    rec.upper = hi;
    rec.covered = lo <= rep.truth && rep.truth <= hi;
    rec.df = pooled.df(0);
    rec.fmi = pooled.fmi(0);
  });

  double covered = 0.0, width = 0.0, bias = 0.0;
  for (const auto& rec : rep.records) {
    covered += rec.covered ? 1.0 : 0.0;
    width += rec.upper - rec.lower;
    bias += rec.estimate - rep.truth;
  }
  const double r = static_cast<double>(scenario.replicates);
  rep.coverage = covered / r;
  rep.mc_se = std::sqrt(rep.coverage * (1.0 - rep.coverage) / r);
  rep.avg_width = width / r;
  rep.bias = bias / r;
  return rep;
}

json to_json(const CoverageReport& r) {
  return {{"estimand", r.estimand}, {"truth", r.truth},     {"level", r.level}, {"replicates", r.replicates},
          {"coverage", r.coverage}, {"mc_se", r.mc_se},     {"avg_width", r.avg_width}, {"bias", r.bias}};
}

std::string records_csv(const CoverageReport& r) {
  std::ostringstream out;
  out << "replicate,estimate,se,lower,upper,covered,df,fmi\n";
  for (const auto& rec : r.records)
    out << rec.replicate << ',' << format_double(rec.estimate) << ',' << format_double(rec.se) << ','
        << format_double(rec.lower) << ',' << format_double(rec.upper) << ',' << (rec.covered ? 1 : 0) << ','
        << (std::isinf(rec.df) ? std::string("Inf") : format_double(rec.df)) << ',' << format_double(rec.fmi) << '\n';
  return out.str();
}

double psrf(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw PreconditionError("R-hat needs at least 2 chains");
  const std::size_t n = chains.front().size();
  if (n < 4) throw PreconditionError("R-hat needs chains of length at least 4");
  for (const auto& c : chains)
    if (c.size() != n) throw PreconditionError("R-hat chains must have equal length");
  const double m = static_cast<double>(chains.size());
  const double nn = static_cast<double>(n);
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    const double mu = mean_of(c);
    means.push_back(mu);
    double ss = 0.0;
    for (double x : c) ss += (x - mu) * (x - mu);
    w += ss / (nn - 1.0);
  }
  w /= m;
  if (!(w > 0.0)) return kPsrfSentinel;
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= nn / (m - 1.0);
  const double v = (nn - 1.0) / nn * w + b / nn;
  return std::max(1.0, std::sqrt(v / w));
}

double PsrfReport::max() const {
  double out = 1.0;
  for (double v : values) out = std::max(out, v);
  return out;
}

PsrfReport psrf_report(const std::vector<std::vector<Eigen::VectorXd>>& traces, const std::vector<std::string>& names) {
  if (traces.size() < 2) throw PreconditionError("R-hat needs at least 2 chains");
  PsrfReport rep;
  rep.names = names;
  rep.chains = static_cast<int>(traces.size());
  rep.draws = static_cast<int>(traces.front().size());
  for (std::size_t p = 0; p < names.size(); ++p) {
    std::vector<std::vector<double>> chains;
    for (const auto& t : traces) {
      std::vector<double> c;
      for (const auto& v : t) {
        if (v.size() != static_cast<Index>(names.size())) throw PreconditionError("trace width does not match names");
        c.push_back(v(static_cast<Index>(p)));
      }
      chains.push_back(std::move(c));
    }
    rep.values.push_back(psrf(chains));
  }
  return rep;
}

json to_json(const PsrfReport& r) {
  json values = json::object();
  for (std::size_t p = 0; p < r.names.size(); ++p) values[r.names[p]] = finite_or_null(r.values[p]);
  return {{"chains", r.chains}, {"draws", r.draws}, {"psrf", values}, {"max", finite_or_null(r.max())}};
}

namespace {

struct DiscrepancySpec {
  enum Kind { mean, variance, kurtosis, max_corr } kind;
  Index column = 0;
};

DiscrepancySpec parse_discrepancy(const std::string& name, const std::vector<std::string>& columns) {
  if (name == "max_corr") {
    if (columns.size() < 2) throw InputError("max_corr needs at least 2 columns");
    return {DiscrepancySpec::max_corr, 0};
  }
  const auto colon = name.find(':');
  if (colon == std::string::npos) throw InputError("unknown discrepancy '" + name + "'");
  const std::string head = name.substr(0, colon), col = name.substr(colon + 1);
  DiscrepancySpec s{DiscrepancySpec::mean, 0};
  if (head == "mean") s.kind = DiscrepancySpec::mean;
  else if (head == "variance") s.kind = DiscrepancySpec::variance;
  else if (head == "kurtosis") s.kind = DiscrepancySpec::kurtosis;
  else throw InputError("unknown discrepancy '" + name + "'");
  const auto it = std::find(columns.begin(), columns.end(), col);
  if (it == columns.end()) throw InputError("unknown column '" + col + "' in discrepancy");
  s.column = static_cast<Index>(it - columns.begin());
  return s;
}

double evaluate(const Eigen::MatrixXd& values, const DiscrepancySpec& s) {
  if (s.kind == DiscrepancySpec::max_corr) {
    double best = 0.0;
    for (Index a = 0; a < values.cols(); ++a)
      for (Index b = a + 1; b < values.cols(); ++b) {
        double n = 0, sa = 0, sb = 0;
        for (Index i = 0; i < values.rows(); ++i)
          if (!std::isnan(values(i, a)) && !std::isnan(values(i, b))) {
            ++n;
            sa += values(i, a);
            sb += values(i, b);
          }
        if (n < 2) continue;
        const double ma = sa / n, mb = sb / n;
        double saa = 0, sbb = 0, sab = 0;
        for (Index i = 0; i < values.rows(); ++i)
          if (!std::isnan(values(i, a)) && !std::isnan(values(i, b))) {
            const double da = values(i, a) - ma, db = values(i, b) - mb;
            saa += da * da;
            sbb += db * db;
            sab += da * db;
          }
        if (saa > 0 && sbb > 0) best = std::max(best, std::abs(sab / std::sqrt(saa * sbb)));
      }
    return best;
  }
  const std::vector<double> obs = observed_of(values, s.column);
  if (obs.size() < 2) throw PreconditionError("discrepancy needs at least 2 observed values");
  const double mu = mean_of(obs);
  if (s.kind == DiscrepancySpec::mean) return mu;
  double m2 = 0.0, m4 = 0.0;
  for (double x : obs) {
    const double d2 = (x - mu) * (x - mu);
    m2 += d2;
    m4 += d2 * d2;
  }
  const double n = static_cast<double>(obs.size());
  if (s.kind == DiscrepancySpec::variance) return m2 / (n - 1.0);
  m2 /= n;
  m4 /= n;
  return m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
}

}  // namespace

void validate_discrepancy(const std::string& name, const std::vector<std::string>& columns) {
  (void)parse_discrepancy(name, columns);
}

double discrepancy_value(const Eigen::MatrixXd& values, const std::vector<std::string>& columns,
                         const std::string& name) {
  return evaluate(values, parse_discrepancy(name, columns));
}

Eigen::MatrixXd predictive_replicate(const DataMatrix& data, const MvnParams& params, RngStream& rng) {
  if (params.dim() != data.cols()) throw PreconditionError("draw dimension does not match data");
  Eigen::MatrixXd rep = generate_complete(MvnTruth{params}, data.rows(), rng);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index i = 0; i < rep.rows(); ++i)
    for (Index j = 0; j < rep.cols(); ++j)
      if (data.is_missing(i, j)) rep(i, j) = nan;
  return rep;
}

PpcResult ppc(const DataMatrix& data, const std::vector<MvnParams>& draws, const std::string& discrepancy,
              const RngStream& rng) {
  const DiscrepancySpec spec = parse_discrepancy(discrepancy, data.column_names());
  if (draws.size() < kMinPpcDraws)
    throw PreconditionError("posterior predictive check needs at least " + std::to_string(kMinPpcDraws) + " draws");
  PpcResult out;
  out.discrepancy = discrepancy;
  out.observed = evaluate(data.values(), spec);
  out.replicates.resize(draws.size());
  for (std::size_t t = 0; t < draws.size(); ++t) {
    RngStream s = rng.child(t);
    out.replicates[t] = evaluate(predictive_replicate(data, draws[t], s), spec);
  }
  double exceed = 0.0;
  for (double v : out.replicates) exceed += v >= out.observed ? 1.0 : 0.0;
  out.ppp = exceed / static_cast<double>(draws.size());
  return out;
}

json to_json(const PpcResult& r) {
  return {{"discrepancy", r.discrepancy},
          {"observed", r.observed},
          {"ppp", r.ppp},
          {"draws", r.replicates.size()}};
}

}  // namespace calibra
