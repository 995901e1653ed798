#include "calibra/cli.hpp"

#include "calibra/calibrate.hpp"
#include "calibra/error.hpp"
#include "calibra/monotone.hpp"
#include "calibra/mvn_da.hpp"
#include "calibra/mvn_em.hpp"
#include "calibra/parallel.hpp"
#include "calibra/pspp.hpp"
#include "calibra/srmi.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

namespace calibra {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPsrfWarnThreshold = 1.1;

struct RunConfig {
  std::string command;
  std::string input;
  std::string method = "da";
  int d = 5;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  json config = json::object();
  std::string out = ".";
  std::string source_manifest;  // check: manifest of the run being checked
};

struct Outcome {
  int code = kExitOk;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
  json psrf = nullptr;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in " + what + ": " + e.what());
  }
}

json load_config(const std::string& arg) {
  if (arg.empty()) return json::object();
  if (arg.front() == '{' || arg.front() == '[') return parse_json_text(arg, "--config");
  if (fs::exists(arg)) return parse_json_text(read_file(arg), "'" + arg + "'");
  throw InputError("config file '" + arg + "' does not exist");
}

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string column_label(const std::string& prefix, const std::string& a) { return prefix + "[" + a + "]"; }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Stable description of what a run computes; the hash of this is recorded.
json resolved_config(const RunConfig& rc) {
  return {{"command", rc.command}, {"method", rc.method}, {"d", rc.d}, {"seed", *rc.seed}, {"config", rc.config}};
}

void write_manifest(const RunConfig& rc, const Outcome& o) {
  json m = resolved_config(rc);
  m["input"] = rc.input;
  m["input_hash"] = rc.input.empty() ? json(nullptr) : json(fnv1a_hex(read_file(rc.input)));
  m["config_hash"] = fnv1a_hex(resolved_config(rc).dump());
  if (!rc.source_manifest.empty()) m["source_manifest"] = rc.source_manifest;
  m["outputs"] = o.outputs;
  m["psrf"] = o.psrf;
  m["warnings"] = o.warnings;
  m["exit_code"] = o.code;
  write_file(fs::path(rc.out) / "manifest.json", dump(m));
}

DataMatrix load_input(const RunConfig& rc) {
  if (rc.input.empty()) throw InputError("--input is required");
  if (!fs::exists(rc.input)) throw InputError("input file '" + rc.input + "' does not exist");
  return load_csv(rc.input);
}

Outcome cmd_em(const RunConfig& rc) {
  const DataMatrix data = load_input(rc);
  EmOptions opt;
  try {
    opt.tol = rc.config.value("tol", opt.tol);
    opt.param_tol = rc.config.value("param_tol", opt.param_tol);
    opt.max_iter = rc.config.value("max_iter", opt.max_iter);
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid EM config: ") + e.what());
  }
  const EmResult res = fit_em(data, std::nullopt, opt);
  write_file(fs::path(rc.out) / "em.json", dump(to_json(res, data.column_names())));
  Outcome o;
  o.outputs.push_back("em.json");
  o.warnings = res.warnings;
  if (!res.converged) {
    o.warnings.push_back("EM did not converge in " + std::to_string(res.iterations) + " iterations");
    o.code = kExitWarnings;
  }
  return o;
}

std::vector<std::string> param_names(const std::vector<std::string>& cols) {
  std::vector<std::string> names;
  for (const auto& c : cols) names.push_back(column_label("mu", c));
  for (std::size_t a = 0; a < cols.size(); ++a)
    for (std::size_t b = a; b < cols.size(); ++b) names.push_back("sigma[" + cols[a] + "," + cols[b] + "]");
  return names;
}

Eigen::VectorXd flatten(const MvnParams& p) {
  const Index k = p.dim();
  Eigen::VectorXd v(k + k * (k + 1) / 2);
  Index at = 0;
  for (Index a = 0; a < k; ++a) v(at++) = p.mu(a);
  for (Index a = 0; a < k; ++a)
    for (Index b = a; b < k; ++b) v(at++) = p.sigma(a, b);
  return v;
}

MvnParams unflatten(const std::vector<double>& v, Index k) {
  if (static_cast<Index>(v.size()) != k + k * (k + 1) / 2) throw InputError("draws file has the wrong width");
  MvnParams p;
  p.mu.resize(k);
  Eigen::MatrixXd s(k, k);
  std::size_t at = 0;
  for (Index a = 0; a < k; ++a) p.mu(a) = v[at++];
  for (Index a = 0; a < k; ++a)
    for (Index b = a; b < k; ++b) s(a, b) = s(b, a) = v[at++];
  p.sigma = SymMatrix(s);
  return p;
}

std::string draws_csv(const std::vector<std::vector<MvnParams>>& chains, const std::vector<std::string>& cols) {
  std::ostringstream out;
  out << "chain,draw";
  for (const auto& n : param_names(cols)) out << ',' << n;
  out << '\n';
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (std::size_t t = 0; t < chains[c].size(); ++t) {
      out << c << ',' << t;
      const Eigen::VectorXd v = flatten(chains[c][t]);
      for (Index i = 0; i < v.size(); ++i) out << ',' << format_double(v(i));
      out << '\n';
    }
  return out.str();
}

std::vector<std::vector<MvnParams>> read_draws(const fs::path& path, Index k) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  std::map<long, std::vector<MvnParams>> by_chain;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        fields.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InputError("non-numeric field in draws file");
      }
    }
    if (fields.size() < 2) throw InputError("short row in draws file");
    const auto chain = static_cast<long>(fields[0]);
    by_chain[chain].push_back(unflatten(std::vector<double>(fields.begin() + 2, fields.end()), k));
  }
  std::vector<std::vector<MvnParams>> out;
  for (auto& [c, v] : by_chain) out.push_back(std::move(v));
  return out;
}

json psrf_of_chains(const std::vector<std::vector<MvnParams>>& chains, const std::vector<std::string>& cols) {
  if (chains.size() < 2 || chains.front().size() < 4) return nullptr;
  std::vector<std::vector<Eigen::VectorXd>> traces;
  for (const auto& c : chains) {
    std::vector<Eigen::VectorXd> t;
    for (const auto& p : c) t.push_back(flatten(p));
    traces.push_back(std::move(t));
  }
  return to_json(psrf_report(traces, param_names(cols)));
}

void flag_psrf(Outcome& o) {
  if (o.psrf.is_null()) return;
  const json& mx = o.psrf.at("max");
  if (mx.is_null() || mx.get<double>() > kPsrfWarnThreshold) {
    o.warnings.push_back("R-hat exceeds " + format_double(kPsrfWarnThreshold) + "; chains may not have converged");
    o.code = kExitWarnings;
  }
}

Outcome cmd_impute(const RunConfig& rc) {
  const DataMatrix data = load_input(rc);
  if (rc.method == "em") throw InputError("em is not an imputation method; use the em command");
  const ImputeMethod method = parse_impute_method(rc.method);
  if (rc.d < 1) throw InputError("--d must be at least 1");
  const RngStream master(*rc.seed);
  const std::vector<std::string> cols = data.column_names();
  Outcome o;
  std::vector<DataMatrix> imps;

  try {
    switch (method) {
      case ImputeMethod::srmi: {
        SrmiConfig c;
        c.n_cycles = rc.config.value("n_cycles", c.n_cycles);
        c.d = rc.d;
        c.jobs = rc.jobs;
        const auto specs = rc.config.contains("specs") ? parse_specs(rc.config.at("specs"), data) : default_specs(data);
        SrmiResult res = run_srmi(data, specs, c, master.child(0));
        imps = std::move(res.imputations);
        if (res.trace.size() >= 2 && c.n_cycles >= 4 && !specs.empty()) {
          std::vector<std::vector<Eigen::VectorXd>> traces;
          std::vector<std::string> names;
          for (const auto& s : specs) names.push_back(column_label("mean", cols[static_cast<std::size_t>(s.target)]));
          for (const auto& chain : res.trace) {
            std::vector<Eigen::VectorXd> t;
            for (std::size_t i = 1; i < chain.size(); ++i) {
              Eigen::VectorXd v(static_cast<Index>(specs.size()));
              for (std::size_t a = 0; a < specs.size(); ++a) v(static_cast<Index>(a)) = chain[i](specs[a].target);
              t.push_back(v);
            }
            traces.push_back(std::move(t));
          }
          o.psrf = to_json(psrf_report(traces, names));
        }
        break;
      }
      case ImputeMethod::da: {
        imps = impute_with(data, method, rc.d, rc.config, master.child(0));
        if (data.has_missing()) {
          DaConfig c;
          c.n_chains = rc.config.value("n_chains", c.n_chains);
          c.burn_in = rc.config.value("burn_in", c.burn_in);
          c.thin = rc.config.value("thin", c.thin);
          c.n_draws = rc.config.value("n_draws", c.n_draws);
          c.jobs = rc.jobs;
          const auto chains = run_da(data, c, master.child(1));
          std::vector<std::vector<MvnParams>> params;
          for (const auto& ch : chains) {
            std::vector<MvnParams> p;
            for (const auto& dr : ch.draws) p.push_back(dr.params);
            params.push_back(std::move(p));
          }
          write_file(fs::path(rc.out) / "draws.csv", draws_csv(params, cols));
          o.outputs.push_back("draws.csv");
          o.psrf = psrf_of_chains(params, cols);
        }
        break;
      }
      case ImputeMethod::monotone: {
        imps = impute_with(data, method, rc.d, rc.config, master.child(0));
        const PatternSummary ps = analyze_patterns(compute_mask(data));
        const std::vector<Index>& order = *ps.monotone_order;
        const DataMatrix ordered = data.select_columns(order);
        const int n_draws = rc.config.value("n_draws", 1000);
        std::vector<MvnParams> draws;
        for (const MvnParams& p : draw_factored_posterior(ordered, n_draws, master.child(1))) {
          MvnParams q;
          const auto k = static_cast<Index>(order.size());
          q.mu.resize(k);
          Eigen::MatrixXd s(k, k);
          for (Index a = 0; a < k; ++a) {
            q.mu(order[static_cast<std::size_t>(a)]) = p.mu(a);
            for (Index b = 0; b < k; ++b) s(order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]) = p.sigma(a, b);
          }
          q.sigma = SymMatrix(s);
          draws.push_back(std::move(q));
        }
        write_file(fs::path(rc.out) / "draws.csv", draws_csv({draws}, cols));
        o.outputs.push_back("draws.csv");
        break;
      }
      case ImputeMethod::pspp: {
        const PsppConfig c = parse_pspp_config(rc.config);
        imps = impute_pspp_m(data, c, rc.d, master.child(0));
        if (data.has_missing()) {
          const int n_chains = rc.config.value("n_chains", 4);
          const int n_keep = rc.config.value("n_keep", 100);
          std::vector<std::vector<Eigen::VectorXd>> traces(static_cast<std::size_t>(n_chains));
          parallel_for(traces.size(), rc.jobs, [&](std::size_t ch) {
            RngStream s = master.child(1).child(ch);
            PsppConfig cc = c;
            cc.spacing = 1;
            const PsppChain chain = run_pspp_chain(data, cc, n_keep, s);
            for (std::size_t t = static_cast<std::size_t>(cc.burn_in); t < chain.mu_trace.size(); ++t) {
              Eigen::VectorXd v(2);
              v << chain.sigma2_trace[t], chain.mu_trace[t];
              traces[ch].push_back(v);
            }
          });
          if (n_chains >= 2 && n_keep >= 4) o.psrf = to_json(psrf_report(traces, {"sigma2", "mu[outcome]"}));
        }
        break;
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid method config: ") + e.what());
  }

  const std::string stem = fs::path(rc.input).stem().string();
  for (std::size_t k = 0; k < imps.size(); ++k) {
    const fs::path p = imputation_path(rc.out, stem, static_cast<int>(k) + 1);
    write_csv(imps[k], p);
    o.outputs.push_back(p.filename().string());
  }
  flag_psrf(o);
  return o;
}

Outcome cmd_pool(const RunConfig& rc) {
  const DataMatrix est = load_input(rc);
  if (est.has_missing()) throw InputError("estimates file has missing cells");
  // Columns: an optional index column d, then theta_<name> with matching se_<name>.
  std::vector<std::string> names;
  std::vector<std::pair<Index, Index>> pairs;
  const auto cols = est.column_names();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const std::string& c = cols[j];
    if (c == "d" || c.rfind("se_", 0) == 0) continue;
    if (c.rfind("theta_", 0) != 0) throw InputError("unexpected column '" + c + "' in estimates file");
    const std::string suffix = c.substr(6);
    const auto se = est.column_index("se_" + suffix);
    if (!se) throw InputError("estimate column '" + c + "' has no 'se_" + suffix + "' column");
    names.push_back(suffix);
    pairs.emplace_back(static_cast<Index>(j), *se);
  }
  if (names.empty()) throw InputError("estimates file has no theta_ columns");
  if (est.rows() < 2) throw InputError("pooling needs at least 2 imputations (rows)");
  std::vector<PerImputationEstimate> rows;
  const auto p = static_cast<Index>(names.size());
  for (Index i = 0; i < est.rows(); ++i) {
    PerImputationEstimate e;
    e.theta_hat.resize(p);
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(p, p);
    for (Index a = 0; a < p; ++a) {
      e.theta_hat(a) = est(i, pairs[static_cast<std::size_t>(a)].first);
      const double se = est(i, pairs[static_cast<std::size_t>(a)].second);
      if (se < 0.0) throw InputError("negative standard error in estimates file");
      v(a, a) = se * se;
    }
    e.v_hat = SymMatrix(v);
    rows.push_back(std::move(e));
  }
  std::optional<double> nu_com;
  double level = 0.95;
  try {
    if (rc.config.contains("nu_com") && !rc.config.at("nu_com").is_null()) nu_com = rc.config.at("nu_com").get<double>();
    level = rc.config.value("level", level);
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid pool config: ") + e.what());
  }
  json j = to_json(pool(rows, nu_com), level);
  j["names"] = names;
  write_file(fs::path(rc.out) / "pool.json", dump(j));
  Outcome o;
  o.outputs.push_back("pool.json");
  return o;
}

Outcome cmd_check(RunConfig& rc) {
  if (rc.source_manifest.empty()) throw InputError("--manifest is required");
  if (!fs::exists(rc.source_manifest)) throw InputError("manifest '" + rc.source_manifest + "' does not exist");
  const fs::path src = rc.source_manifest;
  if (fs::exists(fs::path(rc.out) / "manifest.json") &&
      fs::equivalent(fs::path(rc.out) / "manifest.json", src))
    throw InputError("--out must differ from the checked run's directory");
  const json m = parse_json_text(read_file(src), "manifest");
  if (!m.is_object() || !m.contains("command") || !m.contains("input"))
    throw InputError("manifest is missing required fields");
  if (rc.input.empty()) rc.input = m.at("input").get<std::string>();
  const DataMatrix data = load_input(rc);
  const auto cols = data.column_names();

  Outcome o;
  json report{{"source_manifest", src.string()}, {"method", m.value("method", "")}};
  report["psrf"] = m.contains("psrf") ? m.at("psrf") : json(nullptr);
  o.psrf = report["psrf"];

  const fs::path draws_path = src.parent_path() / "draws.csv";
  json ppcs = json::array();
  if (fs::exists(draws_path)) {
    const auto chains = read_draws(draws_path, data.cols());
    const json recomputed = psrf_of_chains(chains, cols);
    if (!recomputed.is_null()) report["psrf"] = o.psrf = recomputed;
    std::vector<MvnParams> all;
    for (const auto& c : chains)
      for (const auto& p : c) all.push_back(p);
    const auto max_draws = static_cast<std::size_t>(rc.config.value("max_draws", 1000));
    std::vector<MvnParams> used;
    if (all.size() > max_draws && max_draws > 0) {
      for (std::size_t t = 0; t < max_draws; ++t) used.push_back(all[t * all.size() / max_draws]);
    } else {
      used = all;
    }
    std::vector<std::string> discrepancies;
    if (rc.config.contains("discrepancies")) {
      discrepancies = rc.config.at("discrepancies").get<std::vector<std::string>>();
    } else {
      for (const auto& c : cols) {
        discrepancies.push_back("mean:" + c);
        discrepancies.push_back("variance:" + c);
      }
      if (cols.size() >= 2) discrepancies.push_back("max_corr");
    }
    const RngStream master(*rc.seed);
    for (std::size_t i = 0; i < discrepancies.size(); ++i)
      ppcs.push_back(to_json(ppc(data, used, discrepancies[i], master.child(i))));
  } else {
    o.warnings.push_back("no posterior draws recorded for this run; predictive checks skipped");
  }
  report["ppc"] = ppcs;
  write_file(fs::path(rc.out) / "check.json", dump(report));
  o.outputs.push_back("check.json");
  flag_psrf(o);
  if (!o.warnings.empty()) o.code = kExitWarnings;
  return o;
}

Outcome cmd_simulate(const RunConfig& rc) {
  json scenario_json = rc.config;
  if (scenario_json.empty() && !rc.input.empty()) scenario_json = parse_json_text(read_file(rc.input), rc.input);
  const SimScenario s = parse_scenario(scenario_json);
  const CoverageReport rep = run_coverage(s, RngStream(*rc.seed).child(0), rc.jobs);
  json j = to_json(rep);
  j["scenario"] = to_json(s);
  write_file(fs::path(rc.out) / "coverage.json", dump(j));
  write_file(fs::path(rc.out) / "replicates.csv", records_csv(rep));
  Outcome o;
  o.outputs = {"coverage.json", "replicates.csv"};
  return o;
}

int dispatch(RunConfig& rc, std::ostream& out) {
  if (!rc.seed) rc.seed = fresh_seed();
  fs::create_directories(rc.out);
  Outcome o;
  if (rc.command == "em") o = cmd_em(rc);
  else if (rc.command == "impute") o = cmd_impute(rc);
  else if (rc.command == "pool") o = cmd_pool(rc);
  else if (rc.command == "check") o = cmd_check(rc);
  else if (rc.command == "simulate") o = cmd_simulate(rc);
  else throw InputError("unknown command '" + rc.command + "'");
  write_manifest(rc, o);
  for (const auto& w : o.warnings) out << "warning: " << w << '\n';
  out << rc.command << ": wrote " << o.outputs.size() << " file(s) to " << rc.out << " (seed " << *rc.seed << ")\n";
  return o.code;
}

RunConfig from_manifest(const std::string& path) {
  if (!fs::exists(path)) throw InputError("manifest '" + path + "' does not exist");
  const json m = parse_json_text(read_file(path), "manifest");
  RunConfig rc;
  try {
    rc.command = m.at("command").get<std::string>();
    rc.method = m.at("method").get<std::string>();
    rc.d = m.at("d").get<int>();
    rc.seed = m.at("seed").get<std::uint64_t>();
    rc.config = m.at("config");
    rc.input = m.at("input").get<std::string>();
    if (m.contains("source_manifest")) rc.source_manifest = m.at("source_manifest").get<std::string>();
    if (fnv1a_hex(resolved_config(rc).dump()) != m.at("config_hash").get<std::string>())
      throw InputError("manifest config hash does not match its contents");
    if (!rc.input.empty() && m.at("input_hash").is_string() &&
        fnv1a_hex(read_file(rc.input)) != m.at("input_hash").get<std::string>())
      throw InputError("input '" + rc.input + "' has changed since the recorded run");
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid manifest: ") + e.what());
  }
  return rc;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << h;
  return s.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiple imputation, pooling and calibration diagnostics"};
  app.require_subcommand(1);
  RunConfig rc;
  rc.jobs = default_jobs();
  std::string config_arg;
  std::string replay_manifest;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--input", rc.input, "Input CSV")->envname("CALIBRA_INPUT");
    sub->add_option("--seed", rc.seed, "Master seed (random when omitted)")->envname("CALIBRA_SEED");
    sub->add_option("--jobs", rc.jobs, "Worker threads")->envname("CALIBRA_JOBS")->check(CLI::PositiveNumber);
    sub->add_option("--config", config_arg, "JSON config file or inline JSON")->envname("CALIBRA_CONFIG");
    sub->add_option("--out", rc.out, "Output directory")->envname("CALIBRA_OUT");
  };
  CLI::App* em = app.add_subcommand("em", "Maximum likelihood by EM");
  add_common(em);
  CLI::App* imp = app.add_subcommand("impute", "Create D completed datasets");
  add_common(imp);
  imp->add_option("--method", rc.method, "em|da|srmi|monotone|pspp")->envname("CALIBRA_METHOD");
  imp->add_option("--d", rc.d, "Number of imputations")->envname("CALIBRA_D");
  CLI::App* pl = app.add_subcommand("pool", "Combine per-imputation estimates");
  add_common(pl);
  CLI::App* ck = app.add_subcommand("check", "Convergence and posterior predictive checks");
  add_common(ck);
  ck->add_option("--manifest", rc.source_manifest, "Manifest of an impute run");
  CLI::App* sim = app.add_subcommand("simulate", "Coverage simulation");
  add_common(sim);
  CLI::App* rp = app.add_subcommand("replay", "Re-run a recorded command from its manifest");
  rp->add_option("--manifest", replay_manifest, "Manifest to replay")->required();
  rp->add_option("--out", rc.out, "Output directory")->envname("CALIBRA_OUT");
  rp->add_option("--jobs", rc.jobs, "Worker threads")->envname("CALIBRA_JOBS")->check(CLI::PositiveNumber);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  try {
    if (rp->parsed()) {
      RunConfig replay = from_manifest(replay_manifest);
      replay.out = rc.out;
      replay.jobs = rc.jobs;
      return dispatch(replay, out);
    }
    rc.command = app.get_subcommands().front()->get_name();
    if (rc.command != "impute") rc.method = rc.command == "em" ? "em" : "";
    if (rc.command != "impute") rc.d = 0;
    rc.config = load_config(config_arg);
    return dispatch(rc, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const json::exception& e) {
    err << "error: invalid JSON value: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace calibra
