#pragma once

// Command-line surface. run_command() is the whole tool; main() only forwards
// argv so that tests can drive every subcommand in-process.

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vbflex/experiment.hpp"
#include "vbflex/io.hpp"

namespace vbflex {

struct CliOptions {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::optional<std::size_t> horizon;
  std::optional<std::string> algorithm;
  std::optional<std::string> convention;
  std::optional<std::string> policy;
  std::string model_path;
  std::string commitment_path;
  std::vector<std::size_t> days;
  std::optional<std::size_t> scenarios;
  std::size_t scenario = 0;
  std::string manifest_path;
  std::string report_dir;
};

namespace detail {

inline json options_json(const CliOptions& o) {
  json j;
  if (o.policy) j["policy"] = *o.policy;
  if (o.algorithm) j["algorithm"] = *o.algorithm;
  j["scenario"] = o.scenario;
  for (const auto& [key, path] : {std::pair<const char*, std::string>{"model", o.model_path}, {"commitment", o.commitment_path}}) {
    if (path.empty()) continue;
    const fs::path abs = fs::absolute(path);
    j[key] = {{"path", abs.string()}, {"fnv1a64", hex64(fnv1a64(read_file(abs)))}};
  }
  return j;
}

inline void options_from_json(const json& j, CliOptions& o) {
  if (j.contains("policy")) o.policy = j.at("policy").get<std::string>();
  if (j.contains("algorithm")) o.algorithm = j.at("algorithm").get<std::string>();
  o.scenario = j.value("scenario", std::size_t{0});
  for (const char* key : {"model", "commitment"}) {
    if (!j.contains(key)) continue;
    const std::string path = j.at(key).at("path").get<std::string>();
    if (!fs::exists(path)) throw Error(std::string("replay: ") + key + " file not found: " + path);
    if (hex64(fnv1a64(read_file(path))) != j.at(key).at("fnv1a64").get<std::string>())
      throw Error(std::string("replay: ") + key + " file changed since the run: " + path);
    (std::string(key) == "model" ? o.model_path : o.commitment_path) = path;
  }
}

/// Loads the configuration and folds command-line overrides into it so that
/// the config hash covers everything that shapes the outputs.
inline ScenarioConfig load_config(const CliOptions& o, fs::path& base_dir) {
  json j;
  base_dir = ".";
  if (o.config_path.empty()) {
    j = default_config_json();
  } else {
    try {
      j = json::parse(read_file(o.config_path));
    } catch (const json::parse_error& e) {
      throw Error(o.config_path + ": invalid JSON: " + e.what());
    }
    base_dir = fs::path(o.config_path).parent_path();
    if (base_dir.empty()) base_dir = ".";
  }
  if (!j.is_object()) throw Error("config: expected a JSON object");
  if (o.seed) j["seed"] = *o.seed;
  if (o.horizon) j["horizon"] = *o.horizon;
  if (o.convention) j["convention"] = *o.convention;
  if (o.algorithm) j["algorithm"] = *o.algorithm;
  if (!o.days.empty()) j["dr"]["days"] = o.days;
  if (o.scenarios) j["dr"]["scenarios"] = *o.scenarios;
  try {
    return parse_config_json(j, base_dir);
  } catch (const Error& e) {
    if (o.config_path.empty()) throw;
    throw Error(o.config_path + ": " + e.what());
  }
}

inline std::vector<std::string> zone_columns(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

inline void append(std::vector<std::string>& a, const std::vector<std::string>& b) { a.insert(a.end(), b.begin(), b.end()); }

inline void append_col(std::vector<double>& row, const Mat& M, Eigen::Index k) {
  for (Eigen::Index i = 0; i < M.rows(); ++i) row.push_back(M(i, k));
}

inline std::string metrics_csv(const std::string& hash, const std::vector<MetricRow>& rows) {
  CsvTable t(hash, {"features", "train", "test", "MAPE", "RMSE", "MAE", "RSE", "RAE", "Corr", "samples", "mape_excluded"});
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    t.add({r.features, r.train, r.test, format_double(m.MAPE), format_double(m.RMSE), format_double(m.MAE),
           format_double(m.RSE), format_double(m.RAE), format_double(m.Corr), std::to_string(m.samples),
           std::to_string(m.mape_excluded)});
  }
  return t.str();
}

inline SurrogateModel load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(path + ": invalid JSON: " + e.what());
  }
  return surrogate_from_json(j, path);
}

inline std::vector<double> read_committed_energy(const std::string& path) {
  const CsvData d = parse_csv(read_file(path), path);
  const std::size_t c = d.column("Q_tol_hat", path);
  std::vector<double> out;
  for (const auto& r : d.rows) out.push_back(r[c]);
  return out;
}

struct Context {
  const CliOptions& opt;
  const ScenarioConfig& cfg;
  const Building& building;
  OutputDir& out;
  std::ostream& log;
  std::uint64_t seed() const { return cfg.seed; }
};

inline void cmd_simulate(Context& c) {
  const std::size_t K = c.cfg.horizon;
  const std::size_t n = c.building.zones();
  const std::string name = c.opt.policy.value_or("pid");
  const ExogenousSeries exo = scenario_exo(c.cfg, derive_seed(c.seed(), "simulate.exo"), K);
  const Policy p = make_policy(name, c.cfg, c.building, exo, K, derive_seed(c.seed(), "simulate.policy"));
  const RunOptions ro{c.cfg.convention, aggregation_weights(c.building, c.cfg.convention).eig.w};
  const SimulationRun run = run_policy(p, c.building, exo, initial_temperatures(c.building), K, ro);
  const Trajectory& tr = run.trajectory;
  std::vector<std::string> head = {"k", "T_out"};
  append(head, zone_columns("T_", n));
  append(head, zone_columns("m_", n));
  append(head, zone_columns("q_", n));
  append(head, {"Q", "Q_tol", "soc"});
  append(head, zone_columns("T_next_", n));
  append(head, {"soc_next"});
  CsvTable t(c.cfg.hash, head);
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    std::vector<double> row = {static_cast<double>(k), tr.T_out[k]};
    append_col(row, tr.T, kk);
    append_col(row, tr.m, kk);
    append_col(row, tr.q, kk);
    row.insert(row.end(), {tr.Q[k], tr.Q_tol[k], tr.soc[k]});
    append_col(row, tr.T, kk + 1);
    row.push_back(tr.soc[k + 1]);
    t.add_numbers(row);
  }
  c.out.write("trajectory.csv", t.str());
  for (const auto& w : run.warnings) c.log << "warning: " << w << "\n";
  c.log << "simulate: policy " << run.policy << ", K=" << K << ", cost " << format_double(energy_cost(tr.Q_tol, policy_prices(c.cfg, K)))
        << ", clipped controls " << run.clipped_controls << "\n";
}

inline void cmd_build_vb(Context& c) {
  const std::size_t K = c.cfg.horizon;
  const ExogenousSeries exo = scenario_exo(c.cfg, derive_seed(c.seed(), "build.exo"), K);
  const VBAggregate vb = build_aggregate(c.building, exo, c.cfg.convention, box_betas_for(c.cfg.algorithm));
  c.out.write("vb.json", to_json(vb).dump(2) + "\n");
  CsvTable steps(c.cfg.hash, {"k", "T_out", "Q_base", "wBq_base", "beta_min", "beta_max", "Q_min", "Q_max"});
  for (std::size_t k = 0; k < K; ++k)
    steps.add_numbers({static_cast<double>(k), exo.T_out[k], vb.Q_base(k), vb.wBq_base[k], vb.beta_min[k],
                       vb.beta_max[k], vb.Q_min[k], vb.Q_max[k]});
  c.out.write("vb_steps.csv", steps.str());
  CsvTable zones(c.cfg.hash, {"zone", "w", "B_tilde", "A_tilde_row_sum"});
  for (Eigen::Index i = 0; i < vb.zones(); ++i)
    zones.add_numbers({static_cast<double>(i + 1), vb.w[i], vb.B_tilde[i], vb.A_tilde.row(i).sum()});
  c.out.write("vb_zones.csv", zones.str());
  c.log << "build-vb: alpha " << format_double(vb.alpha) << ", K=" << K << ", baseline violations "
        << vb.baseline_violations.size() << "\n";
}

inline void cmd_validate_soc(Context& c) {
  std::vector<std::string> policies = {"random", "pid", "greedy"};
  if (c.opt.policy) policies = {*c.opt.policy};
  std::vector<BetaAlgorithm> algos = {BetaAlgorithm::conservative, BetaAlgorithm::step_ahead, BetaAlgorithm::tight};
  if (c.opt.algorithm) algos = {c.cfg.algorithm};
  const auto grid = validate_soc_grid(c.cfg, c.building, c.seed(), policies, algos);
  CsvTable summary(c.cfg.hash, {"policy", "algorithm", "max_up_gap", "max_dn_gap", "containment_violations", "Q_box_violations"});
  for (const auto& v : grid) {
    CsvTable t(c.cfg.hash, {"k", "soc_true", "soc_up", "soc_dn"});
    for (std::size_t k = 0; k < v.bounds.soc_true.size(); ++k)
      t.add_numbers({static_cast<double>(k), v.bounds.soc_true[k], v.bounds.soc_up[k], v.bounds.soc_dn[k]});
    c.out.write("soc_" + v.policy + "_" + to_string(v.algorithm) + ".csv", t.str());
    summary.add({v.policy, to_string(v.algorithm), format_double(v.max_up_gap), format_double(v.max_dn_gap),
                 std::to_string(v.containment_violations), std::to_string(v.bounds.Q_violations.size())});
    c.log << "validate-soc: " << v.policy << "/" << to_string(v.algorithm) << " max|up-true| "
          << format_double(v.max_up_gap) << " max|dn-true| " << format_double(v.max_dn_gap) << " outside "
          << v.containment_violations << "\n";
  }
  c.out.write("soc_summary.csv", summary.str());
}

inline void cmd_fit_energy(Context& c) {
  const SurrogateSuite s = train_surrogates(c.cfg, c.building, c.seed());
  c.out.write("surrogate.json", to_json(s.affine).dump(2) + "\n");
  c.out.write("surrogate_full.json", to_json(s.full).dump(2) + "\n");
  c.out.write("metrics.csv", metrics_csv(c.cfg.hash, s.matrix));
  for (const auto& r : s.matrix)
    if (r.train == "mixture" && r.test == "mixture")
      c.log << "fit-energy: " << r.features << " mixture test MAPE " << format_double(r.metrics.MAPE) << "% Corr "
            << format_double(r.metrics.Corr) << "\n";
}

inline void cmd_eval_energy(Context& c) {
  if (c.opt.model_path.empty()) throw Error("eval-energy: --model is required");
  const SurrogateModel m = load_model(c.opt.model_path);
  const TrainingData td = generate_training_data(c.cfg, c.building, c.seed());
  std::vector<MetricRow> rows;
  for (std::size_t i = 0; i < td.names.size(); ++i)
    rows.push_back({"file", m.dataset, td.names[i], evaluate(m, td.splits[i].test)});
  rows.push_back({"file", m.dataset, "mixture", evaluate(m, td.mixture.test)});
  c.out.write("eval.csv", metrics_csv(c.cfg.hash, rows));
  c.log << "eval-energy: mixture test MAPE " << format_double(rows.back().metrics.MAPE) << "% Corr "
        << format_double(rows.back().metrics.Corr) << "\n";
}

inline SurrogateModel scheduler_model(Context& c) {
  if (!c.opt.model_path.empty()) return load_model(c.opt.model_path);
  SurrogateModel m = train_surrogates(c.cfg, c.building, c.seed(), false).affine;
  c.out.write("surrogate.json", to_json(m).dump(2) + "\n");
  return m;
}

inline void write_commitment(Context& c, const DrScenario& s) {
  const DRCommitment& cm = s.commitment;
  CsvTable t(c.cfg.hash, {"k", "price", "T_out", "soc", "soc_next", "P_chdis", "Q", "Q_tol_hat"});
  for (std::size_t k = 0; k < s.K; ++k)
    t.add_numbers({static_cast<double>(k), s.price[k], s.exo.T_out[k], cm.soc[k], cm.soc[k + 1], cm.P_chdis[k], cm.Q[k],
                   cm.Q_tol_hat[k]});
  c.out.write("commitment.csv", t.str());
  c.log << "dr-commit: K=" << s.K << " predicted cost " << format_double(cm.objective) << " (" << cm.lp_rows << " rows, "
        << cm.lp_cols << " columns, " << cm.pivots << " pivots, max violation " << format_double(cm.max_violation) << ")\n";
}

inline void write_tracking(Context& c, const DrScenario& s, const std::vector<double>& committed) {
  const std::size_t n = c.building.zones();
  const Trajectory& tr = s.tracking.trajectory;
  std::vector<std::string> head = {"k", "committed", "realised", "residual", "level"};
  append(head, zone_columns("m_", n));
  append(head, zone_columns("T_next_", n));
  CsvTable t(c.cfg.hash, head);
  for (std::size_t k = 0; k < s.K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    std::vector<double> row = {static_cast<double>(k), committed[k], tr.Q_tol[k], s.tracking.residual[k], s.tracking.level[k]};
    append_col(row, tr.m, kk);
    append_col(row, tr.T, kk + 1);
    t.add_numbers(row);
  }
  c.out.write("tracking.csv", t.str());
  c.log << "dr-track: Cost_VB " << format_double(s.tracking.cost) << ", comfort violations "
        << s.tracking.comfort_violations << ", infeasible intervals " << s.tracking.infeasible_intervals << "\n";
}

inline void cmd_dr_commit(Context& c) {
  const SurrogateModel m = scheduler_model(c);
  const DrScenario s = run_dr_scenario(c.cfg, c.building, m, c.cfg.horizon, c.seed(), c.opt.scenario, DrStage::commit,
                                       "dr-commit");
  write_commitment(c, s);
}

inline void cmd_dr_track(Context& c) {
  DrScenario s;
  std::vector<double> committed;
  if (!c.opt.commitment_path.empty()) {
    committed = read_committed_energy(c.opt.commitment_path);
    s = prepare_dr_scenario(c.cfg, c.building, committed.size(), c.seed(), c.opt.scenario, "dr-track");
    s.tracking = lower_level_track(committed, c.building, s.exo, s.price, initial_temperatures(c.building));
    s.tracked = true;
  } else {
    const SurrogateModel m = scheduler_model(c);
    s = run_dr_scenario(c.cfg, c.building, m, c.cfg.horizon, c.seed(), c.opt.scenario, DrStage::track, "dr-track");
    committed = s.commitment.Q_tol_hat;
    write_commitment(c, s);
  }
  write_tracking(c, s, committed);
}

inline void cmd_dr_oracle(Context& c) {
  const SurrogateModel m = scheduler_model(c);
  const DrScenario s = run_dr_scenario(c.cfg, c.building, m, c.cfg.horizon, c.seed(), c.opt.scenario, DrStage::oracle,
                                       "dr-oracle");
  write_commitment(c, s);
  write_tracking(c, s, s.commitment.Q_tol_hat);
  const std::size_t n = c.building.zones();
  const Trajectory& tr = s.oracle.trajectory;
  std::vector<std::string> head = {"k", "Q", "Q_tol"};
  append(head, zone_columns("m_", n));
  append(head, zone_columns("T_next_", n));
  CsvTable t(c.cfg.hash, head);
  for (std::size_t k = 0; k < s.K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    std::vector<double> row = {static_cast<double>(k), tr.Q[k], tr.Q_tol[k]};
    append_col(row, tr.m, kk);
    append_col(row, tr.T, kk + 1);
    t.add_numbers(row);
  }
  c.out.write("oracle.csv", t.str());
  CsvTable starts(c.cfg.hash, {"start", "cost"});
  for (std::size_t i = 0; i < s.oracle.start_names.size(); ++i)
    starts.add({s.oracle.start_names[i], format_double(s.oracle.start_costs[i])});
  c.out.write("oracle_starts.csv", starts.str());
  const DrReport& r = s.report;
  CsvTable rep(c.cfg.hash, {"K", "Cost_Opt", "Cost_VB", "gap_percent", "predicted_cost", "vars_rc", "vars_rc_table",
                            "vars_vb", "vars_vb_table"});
  rep.add_numbers({static_cast<double>(r.K), r.cost_opt, r.cost_vb, r.gap_percent, r.predicted_cost,
                   static_cast<double>(r.vars_rc), static_cast<double>(r.vars_rc_table), static_cast<double>(r.vars_vb),
                   static_cast<double>(r.vars_vb_table)});
  c.out.write("dr_report.csv", rep.str());
  c.log << "dr-oracle: Cost_Opt " << format_double(r.cost_opt) << " (start " << s.oracle.best_start << "), gap "
        << format_double(r.gap_percent) << "%\n";
}

inline void cmd_dr_batch(Context& c) {
  const SurrogateModel m = scheduler_model(c);
  const std::size_t n = c.building.zones();
  CsvTable per(c.cfg.hash, {"days", "K", "scenario", "Cost_Opt", "Cost_VB", "gap_percent", "predicted_cost",
                            "comfort_violations", "best_start"});
  CsvTable summary(c.cfg.hash, {"days", "K", "scenarios", "Cost_Opt_avg", "vars_rc", "vars_rc_table", "Cost_VB_avg",
                                "vars_vb", "vars_vb_table", "gap_percent", "gap_of_means_percent", "sandwich_failures",
                                "comfort_violations"});
  for (std::size_t days : c.cfg.batch_days) {
    const std::size_t K = days * c.cfg.steps_per_day();
    std::vector<DrScenario> runs;
    for (std::size_t s = 0; s < c.cfg.scenarios; ++s) {
      runs.push_back(run_dr_scenario(c.cfg, c.building, m, K, c.seed(), s));
      const DrScenario& r = runs.back();
      per.add({std::to_string(days), std::to_string(K), std::to_string(s), format_double(r.report.cost_opt),
               format_double(r.report.cost_vb), format_double(r.report.gap_percent),
               format_double(r.report.predicted_cost), std::to_string(r.tracking.comfort_violations),
               r.oracle.best_start});
      // Trajectories are not kept across the batch.
      runs.back().exo = {};
      runs.back().vb = {};
    }
    const DrBatchRow row = summarize_batch(days, runs, n);
    summary.add({std::to_string(days), std::to_string(K), std::to_string(row.scenarios), format_double(row.cost_opt_mean),
                 std::to_string(row.vars.vars_rc), std::to_string(row.vars.vars_rc_table),
                 format_double(row.cost_vb_mean), std::to_string(row.vars.vars_vb),
                 std::to_string(row.vars.vars_vb_table), format_double(row.gap_mean), format_double(row.gap_of_means),
                 std::to_string(row.sandwich_failures), std::to_string(row.comfort_violations)});
    c.log << "dr-batch: " << days << " day(s), K=" << K << ": Cost_Opt " << format_double(row.cost_opt_mean)
          << ", Cost_VB " << format_double(row.cost_vb_mean) << ", mean gap " << format_double(row.gap_mean) << "%\n";
  }
  c.out.write("dr_scenarios.csv", per.str());
  c.out.write("dr_summary.csv", summary.str());
}

inline int cmd_report(const std::string& dir, std::ostream& log) {
  std::vector<fs::path> manifests;
  if (fs::is_directory(dir)) {
    if (fs::exists(fs::path(dir) / "manifest.json")) manifests.push_back(fs::path(dir) / "manifest.json");
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && fs::exists(e.path() / "manifest.json")) manifests.push_back(e.path() / "manifest.json");
  } else if (!fs::exists(dir)) {
    throw Error(dir + ": no such directory");
  }
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty()) {
    log << "report: no runs found in " << dir << "\n";
    return 0;
  }
  for (const auto& p : manifests) {
    const json m = json::parse(read_file(p));
    log << p.parent_path().string() << ": " << m.value("command", "?") << " seed " << m.value("seed", 0ULL)
        << " config " << m.value("config_hash", "?") << ", " << m.at("outputs").size() << " files\n";
    const fs::path summary = p.parent_path() / "dr_summary.csv";
    if (fs::exists(summary)) {
      const CsvData d = parse_csv(read_file(summary), summary.string());
      for (const auto& r : d.rows)
        log << "  " << d.header[0] << "=" << r[0] << " K=" << r[1] << " Cost_Opt " << r[3] << " Cost_VB " << r[6]
            << " gap " << r[9] << "%\n";
    }
  }
  return 0;
}

inline void dispatch(Context& c) {
  const std::string& cmd = c.opt.command;
  if (cmd == "simulate") return cmd_simulate(c);
  if (cmd == "build-vb") return cmd_build_vb(c);
  if (cmd == "validate-soc") return cmd_validate_soc(c);
  if (cmd == "fit-energy") return cmd_fit_energy(c);
  if (cmd == "eval-energy") return cmd_eval_energy(c);
  if (cmd == "dr-commit") return cmd_dr_commit(c);
  if (cmd == "dr-track") return cmd_dr_track(c);
  if (cmd == "dr-oracle") return cmd_dr_oracle(c);
  if (cmd == "dr-batch") return cmd_dr_batch(c);
  throw Error("unknown command '" + cmd + "'");
}

/// Runs one pipeline command into opt.out_dir and writes its manifest.
inline void execute(const CliOptions& opt, const ScenarioConfig& cfg, const fs::path& config_base,
                    const std::vector<std::string>& args, std::ostream& log) {
  const Building building(cfg.building);
  OutputDir out(opt.out_dir);
  try {
    Context c{opt, cfg, building, out, log};
    dispatch(c);
    // Replay needs the options and the base directory for relative CSV paths.
    const json extra = {{"options", options_json(opt)},
                        {"config_base", fs::absolute(config_base).lexically_normal().string()}};
    out.write_manifest(cfg, opt.command, args, cfg.seed, extra);
  } catch (...) {
    out.remove_partial();
    std::error_code ec;
    fs::remove(out.path() / "manifest.json", ec);
    throw;
  }
}

inline int replay(const CliOptions& opt, std::ostream& log, std::ostream& err) {
  const fs::path mpath = opt.manifest_path;
  json m;
  try {
    m = json::parse(read_file(mpath));
  } catch (const json::parse_error& e) {
    throw Error(mpath.string() + ": invalid JSON: " + e.what());
  }
  CliOptions o;
  o.command = m.at("command").get<std::string>();
  o.out_dir = opt.out_dir;
  options_from_json(m.value("options", json::object()), o);
  const fs::path base = m.value("config_base", std::string("."));
  const ScenarioConfig cfg = parse_config_json(m.at("config"), base);
  if (cfg.hash != m.at("config_hash").get<std::string>())
    throw Error(mpath.string() + ": embedded config does not match its hash");
  if (fs::absolute(o.out_dir).lexically_normal() == fs::absolute(mpath.parent_path()).lexically_normal())
    throw Error("replay: --out-dir must differ from the manifest's directory");
  execute(o, cfg, base, m.at("args").get<std::vector<std::string>>(), log);
  std::size_t same = 0, differ = 0;
  for (const auto& f : m.at("outputs")) {
    const std::string name = f.at("file").get<std::string>();
    const fs::path p = fs::path(o.out_dir) / name;
    const bool ok = fs::exists(p) && hex64(fnv1a64(read_file(p))) == f.at("fnv1a64").get<std::string>();
    if (ok) {
      ++same;
    } else {
      ++differ;
      err << "replay: " << name << " differs\n";
    }
  }
  log << "replay: " << same << " identical, " << differ << " different\n";
  return differ == 0 ? 0 : 1;
}

}  // namespace detail

inline int run_command(const std::vector<std::string>& argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Virtual-battery flexibility toolkit for multi-zone HVAC buildings", "vbflex"};
  app.set_version_flag("--version", std::string(VBFLEX_VERSION));
  app.require_subcommand(1);
  CliOptions opt;

  auto common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON configuration (defaults to the built-in reference building)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "root seed");
    sub->add_option("--out-dir", opt.out_dir, "output directory")->capture_default_str();
    sub->add_option("--horizon", opt.horizon, "steps K")->check(CLI::PositiveNumber);
    sub->add_option("--algorithm", opt.algorithm, "beta algorithm")
        ->check(CLI::IsMember({"conservative", "step-ahead", "tight"}));
    sub->add_option("--convention", opt.convention, "soz convention")->check(CLI::IsMember({"centered", "unit"}));
    sub->add_option("--policy", opt.policy, "airflow policy")->check(CLI::IsMember({"random", "pid", "greedy", "baseline"}));
  };
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"simulate", "simulate one policy on the RC model"},
      {"build-vb", "build the aggregate virtual battery"},
      {"validate-soc", "compare soc bounds with simulated soc (policy x algorithm grid)"},
      {"fit-energy", "generate training data and fit the energy surrogate"},
      {"eval-energy", "evaluate a saved surrogate on fresh data"},
      {"dr-commit", "solve the upper-level commitment"},
      {"dr-track", "track a commitment on the RC model"},
      {"dr-oracle", "commit, track and compare with the RC optimum"},
      {"dr-batch", "demand-response batch over several horizons"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    common(sub);
    subs.push_back(sub);
    const std::string n = name;
    if (n == "eval-energy" || n.rfind("dr-", 0) == 0)
      sub->add_option("--model", opt.model_path, "surrogate model JSON")->check(CLI::ExistingFile);
    if (n == "dr-track") sub->add_option("--commitment", opt.commitment_path, "commitment CSV")->check(CLI::ExistingFile);
    if (n == "dr-commit" || n == "dr-track" || n == "dr-oracle")
      sub->add_option("--scenario", opt.scenario, "scenario index")->capture_default_str();
    if (n == "dr-batch") {
      sub->add_option("--days", opt.days, "horizons in days, comma separated (default 1,3,5)")->delimiter(',');
      sub->add_option("--scenarios", opt.scenarios, "scenarios per horizon (default 30)")->check(CLI::PositiveNumber);
    }
  }
  CLI::App* rep = app.add_subcommand("report", "summarise the runs under a directory");
  rep->add_option("dir", opt.report_dir, "directory holding run outputs")->required();
  CLI::App* rpl = app.add_subcommand("replay", "rerun a manifest and compare outputs byte for byte");
  rpl->add_option("manifest", opt.manifest_path, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
  rpl->add_option("--out-dir", opt.out_dir, "output directory for the rerun")->required();

  std::vector<std::string> reversed(argv.rbegin(), argv.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, log, err);
  }

  try {
    if (rep->parsed()) return detail::cmd_report(opt.report_dir, log);
    if (rpl->parsed()) return detail::replay(opt, log, err);
    for (CLI::App* s : subs)
      if (s->parsed()) opt.command = s->get_name();
    fs::path base;
    const ScenarioConfig cfg = detail::load_config(opt, base);
    detail::execute(opt, cfg, base, argv, log);
    log << opt.command << ": wrote " << opt.out_dir << " (config " << cfg.hash << ")\n";
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace vbflex
