#pragma once

// Experiment pipelines shared by the command-line tool and the acceptance
// checks: training-data generation, surrogate fitting, the soc validation
// grid and demand-response scenarios.

#include <string>
#include <vector>

#include "vbflex/dr.hpp"
#include "vbflex/io.hpp"
#include "vbflex/policy.hpp"
#include "vbflex/surrogate.hpp"
#include "vbflex/vb.hpp"

namespace vbflex {

inline const std::vector<PolicyKind>& training_policies() {
  static const std::vector<PolicyKind> kinds = {PolicyKind::random, PolicyKind::pid, PolicyKind::price_greedy};
  return kinds;
}

/// Prices used by the greedy policy when the configuration has no tariff.
inline std::vector<double> policy_prices(const ScenarioConfig& cfg, std::size_t K) {
  if (cfg.tariff.present) return scenario_tariff(cfg, K, "policy");
  return tou_tariff(default_tou_periods(), K, cfg.building.dt);
}

/// Policy by command-line name: random, pid, greedy or baseline.
inline Policy make_policy(const std::string& name, const ScenarioConfig& cfg, const Building& b,
                          const ExogenousSeries& exo, std::size_t K, std::uint64_t seed) {
  if (name == "random") return Policy::random(seed);
  if (name == "pid") return Policy::pid(cfg.pid);
  if (name == "greedy") {
    Policy p = Policy::price_greedy(policy_prices(cfg, K), cfg.median_window);
    p.greedy = cfg.greedy;
    return p;
  }
  if (name == "baseline")
    return Policy::fixed(baseline_cooling(b, exo.head(K), hold_temperatures(b, cfg.convention)).m_base);
  throw Error("unknown policy '" + name + "' (expected random|pid|greedy|baseline)");
}

inline Policy make_policy(PolicyKind kind, const ScenarioConfig& cfg, const Building& b, const ExogenousSeries& exo,
                          std::size_t K, std::uint64_t seed) {
  return make_policy(to_string(kind), cfg, b, exo, K, seed);
}

/// Initial temperatures: every zone at its setpoint.
inline Vec initial_temperatures(const Building& b) { return b.T_set(); }

// ---------------------------------------------------------------------------
// Surrogate training

struct TrainingData {
  std::vector<std::string> names;  // one per policy
  std::vector<Dataset> datasets;
  std::vector<DatasetSplits> splits;
  DatasetSplits mixture;
};

/// days_per_policy simulated days per policy, in runs of run_days days, each
/// run on its own synthetic weather.
inline TrainingData generate_training_data(const ScenarioConfig& cfg, const Building& b, std::uint64_t seed) {
  const auto& s = cfg.surrogate;
  const std::size_t per_day = cfg.steps_per_day();
  const std::size_t K = s.run_days * per_day;
  const std::size_t runs = s.days_per_policy / s.run_days;
  const Vec w = aggregation_weights(b, cfg.convention).eig.w;
  const RunOptions ro{cfg.convention, w};
  TrainingData td;
  for (PolicyKind kind : training_policies()) {
    const std::string name = to_string(kind);
    std::vector<SimulationRun> sims;
    for (std::size_t r = 0; r < runs; ++r) {
      const ExogenousSeries exo = scenario_exo(cfg, derive_seed(seed, "train.exo." + name, r), K);
      const Policy p = make_policy(kind, cfg, b, exo, K, derive_seed(seed, "train.policy." + name, r));
      sims.push_back(run_policy(p, b, exo, initial_temperatures(b), K, ro));
    }
    td.names.push_back(name);
    td.datasets.push_back(build_dataset(sims, s.features.lags, name));
    td.splits.push_back(split_dataset(td.datasets.back()));
  }
  td.mixture = split_dataset(mixture_dataset(td.datasets, s.segment, "mixture"));
  return td;
}

struct MetricRow {
  std::string features;  // "full" or "affine"
  std::string train;
  std::string test;
  MetricReport metrics;
};

struct SurrogateSuite {
  TrainingData data;
  SurrogateModel affine;  // mixture-trained, decision-affine; used by the scheduler
  SurrogateModel full;    // mixture-trained, configured features
  std::vector<MetricRow> matrix;
};

inline std::vector<MetricRow> metric_matrix(const TrainingData& td, const FeatureSpec& f, const std::string& label,
                                            double damping) {
  FitOptions fo;
  fo.relative_damping = damping;
  std::vector<std::pair<std::string, const DatasetSplits*>> sets;
  for (std::size_t i = 0; i < td.names.size(); ++i) sets.push_back({td.names[i], &td.splits[i]});
  sets.push_back({"mixture", &td.mixture});
  std::vector<MetricRow> rows;
  for (const auto& [train_name, train] : sets) {
    const SurrogateModel m = fit(train->train, f, fo);
    for (const auto& [test_name, test] : sets) rows.push_back({label, train_name, test_name, evaluate(m, test->test)});
  }
  return rows;
}

inline SurrogateSuite train_surrogates(const ScenarioConfig& cfg, const Building& b, std::uint64_t seed,
                                       bool with_matrix = true) {
  SurrogateSuite s;
  s.data = generate_training_data(cfg, b, seed);
  FitOptions fo;
  fo.relative_damping = cfg.surrogate.damping;
  s.full = fit(s.data.mixture.train, cfg.surrogate.features, fo);
  s.affine = fit(s.data.mixture.train, cfg.surrogate.features.decision_affine(), fo);
  if (with_matrix) {
    s.matrix = metric_matrix(s.data, cfg.surrogate.features, "full", cfg.surrogate.damping);
    const auto aff = metric_matrix(s.data, cfg.surrogate.features.decision_affine(), "affine", cfg.surrogate.damping);
    s.matrix.insert(s.matrix.end(), aff.begin(), aff.end());
  }
  return s;
}

// ---------------------------------------------------------------------------
// soc bound validation grid

struct SocValidation {
  std::string policy;
  BetaAlgorithm algorithm = BetaAlgorithm::conservative;
  SocBoundTrajectory bounds;
  double max_up_gap = 0.0;  // max |soc_up - soc_true|
  double max_dn_gap = 0.0;
  std::size_t containment_violations = 0;  // steps with soc_true outside [soc_dn, soc_up]
};

inline SocValidation summarize_soc(const std::string& policy, const SocBoundTrajectory& t, double tol = 1e-9) {
  SocValidation v;
  v.policy = policy;
  v.algorithm = t.algorithm;
  v.bounds = t;
  for (std::size_t k = 0; k < t.soc_true.size(); ++k) {
    v.max_up_gap = std::max(v.max_up_gap, std::abs(t.soc_up[k] - t.soc_true[k]));
    v.max_dn_gap = std::max(v.max_dn_gap, std::abs(t.soc_dn[k] - t.soc_true[k]));
    if (t.soc_true[k] > t.soc_up[k] + tol || t.soc_true[k] < t.soc_dn[k] - tol) ++v.containment_violations;
  }
  return v;
}

inline std::vector<SocValidation> validate_soc_grid(const ScenarioConfig& cfg, const Building& b, std::uint64_t seed,
                                                    const std::vector<std::string>& policies,
                                                    const std::vector<BetaAlgorithm>& algorithms, std::size_t index = 0) {
  const std::size_t K = cfg.horizon;
  const ExogenousSeries exo = scenario_exo(cfg, derive_seed(seed, "validate.exo", index), K);
  const VBAggregate vb = build_aggregate(b, exo, cfg.convention);
  const RunOptions ro{cfg.convention, vb.w};
  std::vector<SocValidation> out;
  for (const auto& name : policies) {
    const Policy p = make_policy(name, cfg, b, exo, K, derive_seed(seed, "validate.policy." + name, index));
    const SimulationRun run = run_policy(p, b, exo, initial_temperatures(b), K, ro);
    for (BetaAlgorithm a : algorithms) out.push_back(summarize_soc(name, validate_soc(b, vb, run.trajectory, a)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Demand-response scenarios

inline BoxBetas box_betas_for(BetaAlgorithm a) {
  return a == BetaAlgorithm::conservative ? BoxBetas::conservative : BoxBetas::tight_over_box;
}

struct DrScenario {
  std::size_t index = 0;
  std::size_t K = 0;
  ExogenousSeries exo;
  std::vector<double> price;
  VBAggregate vb;
  DRCommitment commitment;
  TrackingResult tracking;
  OracleResult oracle;
  DrReport report;
  bool tracked = false;
  bool optimised = false;
};

enum class DrStage { commit, track, oracle };

inline DrScenario prepare_dr_scenario(const ScenarioConfig& cfg, const Building& b, std::size_t K, std::uint64_t seed,
                                      std::size_t index, const std::string& command) {
  DrScenario s;
  s.index = index;
  s.K = K;
  s.price = scenario_tariff(cfg, K, command);
  s.exo = scenario_exo(cfg, derive_seed(seed, "dr.exo", index), K);
  s.vb = build_aggregate(b, s.exo, cfg.convention, box_betas_for(cfg.algorithm));
  return s;
}

inline CommitmentInputs commitment_inputs(const Building& b, const DrScenario& s) {
  CommitmentInputs in;
  in.price = s.price;
  in.T_out = s.exo.T_out;
  const Vec T0 = initial_temperatures(b);
  in.soc0 = s.vb.w.dot(soz_vector(b, T0, s.vb.convention));
  in.soc_history = in.soc0;
  in.Q_history = s.vb.Q_base(0);
  return in;
}

inline void track_dr_scenario(const Building& b, DrScenario& s) {
  if (s.commitment.status != LpStatus::optimal)
    throw Error("scenario " + std::to_string(s.index) + ": no commitment to track (" + s.commitment.diagnostic + ")");
  s.tracking = lower_level_track(s.commitment.Q_tol_hat, b, s.exo, s.price, initial_temperatures(b));
  s.tracked = true;
}

inline void optimise_dr_scenario(const ScenarioConfig& cfg, const Building& b, DrScenario& s, std::uint64_t seed) {
  OracleOptions oo = cfg.oracle;
  oo.seed = derive_seed(seed, "dr.oracle", s.index);
  std::vector<OracleStart> extra;
  if (s.tracked) extra.push_back({"tracking", s.tracking.trajectory.m});
  s.oracle = rc_optimal_oracle(b, s.exo, s.price, initial_temperatures(b), s.K, extra, oo);
  s.optimised = true;
  if (s.tracked) s.report = evaluate_dr(s.commitment, s.tracking, s.oracle, b.zones());
}

inline DrScenario run_dr_scenario(const ScenarioConfig& cfg, const Building& b, const SurrogateModel& model,
                                  std::size_t K, std::uint64_t seed, std::size_t index, DrStage last = DrStage::oracle,
                                  const std::string& command = "dr-batch") {
  DrScenario s = prepare_dr_scenario(cfg, b, K, seed, index, command);
  s.commitment = upper_level_commit(s.vb, model, commitment_inputs(b, s));
  if (s.commitment.status != LpStatus::optimal)
    throw Error("scenario " + std::to_string(index) + ": commitment failed: " + s.commitment.diagnostic);
  if (last == DrStage::commit) return s;
  track_dr_scenario(b, s);
  if (last == DrStage::track) return s;
  optimise_dr_scenario(cfg, b, s, seed);
  return s;
}

struct DrBatchRow {
  std::size_t days = 0;
  std::size_t K = 0;
  std::size_t scenarios = 0;
  double cost_opt_mean = 0.0;
  double cost_vb_mean = 0.0;
  double gap_mean = 0.0;         // mean of per-scenario gaps, percent
  double gap_of_means = 0.0;     // gap between the mean costs, percent
  std::size_t sandwich_failures = 0;   // scenarios with Cost_Opt > Cost_VB
  std::size_t comfort_violations = 0;  // (zone, step) pairs across the batch
  std::size_t zone_steps = 0;          // (zone, step) pairs checked
  DrReport vars;                 // variable counts for this horizon
};

inline DrBatchRow summarize_batch(std::size_t days, const std::vector<DrScenario>& runs, std::size_t n_zones) {
  DrBatchRow r;
  r.days = days;
  r.scenarios = runs.size();
  if (runs.empty()) return r;
  r.K = runs.front().K;
  for (const auto& s : runs) {
    r.cost_opt_mean += s.report.cost_opt;
    r.cost_vb_mean += s.report.cost_vb;
    r.gap_mean += s.report.gap_percent;
    if (s.report.cost_opt > s.report.cost_vb) ++r.sandwich_failures;
    r.comfort_violations += s.tracking.comfort_violations;
    r.zone_steps += n_zones * s.K;
  }
  const double S = static_cast<double>(runs.size());
  r.cost_opt_mean /= S;
  r.cost_vb_mean /= S;
  r.gap_mean /= S;
  r.gap_of_means = (r.cost_vb_mean - r.cost_opt_mean) / r.cost_opt_mean * 100.0;
  r.vars = runs.front().report;
  return r;
}

}  // namespace vbflex
