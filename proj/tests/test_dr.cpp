#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "vbflex/dr.hpp"
#include "vbflex/experiment.hpp"
#include "vbflex/scenario.hpp"

using namespace vbflex;

namespace {

MultiZoneParams one_zone() {
  MultiZoneParams p;
  p.n_zones = 1;
  p.C_th = {1.5e7};
  p.R_oi = {0.03};
  p.T_set = {25.0};
  p.delta = {1.0};
  p.m_min = {0.0};
  p.m_max = {0.5};
  return p;
}

ExogenousSeries summer(std::size_t n, std::size_t K, std::uint64_t seed) {
  SynthExoSpec spec;
  spec.seed = seed;
  return synth_exo(spec, n, K, 1800.0);
}

// Decision-affine surrogate fitted on random-policy runs of building b.
SurrogateModel fitted_model(const Building& b, std::uint64_t seed) {
  const Vec w = aggregation_weights(b, SozConvention::centered).eig.w;
  std::vector<SimulationRun> runs;
  for (std::size_t r = 0; r < 10; ++r) {
    const auto exo = summer(b.zones(), 96, derive_seed(seed, "exo", r));
    runs.push_back(run_policy(Policy::random(derive_seed(seed, "pol", r)), b, exo, b.T_set(), 96,
                              {SozConvention::centered, w}));
  }
  return fit(build_dataset(runs, 1), FeatureSpec{}.decision_affine());
}

CommitmentInputs inputs_for(const VBAggregate& vb, const ExogenousSeries& exo, std::vector<double> price) {
  CommitmentInputs in;
  in.T_out = exo.T_out;
  in.price = std::move(price);
  in.soc0 = 0.0;
  in.soc_history = 0.0;
  in.Q_history = vb.Q_base(0);
  return in;
}

// Energy of one window written from the feature definitions (lags = 1).
double window_energy(const SurrogateModel& m, double soc, double soc_prev, double Q, double Q_prev, double T,
                     double T_prev) {
  const Vec& c = m.coef;
  return m.intercept + c[0] * soc + c[1] * Q + c[2] * T + c[3] * Q * T + c[4] * soc_prev + c[5] * Q_prev +
         c[6] * T_prev + c[7] * Q_prev * T_prev;
}

}  // namespace

TEST(Tariff, Validation) {
  EXPECT_NO_THROW(validate_tariff({0.1, 0.0}, 2));
  EXPECT_THROW(validate_tariff({0.1}, 2), Error);
  EXPECT_THROW(validate_tariff({0.1, -0.2}, 2), Error);
  EXPECT_THROW(validate_tariff({0.1, std::nan("")}, 2), Error);
}

TEST(Commitment, RejectsNonAffineSurrogate) {
  const Building b(reference_building_params());
  const auto exo = summer(5, 8, 1);
  const VBAggregate vb = build_aggregate(b, exo, SozConvention::centered);
  SurrogateModel m;
  m.features = FeatureSpec{};
  m.coef = Vec::Zero(static_cast<Eigen::Index>(feature_count(m.features)));
  EXPECT_THROW(build_commitment_lp(vb, m, inputs_for(vb, exo, std::vector<double>(8, 0.1))), Error);
}

TEST(Commitment, SingleZoneMatchesGridSearch) {
  // K = 4: enumerate Q on a grid, derive soc from the (exact) single-zone
  // recursion and price the surrogate energy directly.
  const Building b(one_zone());
  const SurrogateModel model = fitted_model(b, 17);
  const std::size_t K = 4;
  const auto exo = summer(1, K, 23);
  const VBAggregate vb = build_aggregate(b, exo, SozConvention::centered);
  ASSERT_DOUBLE_EQ(vb.beta_min[0], vb.beta_max[0]);
  const std::vector<double> price = {0.10, 0.35, 0.05, 0.40};
  const CommitmentInputs in = inputs_for(vb, exo, price);
  const DRCommitment c = upper_level_commit(vb, model, in);
  ASSERT_EQ(c.status, LpStatus::optimal);
  EXPECT_LE(c.max_violation, 1e-7);

  const int G = 40;
  double best = std::numeric_limits<double>::infinity();
  std::array<int, 4> g{};
  for (g[0] = 0; g[0] <= G; ++g[0])
    for (g[1] = 0; g[1] <= G; ++g[1])
      for (g[2] = 0; g[2] <= G; ++g[2])
        for (g[3] = 0; g[3] <= G; ++g[3]) {
          double soc = in.soc0, soc_prev = in.soc_history, Q_prev = in.Q_history, T_prev = exo.T_out[0];
          double cost = 0.0;
          bool ok = true;
          for (std::size_t k = 0; k < K && ok; ++k) {
            const double Q = vb.Q_min[k] + (vb.Q_max[k] - vb.Q_min[k]) * g[k] / G;
            cost += price[k] * window_energy(model, soc, soc_prev, Q, Q_prev, exo.T_out[k], T_prev) / 3.6e6;
            const double next = vb.alpha * soc + vb.beta_max[k] * Q - vb.wBq_base[k];
            ok = next >= -1.0 && next <= 1.0;
            soc_prev = soc;
            soc = next;
            Q_prev = Q;
            T_prev = exo.T_out[k];
          }
          if (ok) best = std::min(best, cost);
        }
  ASSERT_TRUE(std::isfinite(best));
  EXPECT_LE(c.objective, best + 1e-9 * std::abs(best));  // the LP optimum is never above a feasible grid point
  EXPECT_LE(std::abs(best - c.objective), 0.01 * std::abs(c.objective));
}

TEST(Commitment, FeasibleOnReferenceScenarios) {
  const Building b(reference_building_params());
  const SurrogateModel model = fitted_model(b, 5);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto exo = summer(5, 48, 100 + s);
    const VBAggregate vb = build_aggregate(b, exo, SozConvention::centered);
    const DRCommitment c = upper_level_commit(vb, model, inputs_for(vb, exo, tou_tariff(default_tou_periods(), 48, 1800.0)));
    ASSERT_EQ(c.status, LpStatus::optimal);
    EXPECT_LE(c.max_violation, 1e-7);
    EXPECT_LE(commitment_violation(vb, c.soc, c.Q), 1e-7);
    for (std::size_t k = 0; k < 48; ++k) {
      EXPECT_NEAR(c.P_chdis[k], c.soc[k + 1] - vb.alpha * c.soc[k], 1e-12);
      EXPECT_GE(c.Q[k], vb.Q_min[k] - 1e-7);
      EXPECT_LE(c.Q[k], vb.Q_max[k] + 1e-7);
    }
    // Objective recomputed from the returned trajectory.
    const auto E = surrogate_energy(model, c.soc, c.Q, inputs_for(vb, exo, {}));
    EXPECT_NEAR(energy_cost(E, tou_tariff(default_tou_periods(), 48, 1800.0)), c.objective, 1e-9 * std::abs(c.objective));
    EXPECT_EQ(c.lp_rows, 4u * 48u);
    EXPECT_EQ(c.lp_cols, 2u * 48u);
  }
}

TEST(Commitment, ObjectiveScalesWithPrice) {
  const Building b(reference_building_params());
  const SurrogateModel model = fitted_model(b, 5);
  const auto exo = summer(5, 48, 7);
  const VBAggregate vb = build_aggregate(b, exo, SozConvention::centered);
  auto price = tou_tariff(default_tou_periods(), 48, 1800.0);
  const DRCommitment a = upper_level_commit(vb, model, inputs_for(vb, exo, price));
  for (double& p : price) p *= 0.5;
  const DRCommitment h = upper_level_commit(vb, model, inputs_for(vb, exo, price));
  ASSERT_EQ(a.status, LpStatus::optimal);
  ASSERT_EQ(h.status, LpStatus::optimal);
  EXPECT_NEAR(h.objective, 0.5 * a.objective, 1e-9 * std::abs(a.objective));
  for (std::size_t k = 0; k < 48; ++k) EXPECT_NEAR(a.Q[k], h.Q[k], 1e-6);
}

TEST(Commitment, InfeasibleStartIsDiagnosed) {
  const Building b(reference_building_params());
  const SurrogateModel model = fitted_model(b, 5);
  const auto exo = summer(5, 8, 7);
  const VBAggregate vb = build_aggregate(b, exo, SozConvention::centered);
  CommitmentInputs in = inputs_for(vb, exo, std::vector<double>(8, 0.2));
  in.soc0 = 3.0;
  const DRCommitment c = upper_level_commit(vb, model, in);
  EXPECT_EQ(c.status, LpStatus::infeasible);
  EXPECT_NE(c.diagnostic.find("initial soc"), std::string::npos);

  // Without cooling the zones cannot be held inside the band
  // over a full day, including the afternoon peak.
  const auto day = summer(5, 48, 7);
  VBAggregate weak = build_aggregate(b, day, SozConvention::centered);
  for (double& q : weak.Q_max) q = 0.0;
  const DRCommitment d = upper_level_commit(weak, model, inputs_for(weak, day, std::vector<double>(48, 0.2)));
  EXPECT_EQ(d.status, LpStatus::infeasible);
  EXPECT_NE(d.diagnostic.find("soc lower bound unreachable"), std::string::npos);
}

TEST(Tracking, ReproducesBaselineCommitment) {
  const Building b(reference_building_params());
  const std::size_t K = 48;
  const auto exo = summer(5, K, 9);
  const auto price = tou_tariff(default_tou_periods(), K, 1800.0);
  const Trajectory base = simulate_airflow(b, exo, b.T_set(), baseline_cooling(b, exo, b.T_set()).m_base);
  const TrackingResult t = lower_level_track(base.Q_tol, b, exo, price, b.T_set());
  for (std::size_t k = 0; k < K; ++k) {
    EXPECT_LT(std::abs(t.residual[k]), 1e-6 * base.Q_tol[k]) << k;
    EXPECT_NEAR(t.level[k], 0.0, 1e-6) << k;
  }
  EXPECT_LT((t.trajectory.T.array() - 25.0).abs().maxCoeff(), 1e-5);
  EXPECT_NEAR(t.cost, energy_cost(base.Q_tol, price), 1e-6 * t.cost);
}

TEST(Tracking, ComfortHoldsForArbitraryTargets) {
  const Building b(reference_building_params());
  const std::size_t K = 96;
  Rng rng(4);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto exo = summer(5, K, s);
    std::vector<double> target(K);
    for (auto& e : target) e = rng.uniform(-1e7, 1e8);  // includes unreachable values
    const TrackingResult t = lower_level_track(target, b, exo, std::vector<double>(K, 0.2), b.T_set());
    EXPECT_EQ(t.comfort_violations, 0u);
    for (Eigen::Index i = 0; i < 5; ++i) {
      EXPECT_LE(t.trajectory.T.row(i).maxCoeff(), 26.0 + 1e-9);
      EXPECT_GE(t.trajectory.T.row(i).minCoeff(), 24.0 - 1e-9);
    }
    for (Eigen::Index k = 0; k < t.trajectory.m.cols(); ++k) {
      EXPECT_TRUE((t.trajectory.m.col(k).array() >= -1e-15).all());
      EXPECT_TRUE((t.trajectory.m.col(k).array() <= 0.5 + 1e-15).all());
    }
  }
}

TEST(Oracle, GradientMatchesFiniteDifferences) {
  const Building b(reference_building_params());
  const std::size_t K = 6;
  const auto exo = summer(5, K, 3);
  const auto price = tou_tariff(default_tou_periods(), K, 1800.0);
  const detail::OracleProblem prob(b, exo, price, b.T_upper(), K);
  Rng rng(2);
  Mat m(5, static_cast<Eigen::Index>(K));
  for (Eigen::Index k = 0; k < m.cols(); ++k)
    for (Eigen::Index i = 0; i < 5; ++i) m(i, k) = rng.uniform(0.0, 0.5);
  const double rho = 100.0;
  Mat g;
  prob.evaluate(m, rho, &g);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < m.cols(); ++k)
    for (Eigen::Index i = 0; i < 5; ++i) {
      Mat mp = m, mm = m;
      mp(i, k) += h;
      mm(i, k) -= h;
      const double fd = (prob.evaluate(mp, rho, nullptr) - prob.evaluate(mm, rho, nullptr)) / (2 * h);
      EXPECT_NEAR(g(i, k), fd, 1e-5 * std::max(1.0, std::abs(fd))) << i << "," << k;
    }
}

TEST(Oracle, SingleZoneMatchesGridSearch) {
  const Building b(one_zone());
  const std::size_t K = 4;
  const auto exo = summer(1, K, 31);
  const std::vector<double> price = {0.10, 0.35, 0.05, 0.40};
  const OracleResult o = rc_optimal_oracle(b, exo, price, b.T_set(), K, {});
  const int G = 50;
  double best = std::numeric_limits<double>::infinity();
  Mat m(1, 4);
  std::array<int, 4> g{};
  for (g[0] = 0; g[0] <= G; ++g[0])
    for (g[1] = 0; g[1] <= G; ++g[1])
      for (g[2] = 0; g[2] <= G; ++g[2])
        for (g[3] = 0; g[3] <= G; ++g[3]) {
          for (int k = 0; k < 4; ++k) m(0, k) = 0.5 * g[k] / G;
          const Trajectory tr = simulate_airflow(b, exo, b.T_set(), m);
          if (tr.T.maxCoeff() > 26.0 || tr.T.minCoeff() < 24.0) continue;
          best = std::min(best, energy_cost(tr.Q_tol, price));
        }
  ASSERT_TRUE(std::isfinite(best));
  EXPECT_LE(o.cost, best * 1.01);
  EXPECT_GE(o.cost, best * 0.99);
}

TEST(Oracle, NeverWorseThanBaselineOrWarmStart) {
  const Building b(reference_building_params());
  const std::size_t K = 48;
  const auto exo = summer(5, K, 12);
  const std::vector<double> flat(K, 0.2);
  const Mat m_base = baseline_cooling(b, exo, b.T_set()).m_base;
  const double base_cost = energy_cost(simulate_airflow(b, exo, b.T_set(), m_base).Q_tol, flat);
  OracleOptions opt;
  opt.random_starts = 1;
  opt.iterations_per_phase = 50;
  const OracleResult o = rc_optimal_oracle(b, exo, flat, b.T_set(), K, {}, opt);
  EXPECT_LE(o.cost, base_cost * (1 + 1e-12));
  EXPECT_LE(o.trajectory.T.maxCoeff(), 26.0 + 1e-9);
  EXPECT_GE(o.trajectory.T.minCoeff(), 24.0 - 1e-9);

  // A warm start is scored as given, so the result can only improve on it.
  Rng rng(1);
  std::vector<double> target(K);
  for (auto& e : target) e = rng.uniform(1e7, 4e7);
  const TrackingResult t = lower_level_track(target, b, exo, flat, b.T_set());
  opt.iterations_per_phase = 1;
  opt.random_starts = 0;
  const OracleResult w = rc_optimal_oracle(b, exo, flat, b.T_set(), K, {{"tracking", t.trajectory.m}}, opt);
  EXPECT_LE(w.cost, t.cost * (1 + 1e-12));
  EXPECT_THROW(rc_optimal_oracle(b, exo, flat, b.T_set(), K, {{"bad", Mat::Zero(2, 2)}}, opt), Error);
}

TEST(Report, GapAndVariableCounts) {
  DRCommitment c;
  c.soc.assign(49, 0.0);
  c.Q.assign(48, 0.0);
  c.objective = 9.0;
  TrackingResult t;
  t.cost = 10.0;
  OracleResult o;
  o.cost = 10.0;
  DrReport r = evaluate_dr(c, t, o, 5);
  EXPECT_EQ(r.gap_percent, 0.0);
  EXPECT_EQ(r.vars_vb, 192u);
  EXPECT_EQ(r.vars_rc, 576u);
  EXPECT_EQ(r.vars_vb_table, 144u);
  EXPECT_EQ(r.vars_rc_table, 480u);
  o.cost = 8.0;
  r = evaluate_dr(c, t, o, 5);
  EXPECT_DOUBLE_EQ(r.gap_percent, 25.0);
}

TEST(Pipeline, ScenarioIsDeterministic) {
  ScenarioConfig cfg = default_config();
  cfg.surrogate.days_per_policy = 20;
  cfg.oracle.iterations_per_phase = 20;
  cfg.oracle.random_starts = 1;
  const Building b(cfg.building);
  const SurrogateModel m = train_surrogates(cfg, b, 3, false).affine;
  const DrScenario a = run_dr_scenario(cfg, b, m, 48, 3, 2);
  const DrScenario c = run_dr_scenario(cfg, b, m, 48, 3, 2);
  EXPECT_EQ(a.report.cost_vb, c.report.cost_vb);
  EXPECT_EQ(a.report.cost_opt, c.report.cost_opt);
  EXPECT_LE(a.report.cost_opt, a.report.cost_vb);
  EXPECT_EQ(a.tracking.comfort_violations, 0u);
  const DrScenario other = run_dr_scenario(cfg, b, m, 48, 3, 3);
  EXPECT_NE(a.exo.T_out, other.exo.T_out);
}
