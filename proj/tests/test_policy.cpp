#include <gtest/gtest.h>

#include <algorithm>

#include "vbflex/policy.hpp"
#include "vbflex/scenario.hpp"

using namespace vbflex;

namespace {

ExogenousSeries summer(std::size_t n, std::size_t K, std::uint64_t seed) {
  SynthExoSpec spec;
  spec.seed = seed;
  return synth_exo(spec, n, K, 1800.0);
}

// Same weather every step: the controller sees a pure step.
ExogenousSeries steady(std::size_t n, std::size_t K) {
  SynthExoSpec spec;
  spec.T_amplitude = 0.0;
  spec.T_noise = 0.0;
  spec.Q_jitter = 0.0;
  spec.Q_unoccupied = spec.Q_occupied;
  return synth_exo(spec, n, K, 1800.0);
}

double brute_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t s = v.size();
  return s % 2 ? v[s / 2] : 0.5 * (v[s / 2 - 1] + v[s / 2]);
}

}  // namespace

TEST(Pid, ZeroErrorGivesBias) {
  PidState st;
  const Vec T = Vec::Constant(3, 25.0);
  const Vec bias = (Vec(3) << 0.1, 0.2, 0.3).finished();
  const Vec m = pid_step(st, T, T, PidGains{}, bias, Vec::Zero(3), Vec::Constant(3, 0.5));
  EXPECT_EQ(m, bias);
}

TEST(Pid, LargeErrorSaturates) {
  PidState st;
  const Vec m = pid_step(st, Vec::Constant(2, 40.0), Vec::Constant(2, 25.0), PidGains{}, Vec::Zero(2), Vec::Zero(2),
                         Vec::Constant(2, 0.5));
  EXPECT_EQ(m, Vec::Constant(2, 0.5));
  PidState cold;
  const Vec m2 = pid_step(cold, Vec::Constant(2, 10.0), Vec::Constant(2, 25.0), PidGains{}, Vec::Constant(2, 0.2),
                          Vec::Zero(2), Vec::Constant(2, 0.5));
  EXPECT_EQ(m2, Vec::Zero(2));
}

TEST(Pid, IntegralIsClamped) {
  PidGains g;
  g.windup = 3.0;
  PidState st;
  for (int k = 0; k < 50; ++k) pid_step(st, Vec::Constant(1, 27.0), Vec::Constant(1, 25.0), g, Vec::Zero(1), Vec::Zero(1), Vec::Ones(1));
  EXPECT_DOUBLE_EQ(st.integral[0], 3.0);
}

TEST(Pid, StepResponseUnderDefaultGains) {
  // Start every zone at the top of the band and let the controller settle.
  const Building b(reference_building_params());
  const std::size_t K = 96;
  const auto exo = steady(b.zones(), K);
  const Vec T0 = b.T_upper();
  const SimulationRun run = run_policy(Policy::pid(), b, exo, T0, K);
  const Mat& T = run.trajectory.T;
  EXPECT_LE(T.maxCoeff(), 26.0 + 1e-12);
  // Undershoot below the setpoint stays under a quarter of the band half-width.
  EXPECT_GE(T.minCoeff(), 25.0 - 0.25);
  // Settles close to the setpoint over the last day.
  for (Eigen::Index k = 48; k <= static_cast<Eigen::Index>(K); ++k)
    EXPECT_LT((T.col(k).array() - 25.0).abs().maxCoeff(), 0.1) << "step " << k;
}

TEST(RollingMedian, MatchesBruteForceWindows) {
  Rng rng(5);
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const std::size_t K = 10 + rng.index(60);
    const std::size_t window = 1 + rng.index(K);
    std::vector<double> price(K);
    for (auto& p : price) p = std::round(rng.uniform(0.0, 10.0)) / 10.0;
    const auto med = rolling_median(price, window);
    for (std::size_t k = 0; k < K; ++k) {
      // Window of `window` steps centered on k, shifted to stay in range.
      std::size_t lo = k >= window / 2 ? k - window / 2 : 0;
      if (lo + window > K) lo = K - window;
      const std::vector<double> w(price.begin() + static_cast<std::ptrdiff_t>(lo),
                                  price.begin() + static_cast<std::ptrdiff_t>(lo + window));
      EXPECT_DOUBLE_EQ(med[k], brute_median(w)) << "K=" << K << " window=" << window << " k=" << k;
    }
  }
  EXPECT_THROW(rolling_median({1.0}, 0), Error);
}

TEST(Greedy, FlatPriceHoldsSetpoint) {
  const Building b(reference_building_params());
  const auto exo = summer(b.zones(), 48, 3);
  const std::vector<double> flat(48, 0.2);
  const SimulationRun run = run_policy(Policy::price_greedy(flat, 48), b, exo, b.T_set(), 48);
  // The setpoint is reachable every step, so the schedule is the baseline.
  EXPECT_LT((run.trajectory.T.array() - 25.0).abs().maxCoeff(), 1e-9);
}

TEST(Greedy, CheapPriceAtUpperBandSaturates) {
  const Building b(reference_building_params());
  const auto exo = summer(b.zones(), 1, 4);
  const Vec m = price_greedy_step(b, b.T_upper(), exo.T_out[0], exo.disturbance_at(0), 0.1, 0.2);
  EXPECT_EQ(m, b.m_max());
}

TEST(Greedy, ShiftsEnergyTowardCheapHours) {
  const Building b(reference_building_params());
  const std::size_t K = 48 * 3;
  const auto price = tou_tariff(default_tou_periods(), K, 1800.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto exo = summer(b.zones(), K, seed);
    const SimulationRun g = run_policy(Policy::price_greedy(price, 48), b, exo, b.T_set(), K);
    const Mat m_base = baseline_cooling(b, exo, b.T_set()).m_base;
    const Trajectory base = simulate_airflow(b, exo, b.T_set(), m_base);
    auto cheap_share = [&](const std::vector<double>& E) {
      double cheap = 0.0, total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        total += E[k];
        if (price[k] < 0.15) cheap += E[k];
      }
      return cheap / total;
    };
    EXPECT_GT(cheap_share(g.trajectory.Q_tol), cheap_share(base.Q_tol)) << "seed " << seed;
    EXPECT_LT(energy_cost(g.trajectory.Q_tol, price), energy_cost(base.Q_tol, price)) << "seed " << seed;
  }
}

TEST(Greedy, StaysInComfortBand) {
  const Building b(reference_building_params());
  const std::size_t K = 240;
  const auto price = tou_tariff(default_tou_periods(), K, 1800.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto exo = summer(b.zones(), K, seed);
    const SimulationRun run = run_policy(Policy::price_greedy(price, 48), b, exo, b.T_set(), K);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      EXPECT_LE(run.trajectory.T.row(i).maxCoeff(), b.T_upper()[i] + 1e-9);
      EXPECT_GE(run.trajectory.T.row(i).minCoeff(), b.T_lower()[i] - 1e-9);
    }
  }
}

TEST(RunPolicy, OutputsInsideBoxAndDeterministic) {
  const Building b(reference_building_params());
  const std::size_t K = 96;
  const auto exo = summer(b.zones(), K, 8);
  const auto price = tou_tariff(default_tou_periods(), K, 1800.0);
  for (const Policy& p : {Policy::random(11), Policy::pid(), Policy::price_greedy(price, 48)}) {
    const SimulationRun a = run_policy(p, b, exo, b.T_set(), K);
    const SimulationRun c = run_policy(p, b, exo, b.T_set(), K);
    for (Eigen::Index k = 0; k < a.trajectory.m.cols(); ++k) {
      EXPECT_TRUE((a.trajectory.m.col(k).array() >= b.m_min().array()).all());
      EXPECT_TRUE((a.trajectory.m.col(k).array() <= b.m_max().array()).all());
    }
    EXPECT_EQ(a.trajectory.m, c.trajectory.m) << p.describe();
    EXPECT_EQ(a.trajectory.Q_tol, c.trajectory.Q_tol) << p.describe();
  }
  const SimulationRun r1 = run_policy(Policy::random(11), b, exo, b.T_set(), K);
  const SimulationRun r2 = run_policy(Policy::random(12), b, exo, b.T_set(), K);
  EXPECT_NE(r1.trajectory.m, r2.trajectory.m);
}

TEST(RunPolicy, FixedScheduleReplaysBaseline) {
  const Building b(reference_building_params());
  const auto exo = summer(b.zones(), 48, 2);
  const Mat m_base = baseline_cooling(b, exo, b.T_set()).m_base;
  const SimulationRun run = run_policy(Policy::fixed(m_base), b, exo, b.T_set(), 48);
  EXPECT_EQ(run.clipped_controls, 0u);
  EXPECT_LT((run.trajectory.T.array() - 25.0).abs().maxCoeff(), 1e-9);
  EXPECT_LT(std::abs(run.trajectory.soc.back()), 1e-9);
}

TEST(RunPolicy, RejectsShortInputs) {
  const Building b(reference_building_params());
  const auto exo = summer(b.zones(), 10, 2);
  EXPECT_THROW(run_policy(Policy::pid(), b, exo, b.T_set(), 11), Error);
  EXPECT_THROW(run_policy(Policy::price_greedy(std::vector<double>(5, 0.1), 4), b, exo, b.T_set(), 10), Error);
  EXPECT_THROW(run_policy(Policy::fixed(Mat::Zero(5, 3)), b, exo, b.T_set(), 10), Error);
  EXPECT_THROW(run_policy(Policy::pid(), b, exo, Vec::Constant(2, 25.0), 10), Error);
}

TEST(RunPolicy, WarnsWhenStartingOutsideBand) {
  const Building b(reference_building_params());
  const auto exo = summer(b.zones(), 4, 2);
  Vec T0 = b.T_set();
  T0[2] = 27.5;
  const SimulationRun run = run_policy(Policy::pid(), b, exo, T0, 4);
  ASSERT_EQ(run.warnings.size(), 1u);
  EXPECT_NE(run.warnings[0].find("zone 2"), std::string::npos);
}
