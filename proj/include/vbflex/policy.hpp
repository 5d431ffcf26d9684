#pragma once

// Airflow control policies and the simulation harness that produces
// ground-truth trajectories.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "vbflex/core.hpp"
#include "vbflex/thermal.hpp"
#include "vbflex/vb.hpp"

namespace vbflex {

enum class PolicyKind { random, pid, price_greedy, fixed_sequence };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::random: return "random";
    case PolicyKind::pid: return "pid";
    case PolicyKind::price_greedy: return "greedy";
    case PolicyKind::fixed_sequence: return "fixed";
  }
  return "unknown";
}

struct PidGains {
  double kp = 0.4;         // kg/s per K
  double ki = 0.02;        // kg/s per K.step
  double kd = 0.0;         // kg/s per K/step
  double windup = 10.0;    // |integral of error| limit, K.step
};

struct PidState {
  Vec integral;
  Vec previous_error;
  bool has_previous = false;
};

/// Positional PID on e = T - reference (positive when too warm). The bias is
/// the feed-forward airflow, normally the baseline estimate.
inline Vec pid_step(PidState& state, const Vec& T, const Vec& reference, const PidGains& g, const Vec& bias,
                    const Vec& m_min, const Vec& m_max) {
  const auto n = T.size();
  if (state.integral.size() != n) {
    state.integral = Vec::Zero(n);
    state.previous_error = Vec::Zero(n);
    state.has_previous = false;
  }
  const Vec e = T - reference;
  state.integral = (state.integral + e).cwiseMax(-g.windup).cwiseMin(g.windup);
  const Vec de = state.has_previous ? Vec(e - state.previous_error) : Vec(Vec::Zero(n));
  state.previous_error = e;
  state.has_previous = true;
  const Vec m = bias + g.kp * e + g.ki * state.integral + g.kd * de;
  return m.cwiseMax(m_min).cwiseMin(m_max);
}

/// Median of price over a window of `window` steps centered on each step.
inline std::vector<double> rolling_median(const std::vector<double>& price, std::size_t window) {
  if (window == 0) throw Error("rolling_median: window must be positive");
  const std::size_t K = price.size();
  std::vector<double> med(K);
  std::vector<double> buf;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t lo = k >= window / 2 ? k - window / 2 : 0;
    std::size_t hi = std::min(K, lo + window);
    if (hi - lo < window && hi == K) lo = K >= window ? K - window : 0;
    buf.assign(price.begin() + static_cast<std::ptrdiff_t>(lo), price.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(buf.begin(), buf.end());
    const std::size_t s = buf.size();
    med[k] = s % 2 ? buf[s / 2] : 0.5 * (buf[s / 2 - 1] + buf[s / 2]);
  }
  return med;
}

struct GreedySettings {
  double margin = 0.1;  // K kept from the band edge
};

/// Pre-cools toward T_min + margin when the price is under its median and
/// coasts toward T_max - margin when it is above; holds T_set otherwise. The
/// one-step comfort interval is applied after the box.
inline Vec price_greedy_step(const Building& b, const Vec& T, double T_out, const Vec& Q_dist, double price_k,
                             double price_median, const GreedySettings& s = {}) {
  const auto& p = b.params();
  Vec target = b.T_set();
  if (price_k < price_median)
    target = (b.T_lower().array() + s.margin).matrix();
  else if (price_k > price_median)
    target = (b.T_upper().array() - s.margin).matrix();
  const Vec free = b.free_response(T, T_out, Q_dist);
  const auto iv = comfort_airflow_intervals(b, T, T_out, Q_dist, b.T_lower(), b.T_upper());
  Vec m(b.size());
  for (std::size_t iu = 0; iu < b.zones(); ++iu) {
    const auto i = static_cast<Eigen::Index>(iu);
    const double slope = b.coeffs().b[i] * p.c_p * (T[i] - p.T_sup);
    double mi = slope > 0.0 ? (free[i] - target[i]) / slope : p.m_min[iu];
    mi = std::clamp(mi, p.m_min[iu], p.m_max[iu]);
    m[i] = std::clamp(mi, iv[iu].lo, iv[iu].hi);
  }
  return m;
}

struct Policy {
  PolicyKind kind = PolicyKind::random;
  std::uint64_t seed = 0;
  PidGains gains;
  std::vector<double> price;  // price_greedy
  std::size_t median_window = 48;
  GreedySettings greedy;
  Mat table;  // fixed_sequence, n x K

  static Policy random(std::uint64_t seed) {
    Policy p;
    p.kind = PolicyKind::random;
    p.seed = seed;
    return p;
  }
  static Policy pid(PidGains g = {}) {
    Policy p;
    p.kind = PolicyKind::pid;
    p.gains = g;
    return p;
  }
  static Policy price_greedy(std::vector<double> price, std::size_t median_window) {
    Policy p;
    p.kind = PolicyKind::price_greedy;
    p.price = std::move(price);
    p.median_window = median_window;
    return p;
  }
  static Policy fixed(Mat table) {
    Policy p;
    p.kind = PolicyKind::fixed_sequence;
    p.table = std::move(table);
    return p;
  }

  std::string describe() const {
    std::string s = to_string(kind);
    if (kind == PolicyKind::random) s += "(seed=" + std::to_string(seed) + ")";
    return s;
  }
};

struct SimulationRun {
  Trajectory trajectory;
  std::uint64_t seed = 0;
  std::string policy;
  std::size_t K = 0;
  std::size_t clipped_controls = 0;  // entries moved into the airflow box
  std::vector<std::string> warnings;
};

struct RunOptions {
  SozConvention convention = SozConvention::centered;
  Vec w;  // aggregation weights; computed from the building when empty
};

/// Fills soz and soc of a trajectory.
inline void attach_states(const Building& b, Trajectory& tr, const Vec& w, SozConvention conv) {
  tr.soz = soz_matrix(b, tr.T, conv);
  tr.soc.resize(static_cast<std::size_t>(tr.T.cols()));
  for (Eigen::Index k = 0; k < tr.T.cols(); ++k) tr.soc[static_cast<std::size_t>(k)] = w.dot(tr.soz.col(k));
}

inline SimulationRun run_policy(const Policy& policy, const Building& b, const ExogenousSeries& exo, const Vec& T0,
                                std::size_t K, const RunOptions& opt = {}) {
  if (K > exo.horizon())
    throw Error("run_policy: exogenous series has " + std::to_string(exo.horizon()) + " steps, " +
                std::to_string(K) + " requested");
  if (T0.size() != b.size()) throw Error("run_policy: T0 has the wrong dimension");
  const auto n = b.size();
  const auto Ki = static_cast<Eigen::Index>(K);
  const Vec m_lo = b.m_min();
  const Vec m_hi = b.m_max();
  SimulationRun run;
  run.seed = policy.seed;
  run.policy = policy.describe();
  run.K = K;
  for (Eigen::Index i = 0; i < n; ++i)
    if (T0[i] < b.T_lower()[i] || T0[i] > b.T_upper()[i])
      run.warnings.push_back("zone " + std::to_string(i) + ": initial temperature outside the comfort band");

  // The PID bias is a constant estimate of the baseline airflow (its mean over
  // the horizon); feedback handles the diurnal variation.
  Vec pid_bias = Vec::Zero(n);
  if (policy.kind == PolicyKind::pid && K > 0)
    pid_bias = baseline_cooling(b, exo.head(K), b.T_set()).m_base.rowwise().mean().cwiseMax(m_lo).cwiseMin(m_hi);
  std::vector<double> median;
  if (policy.kind == PolicyKind::price_greedy) {
    if (policy.price.size() < K) throw Error("run_policy: price series shorter than the horizon");
    median = rolling_median(std::vector<double>(policy.price.begin(), policy.price.begin() + Ki),
                            policy.median_window);
  }
  if (policy.kind == PolicyKind::fixed_sequence && (policy.table.rows() != n || policy.table.cols() < Ki))
    throw Error("run_policy: fixed airflow table has the wrong shape");

  Rng rng(derive_seed(policy.seed, "policy.random"));
  PidState pid;
  Trajectory& tr = run.trajectory;
  tr.T.resize(n, Ki + 1);
  tr.m.resize(n, Ki);
  tr.q.resize(n, Ki);
  tr.Q.resize(K);
  tr.Q_tol.resize(K);
  tr.T_out.assign(exo.T_out.begin(), exo.T_out.begin() + Ki);
  tr.T.col(0) = T0;
  for (Eigen::Index k = 0; k < Ki; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Vec T = tr.T.col(k);
    const Vec Qd = exo.disturbance_at(ku);
    Vec m(n);
    switch (policy.kind) {
      case PolicyKind::random:
        for (Eigen::Index i = 0; i < n; ++i) m[i] = rng.uniform(m_lo[i], m_hi[i]);
        break;
      case PolicyKind::pid:
        m = pid_step(pid, T, b.T_set(), policy.gains, pid_bias, m_lo, m_hi);
        break;
      case PolicyKind::price_greedy:
        m = price_greedy_step(b, T, exo.T_out[ku], Qd, policy.price[ku], median[ku], policy.greedy);
        break;
      case PolicyKind::fixed_sequence:
        m = policy.table.col(k);
        break;
    }
    const Vec clipped = m.cwiseMax(m_lo).cwiseMin(m_hi);
    for (Eigen::Index i = 0; i < n; ++i)
      if (clipped[i] != m[i]) ++run.clipped_controls;
    const StepResult s = step_multi(T, clipped, exo.T_out[ku], Qd, b);
    tr.m.col(k) = clipped;
    tr.q.col(k) = s.q;
    tr.T.col(k + 1) = s.T_next;
    tr.Q[ku] = s.q.sum();
    tr.Q_tol[ku] = hvac_power(clipped, T, exo.T_out[ku], b.params()).Q_tol;
  }
  const Vec w = opt.w.size() == n ? opt.w : aggregation_weights(b, opt.convention).eig.w;
  attach_states(b, tr, w, opt.convention);
  return run;
}

}  // namespace vbflex
