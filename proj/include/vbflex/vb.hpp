#pragma once

// Virtual-battery models built from the RC dynamics: characterization states,
// the single-zone battery, zone-level batteries, eigenvector aggregation,
// beta bounds and soc bound propagation.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vbflex/core.hpp"
#include "vbflex/perron.hpp"
#include "vbflex/simplex.hpp"
#include "vbflex/thermal.hpp"

namespace vbflex {

/// centered: soz = (T_set - T)/delta in [-1, 1], baseline holds T_set.
/// unit_interval: soz = (T_max - T)/(2 delta) in [0, 1], baseline holds T_max.
enum class SozConvention { centered, unit_interval };

inline const char* to_string(SozConvention c) { return c == SozConvention::centered ? "centered" : "unit"; }

inline SozConvention parse_convention(const std::string& s) {
  if (s == "centered") return SozConvention::centered;
  if (s == "unit" || s == "unit_interval") return SozConvention::unit_interval;
  throw Error("unknown soz convention '" + s + "' (expected centered|unit)");
}

inline double soz_of_temperature(double T, double T_set, double delta, SozConvention conv) {
  if (conv == SozConvention::centered) return (T_set - T) / delta;
  return (T_set + delta - T) / (2.0 * delta);
}

inline double soz_lower(SozConvention conv) { return conv == SozConvention::centered ? -1.0 : 0.0; }
inline double soz_upper(SozConvention) { return 1.0; }

/// Temperature held by the baseline controller.
inline double hold_temperature(double T_set, double delta, SozConvention conv) {
  return conv == SozConvention::centered ? T_set : T_set + delta;
}

inline double gain_scale(SozConvention conv) { return conv == SozConvention::centered ? 1.0 : 0.5; }

inline Vec hold_temperatures(const Building& b, SozConvention conv) {
  Vec t(b.size());
  for (std::size_t i = 0; i < b.zones(); ++i)
    t[static_cast<Eigen::Index>(i)] = hold_temperature(b.params().T_set[i], b.params().delta[i], conv);
  return t;
}

inline Vec soz_vector(const Building& b, const Vec& T, SozConvention conv) {
  Vec s(b.size());
  for (std::size_t i = 0; i < b.zones(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    s[ii] = soz_of_temperature(T[ii], b.params().T_set[i], b.params().delta[i], conv);
  }
  return s;
}

inline Mat soz_matrix(const Building& b, const Mat& T, SozConvention conv) {
  Mat s(T.rows(), T.cols());
  for (Eigen::Index k = 0; k < T.cols(); ++k) s.col(k) = soz_vector(b, T.col(k), conv);
  return s;
}

// ---------------------------------------------------------------------------
// Single-zone battery

struct VBSingle {
  double a = 0.0;
  double gain = 0.0;  // b/delta (centered) or b/(2 delta) (unit interval)
  std::vector<double> q_base;
  double q_hvac_min = 0.0;
  double q_hvac_max = 0.0;
  double dt = 0.0;
  SozConvention convention = SozConvention::centered;
  std::vector<std::size_t> infeasible_steps;  // baseline outside the HVAC limits

  double soz_min() const { return soz_lower(convention); }
  double soz_max() const { return soz_upper(convention); }
  double charge(double q_hvac, std::size_t k) const { return gain * (q_hvac - q_base[k]); }
  double charge_min(std::size_t k) const { return gain * (q_hvac_min - q_base[k]); }
  double charge_max(std::size_t k) const { return gain * (q_hvac_max - q_base[k]); }
  double step(double soz, double q_hvac, std::size_t k) const { return a * soz + charge(q_hvac, k); }
  /// Energy over step k implied by a net charging power.
  double energy(double P_ch, std::size_t k) const { return (P_ch / gain + q_base[k]) * dt; }
};

inline VBSingle build_single_vb(const SingleZoneParams& p, const ExogenousSeries& exo, SozConvention conv) {
  const SingleBaseline base = baseline_single(p, exo, hold_temperature(p.T_set, p.delta, conv));
  VBSingle vb;
  vb.a = p.a();
  vb.gain = p.b() / p.delta * gain_scale(conv);
  vb.q_base = base.q_base;
  vb.q_hvac_min = p.q_hvac_min;
  vb.q_hvac_max = p.q_hvac_max;
  vb.dt = p.dt;
  vb.convention = conv;
  vb.infeasible_steps = base.infeasible_steps;
  return vb;
}

// ---------------------------------------------------------------------------
// Zone-level batteries

struct TildeMatrices {
  Mat A;  // a_ij delta_j / delta_i
  Vec B;  // diagonal of B_tilde
};

inline TildeMatrices build_tilde_matrices(const Building& b, SozConvention conv) {
  const auto n = b.size();
  const Vec delta = b.delta();
  TildeMatrices t;
  t.A = b.coeffs().A;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) t.A(i, j) *= delta[j] / delta[i];
  t.B = b.coeffs().b.cwiseQuotient(delta) * gain_scale(conv);
  return t;
}

/// soz(k+1) = A_tilde soz(k) + B_tilde (q(k) - q_base(k))
inline Vec zone_vb_step(const Vec& soz, const Vec& q, const Vec& q_base_k, const TildeMatrices& t) {
  return t.A * soz + t.B.cwiseProduct(q - q_base_k);
}

inline double soc_aggregate(const Vec& soz, const Vec& w) {
  if (soz.size() != w.size()) throw Error("soc_aggregate: dimension mismatch");
  return w.dot(soz);
}

// ---------------------------------------------------------------------------
// Beta bounds on the ratio wB^T q / 1^T q

struct BetaBounds {
  double min = 0.0;
  double max = 0.0;
};

inline BetaBounds beta_conservative(const Vec& wB) {
  if (wB.size() == 0) throw Error("beta_conservative: empty weight vector");
  if (wB.minCoeff() < 0.0) throw Error("beta_conservative: wB must be nonnegative");
  return {wB.minCoeff(), wB.maxCoeff()};
}

inline double beta_at_point(const Vec& wB, const Vec& q, double eps, std::size_t step) {
  const double denom = q.sum();
  if (!(denom > eps)) {
    std::ostringstream os;
    os << "beta_at_point: total cooling " << denom << " at step " << step << " is below the guard " << eps;
    throw Error(os.str());
  }
  return wB.dot(q) / denom;
}

inline double ratio_guard(const Vec& q_max) { return 1e-9 * q_max.sum(); }

namespace detail {

inline void check_box(const Vec& wB, const Vec& q_min, const Vec& q_max) {
  if (wB.size() != q_min.size() || wB.size() != q_max.size()) throw Error("beta_tight_over_box: dimension mismatch");
  for (Eigen::Index i = 0; i < wB.size(); ++i)
    if (q_min[i] < 0.0 || q_min[i] > q_max[i]) throw Error("beta_tight_over_box: requires 0 <= q_min <= q_max");
  if (!(q_max.sum() > 0.0)) throw Error("beta_tight_over_box: degenerate box (sum of q_max is zero)");
}

}  // namespace detail

/// Exact extrema of wB^T q / 1^T q over q_min <= q <= q_max by vertex
/// enumeration. Vertices whose total falls under the guard are skipped. On
/// exact ties the first vertex in lexicographic order (bit i set = upper
/// bound for zone i, zone 0 most significant) wins.
inline BetaBounds beta_tight_by_vertices(const Vec& wB, const Vec& q_min, const Vec& q_max) {
  detail::check_box(wB, q_min, q_max);
  const auto n = wB.size();
  if (n > 30) throw Error("beta_tight_by_vertices: too many zones for enumeration");
  const double eps = ratio_guard(q_max);
  BetaBounds out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  const unsigned long long count = 1ULL << n;
  for (unsigned long long mask = 0; mask < count; ++mask) {
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool upper = (mask >> (n - 1 - i)) & 1ULL;
      const double qi = upper ? q_max[i] : q_min[i];
      num += wB[i] * qi;
      den += qi;
    }
    if (!(den > eps)) continue;
    const double r = num / den;
    if (r < out.min) out.min = r;
    if (r > out.max) out.max = r;
  }
  return out;
}

/// Same extrema through the normalisation y = t q, t = 1/(1^T q), which turns
/// the fractional program into a linear program in (y, t).
inline BetaBounds beta_tight_by_lp(const Vec& wB, const Vec& q_min, const Vec& q_max) {
  detail::check_box(wB, q_min, q_max);
  const auto n = wB.size();
  const double eps = ratio_guard(q_max);
  // variables [y_0..y_{n-1}, t]; rows: 1^T y <= 1, -1^T y <= -1,
  // y - t q_max <= 0, -y + t q_min <= 0, eps t <= 1
  LinearProgram lp;
  lp.A = Mat::Zero(2 * n + 3, n + 1);
  lp.b = Vec::Zero(2 * n + 3);
  lp.A.row(0).head(n).setOnes();
  lp.b[0] = 1.0;
  lp.A.row(1).head(n).setConstant(-1.0);
  lp.b[1] = -1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    lp.A(2 + i, i) = 1.0;
    lp.A(2 + i, n) = -q_max[i];
    lp.A(2 + n + i, i) = -1.0;
    lp.A(2 + n + i, n) = q_min[i];
  }
  lp.A(2 + 2 * n, n) = eps;
  lp.b[2 + 2 * n] = 1.0;
  BetaBounds out;
  for (int sense : {+1, -1}) {
    lp.c = Vec::Zero(n + 1);
    lp.c.head(n) = static_cast<double>(sense) * wB;
    const LpResult r = solve_lp(lp);
    if (r.status != LpStatus::optimal)
      throw Error(std::string("beta_tight_by_lp: linear program ") + to_string(r.status));
    if (sense > 0)
      out.max = r.objective;
    else
      out.min = -r.objective;
  }
  return out;
}

inline BetaBounds beta_tight_over_box(const Vec& wB, const Vec& q_min, const Vec& q_max) {
  if (wB.size() <= 20) return beta_tight_by_vertices(wB, q_min, q_max);
  return beta_tight_by_lp(wB, q_min, q_max);
}

// ---------------------------------------------------------------------------
// q limits and the aggregated battery

struct QLimits {
  Mat q_min;  // n x K
  Mat q_max;
};

/// c_p m_{min,max} (T_hold - T_sup); constant in k for constant limits.
inline QLimits estimate_q_limits(const Building& b, std::size_t K, SozConvention conv = SozConvention::centered) {
  (void)conv;
  const auto& p = b.params();
  QLimits l;
  l.q_min.resize(b.size(), static_cast<Eigen::Index>(K));
  l.q_max.resize(b.size(), static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < b.zones(); ++i) {
    const double span = p.T_set[i] - p.T_sup;
    l.q_min.row(static_cast<Eigen::Index>(i)).setConstant(p.c_p * p.m_min[i] * span);
    l.q_max.row(static_cast<Eigen::Index>(i)).setConstant(p.c_p * p.m_max[i] * span);
  }
  return l;
}

enum class BetaAlgorithm { conservative, step_ahead, tight };

inline const char* to_string(BetaAlgorithm a) {
  switch (a) {
    case BetaAlgorithm::conservative: return "conservative";
    case BetaAlgorithm::step_ahead: return "step-ahead";
    case BetaAlgorithm::tight: return "tight";
  }
  return "unknown";
}

inline BetaAlgorithm parse_beta_algorithm(const std::string& s) {
  if (s == "conservative") return BetaAlgorithm::conservative;
  if (s == "step-ahead" || s == "step_ahead") return BetaAlgorithm::step_ahead;
  if (s == "tight") return BetaAlgorithm::tight;
  throw Error("unknown beta algorithm '" + s + "' (expected conservative|step-ahead|tight)");
}

/// How the per-step betas stored in an aggregate are obtained before any
/// trajectory is known.
enum class BoxBetas { conservative, tight_over_box };

struct VBAggregate {
  Mat A_tilde;
  Vec B_tilde;
  double alpha = 0.0;
  Vec w;
  Vec wB;                          // w^T B_tilde as a vector
  Mat q_base;                      // n x K
  std::vector<double> wBq_base;    // K
  std::vector<double> beta_min;    // K
  std::vector<double> beta_max;    // K
  std::vector<double> Q_min;       // K
  std::vector<double> Q_max;       // K
  SozConvention convention = SozConvention::centered;
  std::vector<BaselineViolation> baseline_violations;

  std::size_t horizon() const { return beta_min.size(); }
  Eigen::Index zones() const { return w.size(); }
  double soc_min() const { return soz_lower(convention); }
  double soc_max() const { return soz_upper(convention); }
  double Q_base(std::size_t k) const { return q_base.col(static_cast<Eigen::Index>(k)).sum(); }

  VBAggregate with_betas(std::vector<double> lo, std::vector<double> hi) const {
    if (lo.size() != horizon() || hi.size() != horizon()) throw Error("with_betas: horizon mismatch");
    VBAggregate out = *this;
    out.beta_min = std::move(lo);
    out.beta_max = std::move(hi);
    return out;
  }
};

struct AggregationWeights {
  TildeMatrices tilde;
  Eigenpair eig;  // of A_tilde^T
};

inline AggregationWeights aggregation_weights(const Building& b, SozConvention conv) {
  AggregationWeights a;
  a.tilde = build_tilde_matrices(b, conv);
  a.eig = dominant_eigenpair(a.tilde.A.transpose());
  return a;
}

inline VBAggregate build_aggregate(const Building& b, const ExogenousSeries& exo, SozConvention conv,
                                   BoxBetas betas = BoxBetas::conservative) {
  const AggregationWeights aw = aggregation_weights(b, conv);
  const MultiBaseline base = baseline_cooling(b, exo, hold_temperatures(b, conv));
  const std::size_t K = exo.horizon();
  VBAggregate vb;
  vb.A_tilde = aw.tilde.A;
  vb.B_tilde = aw.tilde.B;
  vb.alpha = aw.eig.alpha;
  vb.w = aw.eig.w;
  vb.wB = vb.w.cwiseProduct(vb.B_tilde);
  vb.q_base = base.q_base;
  vb.convention = conv;
  vb.baseline_violations = base.violations;
  const QLimits lim = estimate_q_limits(b, K, conv);
  const BetaBounds cons = beta_conservative(vb.wB);
  vb.wBq_base.resize(K);
  vb.beta_min.resize(K);
  vb.beta_max.resize(K);
  vb.Q_min.resize(K);
  vb.Q_max.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    vb.wBq_base[k] = vb.wB.dot(base.q_base.col(kk));
    vb.Q_min[k] = lim.q_min.col(kk).sum();
    vb.Q_max[k] = lim.q_max.col(kk).sum();
    BetaBounds bb = cons;
    if (betas == BoxBetas::tight_over_box) bb = beta_tight_over_box(vb.wB, lim.q_min.col(kk), lim.q_max.col(kk));
    vb.beta_min[k] = bb.min;
    vb.beta_max[k] = bb.max;
  }
  return vb;
}

// ---------------------------------------------------------------------------
// Beta schedules driven by a realised zone cooling trajectory

struct BetaSchedule {
  std::vector<double> beta_min;
  std::vector<double> beta_max;
};

/// Step-ahead: ratio at q(k-1); tight: ratio at the realised q(k). Steps whose
/// total cooling is under the guard (the ratio is undefined there and Q = 0)
/// and the first step-ahead step fall back to the conservative bounds.
inline BetaSchedule beta_schedule(const VBAggregate& vb, BetaAlgorithm algo, const Mat& q, const Vec& q_max_box) {
  const std::size_t K = static_cast<std::size_t>(q.cols());
  const BetaBounds cons = beta_conservative(vb.wB);
  const double eps = ratio_guard(q_max_box);
  BetaSchedule s;
  s.beta_min.assign(K, cons.min);
  s.beta_max.assign(K, cons.max);
  if (algo == BetaAlgorithm::conservative) return s;
  for (std::size_t k = 0; k < K; ++k) {
    std::optional<std::size_t> src;
    if (algo == BetaAlgorithm::tight) src = k;
    else if (k > 0) src = k - 1;
    if (!src) continue;
    const Vec qk = q.col(static_cast<Eigen::Index>(*src));
    if (!(qk.sum() > eps)) continue;
    const double r = beta_at_point(vb.wB, qk, eps, *src);
    s.beta_min[k] = r;
    s.beta_max[k] = r;
  }
  return s;
}

struct SocBoundTrajectory {
  std::vector<double> soc_true;  // empty unless filled from an RC trajectory
  std::vector<double> soc_up;
  std::vector<double> soc_dn;
  BetaAlgorithm algorithm = BetaAlgorithm::conservative;
  std::vector<std::size_t> Q_violations;  // steps with Q outside [Q_min, Q_max]
};

/// soc_up(k+1) = alpha soc_up(k) + beta_max(k) Q(k) - wB^T q_base(k), and
/// soc_dn likewise with beta_min.
inline SocBoundTrajectory propagate_soc_bounds(const VBAggregate& vb, const std::vector<double>& Q, double soc0) {
  const std::size_t K = Q.size();
  if (K > vb.horizon()) throw Error("propagate_soc_bounds: Q longer than the battery horizon");
  SocBoundTrajectory out;
  out.soc_up.resize(K + 1);
  out.soc_dn.resize(K + 1);
  out.soc_up[0] = out.soc_dn[0] = soc0;
  for (std::size_t k = 0; k < K; ++k) {
    if (Q[k] < vb.Q_min[k] || Q[k] > vb.Q_max[k]) out.Q_violations.push_back(k);
    out.soc_up[k + 1] = vb.alpha * out.soc_up[k] + vb.beta_max[k] * Q[k] - vb.wBq_base[k];
    out.soc_dn[k + 1] = vb.alpha * out.soc_dn[k] + vb.beta_min[k] * Q[k] - vb.wBq_base[k];
  }
  return out;
}

inline std::vector<double> soc_series(const Building& b, const Mat& T, const Vec& w, SozConvention conv) {
  const Mat soz = soz_matrix(b, T, conv);
  std::vector<double> soc(static_cast<std::size_t>(T.cols()));
  for (Eigen::Index k = 0; k < T.cols(); ++k) soc[static_cast<std::size_t>(k)] = w.dot(soz.col(k));
  return soc;
}

/// Runs one beta algorithm against an RC trajectory and attaches soc_true.
inline SocBoundTrajectory validate_soc(const Building& b, const VBAggregate& vb, const Trajectory& tr,
                                       BetaAlgorithm algo) {
  const QLimits lim = estimate_q_limits(b, 1, vb.convention);
  const BetaSchedule s = beta_schedule(vb, algo, tr.q, lim.q_max.col(0));
  const VBAggregate vb_k = vb.with_betas(
      std::vector<double>(s.beta_min.begin(), s.beta_min.end()),
      std::vector<double>(s.beta_max.begin(), s.beta_max.end()));
  std::vector<double> soc_true = soc_series(b, tr.T, vb.w, vb.convention);
  SocBoundTrajectory out = propagate_soc_bounds(vb_k, tr.Q, soc_true.front());
  out.soc_true = std::move(soc_true);
  out.algorithm = algo;
  return out;
}

}  // namespace vbflex
