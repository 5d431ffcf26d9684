#pragma once

// Ground-truth RC thermal dynamics for single- and multi-zone buildings.
//
// All quantities are SI: capacitance J/K, resistance K/W, power W, energy J,
// airflow kg/s, specific heat J/(kg.K), step length s. Conversion from the
// table units used in configuration files happens once, in io.hpp.

#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

#include "vbflex/core.hpp"

namespace vbflex {

// ---------------------------------------------------------------------------
// Exogenous inputs

struct ExogenousSeries {
  std::vector<double> T_out;               // [k], degC
  std::vector<std::vector<double>> Q_dist;  // [zone][k], W (positive warms)

  std::size_t horizon() const { return T_out.size(); }
  std::size_t zones() const { return Q_dist.size(); }

  Vec disturbance_at(std::size_t k) const {
    Vec q(static_cast<Eigen::Index>(Q_dist.size()));
    for (std::size_t i = 0; i < Q_dist.size(); ++i) q[static_cast<Eigen::Index>(i)] = Q_dist[i][k];
    return q;
  }

  void validate(std::size_t n_zones) const {
    if (Q_dist.size() != n_zones) {
      std::ostringstream os;
      os << "exogenous series has " << Q_dist.size() << " disturbance columns, expected " << n_zones;
      throw Error(os.str());
    }
    for (std::size_t k = 0; k < T_out.size(); ++k)
      if (!std::isfinite(T_out[k])) throw Error("T_out is not finite at step " + std::to_string(k));
    for (std::size_t i = 0; i < Q_dist.size(); ++i) {
      if (Q_dist[i].size() != T_out.size())
        throw Error("Q_dist for zone " + std::to_string(i) + " does not match T_out length");
      for (std::size_t k = 0; k < Q_dist[i].size(); ++k)
        if (!std::isfinite(Q_dist[i][k]))
          throw Error("Q_dist is not finite for zone " + std::to_string(i) + " at step " + std::to_string(k));
    }
  }

  ExogenousSeries head(std::size_t K) const {
    if (K > horizon()) throw Error("exogenous series shorter than requested horizon");
    ExogenousSeries out;
    out.T_out.assign(T_out.begin(), T_out.begin() + static_cast<std::ptrdiff_t>(K));
    for (const auto& q : Q_dist) out.Q_dist.emplace_back(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(K));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Single zone

struct SingleZoneParams {
  double C_th = 0.0;   // J/K
  double R_oi = 0.0;   // K/W
  double eta = 1.0;    // HVAC coefficient of performance
  double q_hvac_min = 0.0;
  double q_hvac_max = 0.0;
  double T_set = 25.0;
  double delta = 1.0;
  double dt = 1800.0;

  double a() const { return 1.0 - dt / (C_th * R_oi); }
  double b() const { return eta * dt / C_th; }
  double d(double T_out, double Q_dist) const { return T_out * dt / (C_th * R_oi) + Q_dist * dt / C_th; }

  void validate() const {
    if (!(C_th > 0.0) || !(R_oi > 0.0) || !(dt > 0.0) || !(eta > 0.0))
      throw Error("single zone: C_th, R_oi, eta and dt must be positive");
    if (!(delta > 0.0)) throw Error("single zone: comfort half-width delta must be > 0");
    if (q_hvac_min > q_hvac_max) throw Error("single zone: q_hvac_min exceeds q_hvac_max");
    const double av = a();
    if (!(av > 0.0 && av < 1.0)) {
      std::ostringstream os;
      os << "single zone: a = " << av << " outside (0,1); dt too large for C_th*R_oi";
      throw Error(os.str());
    }
  }
};

/// T(k+1) = a T(k) - b q(k) + d(k).
inline double step_single(double T, double q_hvac, double T_out, double Q_dist, const SingleZoneParams& p) {
  if (q_hvac < p.q_hvac_min || q_hvac > p.q_hvac_max) {
    std::ostringstream os;
    os << "single zone: q_hvac = " << q_hvac << " outside [" << p.q_hvac_min << ", " << p.q_hvac_max << "]";
    throw Error(os.str());
  }
  return p.a() * T - p.b() * q_hvac + p.d(T_out, Q_dist);
}

struct SingleBaseline {
  std::vector<double> q_base;
  std::vector<std::size_t> infeasible_steps;  // q_base outside [q_hvac_min, q_hvac_max]
  bool feasible() const { return infeasible_steps.empty(); }
};

/// HVAC power that holds the zone at `target` for every step.
inline SingleBaseline baseline_single(const SingleZoneParams& p, const ExogenousSeries& exo, double target) {
  p.validate();
  exo.validate(1);
  SingleBaseline out;
  out.q_base.resize(exo.horizon());
  for (std::size_t k = 0; k < exo.horizon(); ++k) {
    const double q = ((p.a() - 1.0) * target + p.d(exo.T_out[k], exo.Q_dist[0][k])) / p.b();
    out.q_base[k] = q;
    if (q < p.q_hvac_min || q > p.q_hvac_max) out.infeasible_steps.push_back(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi zone

struct MultiZoneParams {
  std::size_t n_zones = 0;
  std::vector<double> C_th;   // J/K
  std::vector<double> R_oi;   // K/W
  std::map<std::pair<std::size_t, std::size_t>, double> R_adj;  // K/W, both orientations stored
  std::vector<double> T_set;
  std::vector<double> delta;
  std::vector<double> m_min;  // kg/s
  std::vector<double> m_max;
  double c_p = 1012.0;        // J/(kg.K)
  double T_sup = 15.0;
  double d_r = 0.8;
  double kappa_f = 80.0;      // W/(kg/s)^2
  double COP = 1.0;
  double dt = 1800.0;

  void set_adjacency(std::size_t i, std::size_t j, double R) {
    R_adj[{i, j}] = R;
    R_adj[{j, i}] = R;
  }

  double T_max(std::size_t i) const { return T_set[i] + delta[i]; }
  double T_min(std::size_t i) const { return T_set[i] - delta[i]; }

  void validate() const {
    const std::size_t n = n_zones;
    if (n == 0) throw Error("multi zone: n_zones must be >= 1");
    auto check_size = [n](const std::vector<double>& v, const char* name) {
      if (v.size() != n)
        throw Error(std::string("multi zone: ") + name + " has " + std::to_string(v.size()) +
                    " entries, expected " + std::to_string(n));
    };
    check_size(C_th, "C_th");
    check_size(R_oi, "R_oi");
    check_size(T_set, "T_set");
    check_size(delta, "delta");
    check_size(m_min, "m_min");
    check_size(m_max, "m_max");
    for (std::size_t i = 0; i < n; ++i) {
      const std::string z = "multi zone: zone " + std::to_string(i);
      if (!(C_th[i] > 0.0) || !(R_oi[i] > 0.0)) throw Error(z + ": C_th and R_oi must be positive");
      if (!(delta[i] > 0.0)) throw Error(z + ": comfort half-width delta must be > 0");
      if (m_min[i] < 0.0 || m_min[i] > m_max[i]) throw Error(z + ": requires 0 <= m_min <= m_max");
      if (!(T_sup < T_set[i] - delta[i])) throw Error(z + ": T_sup must lie below the comfort band");
    }
    for (const auto& [key, R] : R_adj) {
      const auto [i, j] = key;
      if (i >= n || j >= n || i == j)
        throw Error("multi zone: invalid adjacency (" + std::to_string(i) + "," + std::to_string(j) + ")");
      if (!(R > 0.0)) throw Error("multi zone: adjacency resistances must be positive");
      auto it = R_adj.find({j, i});
      if (it == R_adj.end() || it->second != R)
        throw Error("multi zone: R_adj not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
    if (!(c_p > 0.0) || !(COP > 0.0) || !(dt > 0.0) || kappa_f < 0.0)
      throw Error("multi zone: c_p, COP, dt must be positive and kappa_f nonnegative");
    if (d_r < 0.0 || d_r > 1.0) throw Error("multi zone: return-air fraction d_r must lie in [0,1]");
  }
};

struct MultiZoneCoefficients {
  Mat A;       // n x n, nonnegative
  Vec b;       // diagonal of B, dt / C_th
  Vec a_out;   // dt / (R_oi C_th)
  Vec d_scale; // dt / C_th, maps Q_dist to a temperature increment

  Mat B() const { return b.asDiagonal(); }
  Vec disturbance(const ExogenousSeries& exo, std::size_t k) const {
    return d_scale.cwiseProduct(exo.disturbance_at(k));
  }
};

inline MultiZoneCoefficients coefficients_multi(const MultiZoneParams& p) {
  p.validate();
  const auto n = static_cast<Eigen::Index>(p.n_zones);
  MultiZoneCoefficients c;
  c.A = Mat::Zero(n, n);
  c.b.resize(n);
  c.a_out.resize(n);
  c.d_scale.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const double C = p.C_th[iu];
    c.a_out[i] = p.dt / (p.R_oi[iu] * C);
    c.b[i] = p.dt / C;
    c.d_scale[i] = p.dt / C;
    double diag = 1.0 - c.a_out[i];
    for (const auto& [key, R] : p.R_adj) {
      if (key.first != iu) continue;
      const double aij = p.dt / (C * R);
      c.A(i, static_cast<Eigen::Index>(key.second)) = aij;
      diag -= aij;
    }
    if (!(diag > 0.0 && diag < 1.0)) {
      std::ostringstream os;
      os << "zone " << i << ": a_ii = " << diag
         << " outside (0,1); the discretization is unstable (check units or reduce dt)";
      throw Error(os.str());
    }
    c.A(i, i) = diag;
  }
  return c;
}

/// A validated multi-zone building: parameters plus derived coefficients.
class Building {
 public:
  explicit Building(MultiZoneParams params) : params_(std::move(params)), coeffs_(coefficients_multi(params_)) {}

  const MultiZoneParams& params() const { return params_; }
  const MultiZoneCoefficients& coeffs() const { return coeffs_; }
  std::size_t zones() const { return params_.n_zones; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(params_.n_zones); }

  Vec T_set() const { return Eigen::Map<const Vec>(params_.T_set.data(), size()); }
  Vec delta() const { return Eigen::Map<const Vec>(params_.delta.data(), size()); }
  Vec m_min() const { return Eigen::Map<const Vec>(params_.m_min.data(), size()); }
  Vec m_max() const { return Eigen::Map<const Vec>(params_.m_max.data(), size()); }
  Vec T_lower() const { return T_set() - delta(); }
  Vec T_upper() const { return T_set() + delta(); }

  /// q_i = c_p m_i (T_i - T_sup)
  Vec cooling(const Vec& m, const Vec& T) const {
    return params_.c_p * m.cwiseProduct((T.array() - params_.T_sup).matrix());
  }

  /// Free response: A T + a_out T_out + d, i.e. next temperature with q = 0.
  Vec free_response(const Vec& T, double T_out, const Vec& Q_dist) const {
    return coeffs_.A * T + coeffs_.a_out * T_out + coeffs_.d_scale.cwiseProduct(Q_dist);
  }

 private:
  MultiZoneParams params_;
  MultiZoneCoefficients coeffs_;
};

struct StepResult {
  Vec T_next;
  Vec q;
  bool airflow_in_box = true;  // precondition report; m is never clamped here
};

inline StepResult step_multi(const Vec& T, const Vec& m, double T_out, const Vec& Q_dist, const Building& b) {
  StepResult r;
  r.q = b.cooling(m, T);
  r.T_next = b.free_response(T, T_out, Q_dist) - b.coeffs().b.cwiseProduct(r.q);
  const auto& p = b.params();
  for (std::size_t i = 0; i < b.zones(); ++i) {
    const double mi = m[static_cast<Eigen::Index>(i)];
    if (mi < p.m_min[i] || mi > p.m_max[i]) r.airflow_in_box = false;
  }
  return r;
}

struct BaselineViolation {
  std::size_t zone;
  std::size_t step;
  double m;
  double q;
};

struct MultiBaseline {
  Mat q_base;  // n x K
  Mat m_base;  // n x K, unclamped
  Vec target;
  std::vector<BaselineViolation> violations;
  bool feasible() const { return violations.empty(); }
};

/// Cooling schedule that holds every zone at `target` (T_set for the centered
/// convention, T_set + delta for the unit-interval convention).
inline MultiBaseline baseline_cooling(const Building& b, const ExogenousSeries& exo, const Vec& target) {
  exo.validate(b.zones());
  const auto n = b.size();
  const auto K = static_cast<Eigen::Index>(exo.horizon());
  const auto& p = b.params();
  const auto& c = b.coeffs();
  MultiBaseline out;
  out.target = target;
  out.q_base.resize(n, K);
  out.m_base.resize(n, K);
  const Vec drift = (c.A - Mat::Identity(n, n)) * target;
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    // target = A target - B q + a_out T_out + d  =>  B q = (A - I) target + a_out T_out + d
    const Vec rhs = drift + c.a_out * exo.T_out[ku] + c.disturbance(exo, ku);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      const double q = rhs[i] / c.b[i];
      const double m = q / (p.c_p * (target[i] - p.T_sup));
      out.q_base(i, k) = q;
      out.m_base(i, k) = m;
      if (q < 0.0 || m < p.m_min[iu] || m > p.m_max[iu]) out.violations.push_back({iu, ku, m, q});
    }
  }
  return out;
}

struct PowerBreakdown {
  double P_cooling = 0.0;  // W
  double P_fan = 0.0;      // W
  double Q_tol = 0.0;      // J over one step
};

inline PowerBreakdown hvac_power(const Vec& m, const Vec& T, double T_out, const MultiZoneParams& p) {
  PowerBreakdown r;
  double sum_m = 0.0;
  double recirc = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    sum_m += m[i];
    recirc += m[i] * (T[i] - p.T_sup);
  }
  r.P_cooling = p.c_p * (1.0 - p.d_r) * sum_m * (T_out - p.T_sup) + p.c_p * p.d_r * recirc;
  r.P_fan = p.kappa_f * sum_m * sum_m;
  r.Q_tol = r.P_cooling / p.COP * p.dt + r.P_fan * p.dt;
  return r;
}

// ---------------------------------------------------------------------------
// Trajectories

/// Time-indexed record of one simulation. States carry K+1 columns (including
/// the state after the last control), controls carry K columns.
struct Trajectory {
  Mat T;                    // n x (K+1)
  Mat m;                    // n x K
  Mat q;                    // n x K
  std::vector<double> Q;    // K, aggregate cooling power (W)
  std::vector<double> Q_tol;  // K, electric energy per step (J)
  Mat soz;                  // n x (K+1)
  std::vector<double> soc;  // K+1
  std::vector<double> T_out;  // K

  std::size_t horizon() const { return Q.size(); }
};

/// Replays an airflow schedule on the RC model. soz/soc are left empty.
inline Trajectory simulate_airflow(const Building& b, const ExogenousSeries& exo, const Vec& T0, const Mat& m) {
  const auto n = b.size();
  const auto K = m.cols();
  if (static_cast<std::size_t>(K) > exo.horizon()) throw Error("exogenous series shorter than the airflow schedule");
  Trajectory tr;
  tr.T.resize(n, K + 1);
  tr.m = m;
  tr.q.resize(n, K);
  tr.Q.resize(static_cast<std::size_t>(K));
  tr.Q_tol.resize(static_cast<std::size_t>(K));
  tr.T_out.assign(exo.T_out.begin(), exo.T_out.begin() + K);
  tr.T.col(0) = T0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Vec Tk = tr.T.col(k);
    const Vec mk = m.col(k);
    const StepResult s = step_multi(Tk, mk, exo.T_out[ku], exo.disturbance_at(ku), b);
    tr.T.col(k + 1) = s.T_next;
    tr.q.col(k) = s.q;
    tr.Q[ku] = s.q.sum();
    tr.Q_tol[ku] = hvac_power(mk, Tk, exo.T_out[ku], b.params()).Q_tol;
  }
  return tr;
}

inline double energy_cost(const std::vector<double>& Q_tol_joules, const std::vector<double>& price_per_kwh) {
  if (price_per_kwh.size() < Q_tol_joules.size()) throw Error("tariff shorter than energy trajectory");
  double cost = 0.0;
  for (std::size_t k = 0; k < Q_tol_joules.size(); ++k) cost += price_per_kwh[k] * Q_tol_joules[k] / kJoulesPerKwh;
  return cost;
}

// ---------------------------------------------------------------------------
// Comfort-feasible airflow

struct AirflowInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool comfort_feasible = true;  // false: the box cannot keep T(k+1) in band
};

/// Per-zone airflow range keeping T_i(k+1) inside [T_lo_i, T_hi_i], intersected
/// with the VAV box. When the intersection is empty the interval collapses to
/// the box end closest to the band.
inline std::vector<AirflowInterval> comfort_airflow_intervals(const Building& b, const Vec& T, double T_out,
                                                              const Vec& Q_dist, const Vec& T_lo, const Vec& T_hi) {
  const auto& p = b.params();
  const Vec free = b.free_response(T, T_out, Q_dist);
  std::vector<AirflowInterval> out(b.zones());
  for (std::size_t iu = 0; iu < b.zones(); ++iu) {
    const auto i = static_cast<Eigen::Index>(iu);
    const double slope = b.coeffs().b[i] * p.c_p * (T[i] - p.T_sup);  // dT_next / dm
    AirflowInterval& iv = out[iu];
    if (!(slope > 0.0)) {
      iv.lo = p.m_min[iu];
      iv.hi = p.m_max[iu];
      iv.comfort_feasible = free[i] >= T_lo[i] && free[i] <= T_hi[i];
      continue;
    }
    const double need = (free[i] - T_hi[i]) / slope;   // airflow to stay below upper limit
    const double allow = (free[i] - T_lo[i]) / slope;  // airflow before undershooting
    iv.lo = std::max(p.m_min[iu], need);
    iv.hi = std::min(p.m_max[iu], allow);
    if (iv.lo > iv.hi) {
      iv.comfort_feasible = false;
      if (need > p.m_max[iu]) {
        iv.lo = iv.hi = p.m_max[iu];
      } else {
        iv.lo = iv.hi = p.m_min[iu];
      }
    }
  }
  return out;
}

}  // namespace vbflex
