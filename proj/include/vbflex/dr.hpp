#pragma once

// Two-level demand response: an LP commitment on the aggregated battery, a
// one-step-ahead tracker on the RC model, and a multi-start gradient oracle
// that optimises the RC model directly.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "vbflex/core.hpp"
#include "vbflex/policy.hpp"
#include "vbflex/simplex.hpp"
#include "vbflex/surrogate.hpp"
#include "vbflex/thermal.hpp"
#include "vbflex/vb.hpp"

namespace vbflex {

inline void validate_tariff(const std::vector<double>& price, std::size_t K) {
  if (price.size() < K)
    throw Error("tariff has " + std::to_string(price.size()) + " steps, horizon needs " + std::to_string(K));
  for (std::size_t k = 0; k < K; ++k)
    if (!(price[k] >= 0.0) || !std::isfinite(price[k])) throw Error("tariff: invalid price at step " + std::to_string(k));
}

// ---------------------------------------------------------------------------
// Upper level

struct DRCommitment {
  std::vector<double> soc;        // K+1, soc[0] = soc0
  std::vector<double> P_chdis;    // K
  std::vector<double> Q;          // K, W
  std::vector<double> Q_tol_hat;  // K, J
  double objective = 0.0;         // predicted cost
  LpStatus status = LpStatus::infeasible;
  std::string diagnostic;         // first violated constraint family when infeasible
  double max_violation = 0.0;     // recomputed from the returned trajectory
  std::size_t lp_rows = 0;
  std::size_t lp_cols = 0;
  std::size_t pivots = 0;

  std::size_t horizon() const { return Q.size(); }
  bool optimal() const { return status == LpStatus::optimal; }
};

/// Inputs of the commitment LP that are not part of the battery itself.
struct CommitmentInputs {
  std::vector<double> price;  // per kWh
  std::vector<double> T_out;  // K
  double soc0 = 0.0;
  double Q_history = 0.0;     // aggregate cooling before the window (W)
  double soc_history = 0.0;   // soc before the window
};

namespace detail {

struct SurrogateTerms {
  std::vector<double> soc, Q, T_out, QT;  // per lag
  double intercept = 0.0;
};

inline SurrogateTerms surrogate_terms(const SurrogateModel& m) {
  const FeatureSpec& f = m.features;
  if (f.squares || f.soc_q)
    throw Error("commitment LP needs a surrogate that is affine in soc and Q (refit with decision_affine())");
  SurrogateTerms t;
  t.intercept = m.intercept;
  Eigen::Index j = 0;
  for (std::size_t l = 0; l <= f.lags; ++l) {
    t.soc.push_back(m.coef[j++]);
    t.Q.push_back(m.coef[j++]);
    t.T_out.push_back(m.coef[j++]);
    t.QT.push_back(f.interactions ? m.coef[j++] : 0.0);
  }
  return t;
}

}  // namespace detail

/// Predicted energy per step for given soc (K+1) and Q (K) trajectories.
inline std::vector<double> surrogate_energy(const SurrogateModel& m, const std::vector<double>& soc,
                                            const std::vector<double>& Q, const CommitmentInputs& in) {
  const std::size_t K = Q.size();
  const std::size_t L = m.features.lags;
  std::vector<double> E(K);
  for (std::size_t k = 0; k < K; ++k) {
    SampleRecord s;
    for (std::size_t l = 0; l <= L; ++l) {
      const bool before = l > k;
      s.soc.push_back(before ? in.soc_history : soc[k - l]);
      s.Q.push_back(before ? in.Q_history : Q[k - l]);
      s.T_out.push_back(before ? in.T_out[0] : in.T_out[k - l]);
    }
    E[k] = predict(m, s);
  }
  return E;
}

/// Worst violation of the battery constraints by a (soc, Q) trajectory.
inline double commitment_violation(const VBAggregate& vb, const std::vector<double>& soc, const std::vector<double>& Q) {
  double v = 0.0;
  for (std::size_t k = 0; k < Q.size(); ++k) {
    const double up = vb.alpha * soc[k] + vb.beta_max[k] * Q[k] - vb.wBq_base[k];
    const double dn = vb.alpha * soc[k] + vb.beta_min[k] * Q[k] - vb.wBq_base[k];
    v = std::max({v, soc[k + 1] - up, dn - soc[k + 1], Q[k] - vb.Q_max[k], vb.Q_min[k] - Q[k]});
    v = std::max({v, soc[k + 1] - vb.soc_max(), vb.soc_min() - soc[k + 1]});
  }
  return v;
}

namespace detail {

// Reachable soc interval under the box; names the first family that empties it.
inline std::string reachability_diagnostic(const VBAggregate& vb, double soc0, std::size_t K) {
  double lo = soc0, hi = soc0;
  if (soc0 < vb.soc_min() - 1e-12 || soc0 > vb.soc_max() + 1e-12) return "initial soc outside [soc_min, soc_max]";
  for (std::size_t k = 0; k < K; ++k) {
    if (vb.Q_min[k] > vb.Q_max[k]) return "cooling box empty at step " + std::to_string(k);
    const double nlo = vb.alpha * lo + vb.beta_min[k] * vb.Q_min[k] - vb.wBq_base[k];
    const double nhi = vb.alpha * hi + vb.beta_max[k] * vb.Q_max[k] - vb.wBq_base[k];
    if (nhi < vb.soc_min() - 1e-9)
      return "soc lower bound unreachable at step " + std::to_string(k + 1) + " (Q_max too small to hold comfort)";
    if (nlo > vb.soc_max() + 1e-9)
      return "soc upper bound unreachable at step " + std::to_string(k + 1) + " (Q_min forces overcooling)";
    lo = std::max(nlo, vb.soc_min());
    hi = std::min(nhi, vb.soc_max());
  }
  return "";
}

}  // namespace detail

/// The commitment program as an LP in (sigma, u): sigma(k) = soc(k) - soc_min
/// for k = 1..K and u(k) = (Q(k) - Q_min(k)) in kW for k = 0..K-1.
struct CommitmentLp {
  LinearProgram lp;
  double constant = 0.0;  // objective = constant - lp optimum (the LP maximises)
  std::size_t K = 0;
};

inline CommitmentLp build_commitment_lp(const VBAggregate& vb, const SurrogateModel& model, const CommitmentInputs& in) {
  const std::size_t K = in.price.size();
  if (K == 0) throw Error("commitment: empty horizon");
  if (K > vb.horizon()) throw Error("commitment: tariff longer than the battery horizon");
  if (in.T_out.size() < K) throw Error("commitment: T_out shorter than the horizon");
  validate_tariff(in.price, K);
  const detail::SurrogateTerms t = detail::surrogate_terms(model);
  const std::size_t L = model.features.lags;
  const double lo = vb.soc_min(), hi = vb.soc_max();
  constexpr double kW = 1000.0;
  const auto Ke = static_cast<Eigen::Index>(K);
  auto sig = [](std::size_t k) { return static_cast<Eigen::Index>(k - 1); };  // k in 1..K
  auto uix = [Ke](std::size_t k) { return Ke + static_cast<Eigen::Index>(k); };

  CommitmentLp out;
  out.K = K;
  LinearProgram& lp = out.lp;
  const Eigen::Index rows = 4 * Ke, cols = 2 * Ke;
  lp.A = Mat::Zero(rows, cols);
  lp.b = Vec::Zero(rows);
  lp.c = Vec::Zero(cols);
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double prev_const = k >= 1 ? lo : in.soc0;
    // soc(k+1) - alpha soc(k) - beta_max Q(k) <= -wBq_base
    lp.A(r, sig(k + 1)) = 1.0;
    if (k >= 1) lp.A(r, sig(k)) = -vb.alpha;
    lp.A(r, uix(k)) = -vb.beta_max[k] * kW;
    lp.b[r] = -vb.wBq_base[k] - lo + vb.alpha * prev_const + vb.beta_max[k] * vb.Q_min[k];
    ++r;
    // -soc(k+1) + alpha soc(k) + beta_min Q(k) <= wBq_base
    lp.A(r, sig(k + 1)) = -1.0;
    if (k >= 1) lp.A(r, sig(k)) = vb.alpha;
    lp.A(r, uix(k)) = vb.beta_min[k] * kW;
    lp.b[r] = vb.wBq_base[k] + lo - vb.alpha * prev_const - vb.beta_min[k] * vb.Q_min[k];
    ++r;
  }
  for (std::size_t k = 1; k <= K; ++k) {
    lp.A(r, sig(k)) = 1.0;
    lp.b[r++] = hi - lo;
  }
  for (std::size_t k = 0; k < K; ++k) {
    lp.A(r, uix(k)) = 1.0;
    lp.b[r++] = (vb.Q_max[k] - vb.Q_min[k]) / kW;
  }

  // Objective: sum_k price_k / 3.6e6 * F(window ending at k).
  double constant = 0.0;
  Vec cost = Vec::Zero(cols);
  for (std::size_t k = 0; k < K; ++k) {
    const double ck = in.price[k] / kJoulesPerKwh;
    constant += ck * t.intercept;
    for (std::size_t l = 0; l <= L; ++l) {
      const bool before = l > k;
      const std::size_t j = before ? 0 : k - l;
      const double To = before ? in.T_out[0] : in.T_out[j];
      constant += ck * t.T_out[l] * To;
      const double q_coef = ck * (t.Q[l] + t.QT[l] * To);
      if (before) {
        constant += q_coef * in.Q_history + ck * t.soc[l] * in.soc_history;
        continue;
      }
      constant += q_coef * vb.Q_min[j];
      cost[uix(j)] += q_coef * kW;
      if (j == 0) {
        constant += ck * t.soc[l] * in.soc0;
      } else {
        constant += ck * t.soc[l] * lo;
        cost[sig(j)] += ck * t.soc[l];
      }
    }
  }
  lp.c = -cost;
  out.constant = constant;
  return out;
}

inline DRCommitment upper_level_commit(const VBAggregate& vb, const SurrogateModel& model, const CommitmentInputs& in,
                                       const SimplexOptions& opt = {}) {
  const CommitmentLp clp = build_commitment_lp(vb, model, in);
  const std::size_t K = clp.K;
  DRCommitment c;
  c.lp_rows = static_cast<std::size_t>(clp.lp.A.rows());
  c.lp_cols = static_cast<std::size_t>(clp.lp.A.cols());
  const LpResult res = solve_lp(clp.lp, opt);
  c.status = res.status;
  c.pivots = res.pivots;
  if (res.status != LpStatus::optimal) {
    c.diagnostic = detail::reachability_diagnostic(vb, in.soc0, K);
    if (c.diagnostic.empty()) c.diagnostic = std::string("linear program ") + to_string(res.status);
    return c;
  }
  c.soc.resize(K + 1);
  c.Q.resize(K);
  c.P_chdis.resize(K);
  c.soc[0] = in.soc0;
  for (std::size_t k = 1; k <= K; ++k) c.soc[k] = vb.soc_min() + res.x[static_cast<Eigen::Index>(k - 1)];
  for (std::size_t k = 0; k < K; ++k) {
    c.Q[k] = vb.Q_min[k] + 1000.0 * res.x[static_cast<Eigen::Index>(K + k)];
    c.P_chdis[k] = c.soc[k + 1] - vb.alpha * c.soc[k];
  }
  c.Q_tol_hat = surrogate_energy(model, c.soc, c.Q, in);
  c.objective = 0.0;
  for (std::size_t k = 0; k < K; ++k) c.objective += in.price[k] * c.Q_tol_hat[k] / kJoulesPerKwh;
  c.max_violation = commitment_violation(vb, c.soc, c.Q);
  return c;
}

// ---------------------------------------------------------------------------
// Lower level

struct TrackingResult {
  Trajectory trajectory;
  std::vector<double> residual;  // realised - committed energy, J
  std::vector<double> level;     // chosen common comfort level per step
  double cost = 0.0;             // Cost_VB
  std::size_t comfort_violations = 0;       // (zone, step) pairs outside the band after the step
  std::size_t infeasible_intervals = 0;     // (zone, step) pairs where the box could not hold comfort
};

namespace detail {

struct LevelAllocation {
  Vec m;
  double energy = 0.0;
};

// Airflow that steers every zone to T_set - delta * level at the next step,
// clamped into the comfort interval; energy of that allocation.
inline LevelAllocation allocate_level(const Building& b, const Vec& T, double T_out, const Vec& free,
                                      const std::vector<AirflowInterval>& iv, double level) {
  const auto& p = b.params();
  LevelAllocation a;
  a.m.resize(b.size());
  for (std::size_t iu = 0; iu < b.zones(); ++iu) {
    const auto i = static_cast<Eigen::Index>(iu);
    const double slope = b.coeffs().b[i] * p.c_p * (T[i] - p.T_sup);
    const double target = p.T_set[iu] - p.delta[iu] * level;
    const double mi = slope > 0.0 ? (free[i] - target) / slope : iv[iu].lo;
    a.m[i] = std::clamp(mi, iv[iu].lo, iv[iu].hi);
  }
  a.energy = hvac_power(a.m, T, T_out, p).Q_tol;
  return a;
}

}  // namespace detail

/// One-step-ahead tracking of a committed energy trajectory. Each step chooses
/// a common next-step comfort level for all zones; the energy of the resulting
/// allocation is nondecreasing in the level, so the level matching the target
/// is found by bisection (golden-section search on the squared residual is
/// used instead if the map is found to be non-monotone).
inline TrackingResult lower_level_track(const std::vector<double>& committed_energy, const Building& b,
                                        const ExogenousSeries& exo, const std::vector<double>& price, const Vec& T0) {
  const std::size_t K = committed_energy.size();
  if (exo.horizon() < K) throw Error("lower_level_track: exogenous series shorter than the commitment");
  validate_tariff(price, K);
  const auto n = b.size();
  const auto Ki = static_cast<Eigen::Index>(K);
  TrackingResult res;
  Trajectory& tr = res.trajectory;
  tr.T.resize(n, Ki + 1);
  tr.m.resize(n, Ki);
  tr.q.resize(n, Ki);
  tr.Q.resize(K);
  tr.Q_tol.resize(K);
  tr.T_out.assign(exo.T_out.begin(), exo.T_out.begin() + Ki);
  tr.T.col(0) = T0;
  res.residual.resize(K);
  res.level.resize(K);
  const Vec T_lo = b.T_lower(), T_hi = b.T_upper();
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const Vec T = tr.T.col(kk);
    const Vec Qd = exo.disturbance_at(k);
    const double To = exo.T_out[k];
    const Vec free = b.free_response(T, To, Qd);
    const auto iv = comfort_airflow_intervals(b, T, To, Qd, T_lo, T_hi);
    for (const auto& v : iv)
      if (!v.comfort_feasible) ++res.infeasible_intervals;
    const double target = committed_energy[k];
    auto energy_at = [&](double lv) { return detail::allocate_level(b, T, To, free, iv, lv).energy; };
    double a = -1.0, c = 1.0;
    const double Ea = energy_at(a), Ec = energy_at(c);
    double level;
    if (target <= Ea) {
      level = a;
    } else if (target >= Ec) {
      level = c;
    } else {
      // bisection on the monotone bracket
      double lo = a, hi = c;
      bool monotone = true;
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double Em = energy_at(mid);
        if (Em < Ea - 1e-9 * std::abs(Ea) || Em > Ec + 1e-9 * std::abs(Ec)) monotone = false;
        if (Em < target)
          lo = mid;
        else
          hi = mid;
      }
      level = std::abs(energy_at(lo) - target) <= std::abs(energy_at(hi) - target) ? lo : hi;
      if (!monotone) {
        // golden-section on (E - target)^2 over the full level range
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = c - g * (c - a), x2 = a + g * (c - a);
        auto f = [&](double lv) {
          const double e = energy_at(lv) - target;
          return e * e;
        };
        double f1 = f(x1), f2 = f(x2), lo_g = a, hi_g = c;
        for (int it = 0; it < 200 && hi_g - lo_g > 1e-14; ++it) {
          if (f1 <= f2) {
            hi_g = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi_g - g * (hi_g - lo_g);
            f1 = f(x1);
          } else {
            lo_g = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo_g + g * (hi_g - lo_g);
            f2 = f(x2);
          }
        }
        const double cand = 0.5 * (lo_g + hi_g);
        if (f(cand) < f(level)) level = cand;
      }
    }
    const auto alloc = detail::allocate_level(b, T, To, free, iv, level);
    const StepResult s = step_multi(T, alloc.m, To, Qd, b);
    tr.m.col(kk) = alloc.m;
    tr.q.col(kk) = s.q;
    tr.T.col(kk + 1) = s.T_next;
    tr.Q[k] = s.q.sum();
    tr.Q_tol[k] = alloc.energy;
    res.level[k] = level;
    res.residual[k] = alloc.energy - target;
    for (Eigen::Index i = 0; i < n; ++i)
      if (s.T_next[i] > T_hi[i] + 1e-9 || s.T_next[i] < T_lo[i] - 1e-9) ++res.comfort_violations;
  }
  res.cost = energy_cost(tr.Q_tol, price);
  return res;
}

// ---------------------------------------------------------------------------
// RC-optimal oracle

struct OracleOptions {
  std::uint64_t seed = 0;
  std::size_t random_starts = 4;
  std::vector<double> penalties = {1e1, 1e2, 1e3, 1e4, 1e5};  // per K^2 of comfort violation
  std::size_t iterations_per_phase = 200;
  double relative_tolerance = 1e-10;
};

struct OracleStart {
  std::string name;
  Mat m;  // n x K
};

struct OracleResult {
  double cost = std::numeric_limits<double>::infinity();  // Cost_Opt
  Trajectory trajectory;
  std::string best_start;
  std::vector<double> start_costs;  // after descent and repair, in start order
  std::vector<std::string> start_names;
};

namespace detail {

struct OracleProblem {
  const Building& b;
  const ExogenousSeries& exo;
  const std::vector<double>& price;
  Vec T0;
  std::size_t K;
  Mat Qd;  // n x K disturbance temperature increments plus outdoor drive

  OracleProblem(const Building& bb, const ExogenousSeries& e, const std::vector<double>& p, const Vec& t0,
                std::size_t k)
      : b(bb), exo(e), price(p), T0(t0), K(k) {
    Qd.resize(b.size(), static_cast<Eigen::Index>(K));
    for (std::size_t j = 0; j < K; ++j)
      Qd.col(static_cast<Eigen::Index>(j)) = b.coeffs().a_out * e.T_out[j] + b.coeffs().disturbance(e, j);
  }

  // Cost plus penalty; optional gradient with respect to m.
  double evaluate(const Mat& m, double rho, Mat* grad) const {
    const auto& p = b.params();
    const auto& c = b.coeffs();
    const auto n = b.size();
    const auto Ki = static_cast<Eigen::Index>(K);
    Mat T(n, Ki + 1);
    T.col(0) = T0;
    const Vec T_lo = b.T_lower(), T_hi = b.T_upper();
    double J = 0.0;
    for (Eigen::Index k = 0; k < Ki; ++k) {
      const Vec Tk = T.col(k);
      const Vec q = p.c_p * m.col(k).cwiseProduct((Tk.array() - p.T_sup).matrix());
      T.col(k + 1) = c.A * Tk - c.b.cwiseProduct(q) + Qd.col(k);
      J += price[static_cast<std::size_t>(k)] / kJoulesPerKwh *
           hvac_power(m.col(k), Tk, exo.T_out[static_cast<std::size_t>(k)], p).Q_tol;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double up = T(i, k + 1) - T_hi[i], dn = T_lo[i] - T(i, k + 1);
        if (up > 0) J += rho * up * up;
        if (dn > 0) J += rho * dn * dn;
      }
    }
    if (!grad) return J;
    grad->resize(n, Ki);
    Vec lam = Vec::Zero(n);  // dJ/dT(k+1)
    for (Eigen::Index k = Ki - 1; k >= 0; --k) {
      // penalty on T(k+1)
      for (Eigen::Index i = 0; i < n; ++i) {
        const double up = T(i, k + 1) - T_hi[i], dn = T_lo[i] - T(i, k + 1);
        if (up > 0) lam[i] += 2 * rho * up;
        if (dn > 0) lam[i] -= 2 * rho * dn;
      }
      const auto ku = static_cast<std::size_t>(k);
      const double ck = price[ku] / kJoulesPerKwh;
      const Vec Tk = T.col(k);
      const Vec mk = m.col(k);
      const double sum_m = mk.sum();
      const double To = exo.T_out[ku];
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dE_dm = p.dt * (p.c_p * (1 - p.d_r) * (To - p.T_sup) / p.COP +
                                     p.c_p * p.d_r * (Tk[i] - p.T_sup) / p.COP + 2 * p.kappa_f * sum_m);
        (*grad)(i, k) = ck * dE_dm - lam[i] * c.b[i] * p.c_p * (Tk[i] - p.T_sup);
      }
      // lam(k) = c_k dE/dT + (A - diag(b c_p m))^T lam(k+1)
      Vec next = c.A.transpose() * lam - (c.b.array() * p.c_p * mk.array() * lam.array()).matrix();
      for (Eigen::Index i = 0; i < n; ++i) next[i] += ck * p.dt * p.c_p * p.d_r * mk[i] / p.COP;
      lam = next;
    }
    return J;
  }

  // Forward simulation that clamps each step into the comfort interval.
  Mat repair(const Mat& m) const {
    const auto Ki = static_cast<Eigen::Index>(K);
    Mat out = m;
    Vec T = T0;
    for (Eigen::Index k = 0; k < Ki; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const Vec Qdist = exo.disturbance_at(ku);
      const auto iv = comfort_airflow_intervals(b, T, exo.T_out[ku], Qdist, b.T_lower(), b.T_upper());
      for (Eigen::Index i = 0; i < b.size(); ++i)
        out(i, k) = std::clamp(out(i, k), iv[static_cast<std::size_t>(i)].lo, iv[static_cast<std::size_t>(i)].hi);
      T = step_multi(T, out.col(k), exo.T_out[ku], Qdist, b).T_next;
    }
    return out;
  }

  Mat project(const Mat& m) const {
    Mat out = m;
    const Vec lo = b.m_min(), hi = b.m_max();
    for (Eigen::Index k = 0; k < out.cols(); ++k) out.col(k) = out.col(k).cwiseMax(lo).cwiseMin(hi);
    return out;
  }
};

// Spectral projected gradient: Barzilai-Borwein step lengths with a
// nonmonotone Armijo test over the last few objective values.
inline Mat descend(const OracleProblem& prob, Mat m, double rho, std::size_t iterations, double rel_tol) {
  constexpr std::size_t memory = 10;
  Mat g;
  double J = prob.evaluate(m, rho, &g);
  std::vector<double> history{J};
  double step = 1e-3;
  std::size_t stalled = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const Mat d = prob.project(m - step * g) - m;
    const double slope = (g.array() * d.array()).sum();
    if (d.cwiseAbs().maxCoeff() <= 1e-14 || slope >= 0.0) break;
    const double ref = *std::max_element(history.begin(), history.end());
    double lambda = 1.0;
    Mat cand;
    double Jc = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      cand = m + lambda * d;
      Jc = prob.evaluate(cand, rho, nullptr);
      if (Jc <= ref + 1e-4 * lambda * slope) {
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
    Mat g_new;
    Jc = prob.evaluate(cand, rho, &g_new);
    const Mat s_vec = cand - m;
    const Mat y_vec = g_new - g;
    const double sy = (s_vec.array() * y_vec.array()).sum();
    const double ss = s_vec.squaredNorm();
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e6) : 1e6;
    stalled = (J - Jc) <= rel_tol * std::max(1.0, std::abs(J)) ? stalled + 1 : 0;
    m = std::move(cand);
    g = std::move(g_new);
    J = Jc;
    history.push_back(J);
    if (history.size() > memory) history.erase(history.begin());
    if (stalled >= memory) break;
  }
  return m;
}

}  // namespace detail

/// Multi-start local search on the RC model. Starts are descended through a
/// penalty ramp, repaired by clamping into the per-step comfort interval and
/// scored by true cost. Extra starts (for instance the tracking solution) are
/// also scored as given, so the incumbent is never worse than any of them.
inline OracleResult rc_optimal_oracle(const Building& b, const ExogenousSeries& exo, const std::vector<double>& price,
                                      const Vec& T0, std::size_t K, const std::vector<OracleStart>& extra_starts,
                                      const OracleOptions& opt = {}) {
  if (exo.horizon() < K) throw Error("rc_optimal_oracle: exogenous series shorter than the horizon");
  validate_tariff(price, K);
  const auto n = b.size();
  const auto Ki = static_cast<Eigen::Index>(K);
  detail::OracleProblem prob(b, exo, price, T0, K);

  std::vector<OracleStart> starts = extra_starts;
  for (const auto& s : starts)
    if (s.m.rows() != n || s.m.cols() != Ki) throw Error("rc_optimal_oracle: start '" + s.name + "' has the wrong shape");
  {
    const auto base = baseline_cooling(b, exo.head(K), b.T_set());
    starts.push_back({"baseline", prob.project(base.m_base)});
  }
  starts.push_back({"price_greedy", run_policy(Policy::price_greedy(price, 48), b, exo, T0, K, {SozConvention::centered, Vec::Constant(n, 1.0 / static_cast<double>(n))}).trajectory.m});
  starts.push_back({"pid", run_policy(Policy::pid(), b, exo, T0, K, {SozConvention::centered, Vec::Constant(n, 1.0 / static_cast<double>(n))}).trajectory.m});
  for (std::size_t r = 0; r < opt.random_starts; ++r) {
    Rng rng(derive_seed(opt.seed, "oracle.start", r));
    Mat m(n, Ki);
    for (Eigen::Index k = 0; k < Ki; ++k)
      for (Eigen::Index i = 0; i < n; ++i) m(i, k) = rng.uniform(b.m_min()[i], b.m_max()[i]);
    starts.push_back({"random" + std::to_string(r), m});
  }

  OracleResult best;
  auto consider = [&](const Mat& m, const std::string& name) {
    const Trajectory tr = simulate_airflow(b, exo, T0, m);
    for (Eigen::Index k = 1; k <= Ki; ++k)
      for (Eigen::Index i = 0; i < n; ++i)
        if (tr.T(i, k) > b.T_upper()[i] + 1e-9 || tr.T(i, k) < b.T_lower()[i] - 1e-9)
          return std::numeric_limits<double>::infinity();
    const double cost = energy_cost(tr.Q_tol, price);
    if (cost < best.cost) {
      best.cost = cost;
      best.trajectory = tr;
      best.best_start = name;
    }
    return cost;
  };
  // Extra starts are scored untouched first (they carry their own feasibility).
  for (const auto& s : extra_starts) consider(s.m, s.name + "(as given)");
  for (const auto& s : starts) {
    Mat m = prob.project(s.m);
    for (double rho : opt.penalties) m = detail::descend(prob, m, rho, opt.iterations_per_phase, opt.relative_tolerance);
    const double cost = consider(prob.repair(m), s.name);
    best.start_costs.push_back(cost);
    best.start_names.push_back(s.name);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Report

struct DrReport {
  std::size_t K = 0;
  double cost_vb = 0.0;
  double cost_opt = 0.0;
  double gap_percent = 0.0;
  std::size_t vars_vb = 0;        // soc, P, Q and Q_tol per step
  std::size_t vars_rc = 0;        // T and m per zone plus Q and Q_tol per step
  std::size_t vars_vb_table = 0;  // 3K counting convention
  std::size_t vars_rc_table = 0;  // 2nK counting convention
  double predicted_cost = 0.0;    // LP objective
};

inline DrReport evaluate_dr(const DRCommitment& c, const TrackingResult& t, const OracleResult& o, std::size_t n_zones) {
  DrReport r;
  r.K = c.horizon();
  r.cost_vb = t.cost;
  r.cost_opt = o.cost;
  r.gap_percent = o.cost > 0 ? (t.cost - o.cost) / o.cost * 100.0 : 0.0;
  r.vars_vb = 4 * r.K;
  r.vars_rc = (2 * n_zones + 2) * r.K;
  r.vars_vb_table = 3 * r.K;
  r.vars_rc_table = 2 * n_zones * r.K;
  r.predicted_cost = c.objective;
  return r;
}

}  // namespace vbflex
