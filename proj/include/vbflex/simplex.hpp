#pragma once

// Dense two-phase tableau simplex for
//
//     maximize  c^T x   subject to  A x <= b,  x >= 0.
//
// Negative right-hand sides are handled by a phase-one auxiliary column.
// Pricing is Dantzig's largest coefficient; after a run of degenerate pivots
// the solver switches to Bland's smallest-index rule, which cannot cycle, and
// switches back after the next improving pivot.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "vbflex/core.hpp"

namespace vbflex {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

struct LinearProgram {
  Mat A;  // rows x n
  Vec b;  // rows
  Vec c;  // n
};

struct SimplexOptions {
  double eps = 1e-9;
  std::size_t max_pivots = 200000;
  std::size_t degenerate_switch = 50;  // consecutive degenerate pivots before Bland
};

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double objective = 0.0;
  Vec x;
  std::size_t pivots = 0;
};

namespace detail {

class Tableau {
 public:
  Tableau(const LinearProgram& lp, const SimplexOptions& opt)
      : m_(static_cast<std::size_t>(lp.A.rows())),
        n_(static_cast<std::size_t>(lp.A.cols())),
        w_(n_ + 2),
        opt_(opt),
        D_((m_ + 2) * (n_ + 2), 0.0),
        basis_(m_),
        nonbasis_(n_ + 1) {
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < n_; ++j) at(i, j) = lp.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < m_; ++i) {
      basis_[i] = static_cast<long>(n_ + i);
      at(i, n_) = -1.0;
      at(i, n_ + 1) = lp.b[static_cast<Eigen::Index>(i)];
    }
    for (std::size_t j = 0; j < n_; ++j) {
      nonbasis_[j] = static_cast<long>(j);
      at(m_, j) = -lp.c[static_cast<Eigen::Index>(j)];
    }
    nonbasis_[n_] = -1;
    at(m_ + 1, n_) = 1.0;
  }

  LpResult solve() {
    LpResult res;
    std::size_t r = 0;
    for (std::size_t i = 1; i < m_; ++i)
      if (at(i, n_ + 1) < at(r, n_ + 1)) r = i;
    if (m_ > 0 && at(r, n_ + 1) < -opt_.eps) {
      pivot(r, n_);
      const LpStatus phase1 = run(m_ + 1);
      if (phase1 == LpStatus::iteration_limit) return finish(res, phase1);
      if (at(m_ + 1, n_ + 1) < -opt_.eps) return finish(res, LpStatus::infeasible);
      // Drive the auxiliary variable out of the basis if it is still there.
      for (std::size_t i = 0; i < m_; ++i) {
        if (basis_[i] != -1) continue;
        std::size_t s = 0;
        for (std::size_t j = 1; j <= n_; ++j)
          if (at(i, j) < at(i, s) || (at(i, j) == at(i, s) && nonbasis_[j] < nonbasis_[s])) s = j;
        pivot(i, s);
      }
    }
    const LpStatus phase2 = run(m_);
    res.x = Vec::Zero(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] >= 0 && static_cast<std::size_t>(basis_[i]) < n_)
        res.x[basis_[i]] = at(i, n_ + 1);
    res.objective = at(m_, n_ + 1);
    return finish(res, phase2);
  }

 private:
  double& at(std::size_t i, std::size_t j) { return D_[i * w_ + j]; }

  LpResult& finish(LpResult& res, LpStatus s) {
    res.status = s;
    res.pivots = pivots_;
    return res;
  }

  void pivot(std::size_t r, std::size_t s) {
    ++pivots_;
    double* row_r = &D_[r * w_];
    const double inv = 1.0 / row_r[s];
    for (std::size_t i = 0; i < m_ + 2; ++i) {
      if (i == r) continue;
      double* row = &D_[i * w_];
      const double f = row[s] * inv;
      if (std::abs(f) <= 0.0) continue;
      for (std::size_t j = 0; j < w_; ++j) row[j] -= row_r[j] * f;
      row[s] = -f;
    }
    for (std::size_t j = 0; j < w_; ++j)
      if (j != s) row_r[j] *= inv;
    row_r[s] = inv;
    std::swap(basis_[r], nonbasis_[s]);
  }

  // Pivot on objective row `obj` until optimal.
  LpStatus run(std::size_t obj) {
    const bool phase1 = obj == m_ + 1;
    std::size_t degenerate = 0;
    bool bland = false;
    while (true) {
      if (pivots_ >= opt_.max_pivots) return LpStatus::iteration_limit;
      // entering column
      long s = -1;
      for (std::size_t j = 0; j <= n_; ++j) {
        if (!phase1 && nonbasis_[j] == -1) continue;
        const double dj = at(obj, j);
        if (dj >= -opt_.eps) continue;
        if (s < 0) {
          s = static_cast<long>(j);
        } else if (bland) {
          if (nonbasis_[j] < nonbasis_[static_cast<std::size_t>(s)]) s = static_cast<long>(j);
        } else if (dj < at(obj, static_cast<std::size_t>(s)) ||
                   (dj == at(obj, static_cast<std::size_t>(s)) &&
                    nonbasis_[j] < nonbasis_[static_cast<std::size_t>(s)])) {
          s = static_cast<long>(j);
        }
      }
      if (s < 0) return LpStatus::optimal;
      const auto su = static_cast<std::size_t>(s);
      // leaving row: minimum ratio, ties by smallest basic index
      long r = -1;
      for (std::size_t i = 0; i < m_; ++i) {
        const double ais = at(i, su);
        if (ais <= opt_.eps) continue;
        if (r < 0) {
          r = static_cast<long>(i);
          continue;
        }
        const auto ru = static_cast<std::size_t>(r);
        const double lhs = at(i, n_ + 1) / ais;
        const double rhs = at(ru, n_ + 1) / at(ru, su);
        if (lhs < rhs - 1e-14 * std::max(1.0, std::abs(rhs)) ||
            (std::abs(lhs - rhs) <= 1e-14 * std::max(1.0, std::abs(rhs)) && basis_[i] < basis_[ru]))
          r = static_cast<long>(i);
      }
      if (r < 0) return LpStatus::unbounded;
      const auto ru = static_cast<std::size_t>(r);
      const bool degenerate_step = std::abs(at(ru, n_ + 1)) <= opt_.eps;
      pivot(ru, su);
      if (degenerate_step) {
        if (++degenerate >= opt_.degenerate_switch) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
    }
  }

  std::size_t m_, n_, w_;
  SimplexOptions opt_;
  std::vector<double> D_;
  std::vector<long> basis_, nonbasis_;
  std::size_t pivots_ = 0;
};

}  // namespace detail

inline LpResult solve_lp(const LinearProgram& lp, const SimplexOptions& opt = {}) {
  if (lp.A.rows() != lp.b.size() || lp.A.cols() != lp.c.size())
    throw Error("solve_lp: dimension mismatch between A, b and c");
  detail::Tableau t(lp, opt);
  return t.solve();
}

}  // namespace vbflex
