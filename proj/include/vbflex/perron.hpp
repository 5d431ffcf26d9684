#pragma once

#include <cmath>
#include <limits>
#include <sstream>

#include "vbflex/core.hpp"

namespace vbflex {

struct PowerIterationOptions {
  int max_iterations = 100000;
  double tolerance = 1e-12;      // on the infinity norm of successive iterates
  double residual_target = 1e-13;  // polish when ||M w - alpha w||_inf exceeds this
};

struct Eigenpair {
  double alpha = 0.0;
  Vec w;  // nonnegative, sums to one
  int iterations = 0;
  int polish_steps = 0;
};

namespace detail {

inline double perron_residual(const Mat& M, const Vec& w, double alpha) {
  return (M * w - alpha * w).cwiseAbs().maxCoeff();
}

// Collatz-Wielandt upper bound max_i (M x)_i / x_i over the support of x;
// valid for nonnegative M and strictly positive x.
inline double collatz_wielandt_upper(const Mat& M, const Vec& x) {
  const Vec y = M * x;
  double hi = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) hi = std::max(hi, y[i] / x[i]);
  return hi;
}

}  // namespace detail

/// Perron root and probability eigenvector of a nonnegative matrix:
/// M w = alpha w, w >= 0, sum(w) = 1, alpha = spectral radius.
///
/// Power iteration from the uniform vector. When the spectral gap is small the
/// iterate differences shrink long before the residual does, so the result is
/// refined by inverse iteration with a shift just above the Collatz-Wielandt
/// bound. For such a shift (shift I - M)^-1 is entrywise nonnegative, which
/// keeps the refined vector nonnegative.
inline Eigenpair dominant_eigenpair(const Mat& M, const PowerIterationOptions& opt = {}) {
  const Eigen::Index n = M.rows();
  if (n == 0 || M.cols() != n) throw Error("dominant_eigenpair: matrix must be square and nonempty");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (!(M(i, j) >= 0.0)) {
        std::ostringstream os;
        os << "dominant_eigenpair: negative or non-finite entry M(" << i << "," << j << ") = " << M(i, j);
        throw Error(os.str());
      }

  Eigenpair out;
  Vec w = Vec::Constant(n, 1.0 / static_cast<double>(n));
  double alpha = 0.0;
  bool converged = false;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    Vec next = M * w;
    const double s = next.sum();
    if (!(s > 0.0)) {
      // M w = 0 with w > 0 forces M = 0 on the support; spectral radius 0.
      out.alpha = 0.0;
      out.w = w;
      out.iterations = it;
      return out;
    }
    alpha = s;  // since sum(w) = 1 this is the l1 growth factor
    next /= s;
    const double change = (next - w).cwiseAbs().maxCoeff();
    w = std::move(next);
    out.iterations = it;
    if (change <= opt.tolerance) {
      converged = true;
      break;
    }
  }

  // Rayleigh-type estimate consistent with the normalisation.
  alpha = (M * w).sum();
  double residual = detail::perron_residual(M, w, alpha);

  if (residual > opt.residual_target) {
    Vec x = w.cwiseMax(1e-300).eval();
    x /= x.sum();
    for (int step = 0; step < 50 && residual > opt.residual_target; ++step) {
      const double upper = detail::collatz_wielandt_upper(M, x.cwiseMax(1e-300));
      const double shift = upper + std::max(1e-13, 1e-10 * std::abs(upper));
      Eigen::PartialPivLU<Mat> lu(shift * Mat::Identity(n, n) - M);
      Vec y = lu.solve(x);
      for (int inner = 0; inner < 3; ++inner) {
        y = y.cwiseMax(0.0);
        const double ys = y.sum();
        if (!(ys > 0.0) || !std::isfinite(ys)) break;
        x = y / ys;
        y = lu.solve(x);
      }
      y = y.cwiseMax(0.0);
      const double ys = y.sum();
      if (!(ys > 0.0) || !std::isfinite(ys)) break;
      const Vec cand = y / ys;
      const double cand_alpha = (M * cand).sum();
      const double cand_res = detail::perron_residual(M, cand, cand_alpha);
      ++out.polish_steps;
      if (cand_res < residual) {
        w = cand;
        alpha = cand_alpha;
        residual = cand_res;
        x = cand;
      } else {
        break;
      }
    }
    converged = converged || residual <= 1e-10;
  }

  if (!converged) {
    std::ostringstream os;
    os << "dominant_eigenpair: no convergence after " << out.iterations
       << " iterations (residual " << residual << "); the dominant eigenvalue may not be unique in modulus";
    throw Error(os.str());
  }
  out.alpha = alpha;
  out.w = w;
  return out;
}

}  // namespace vbflex
