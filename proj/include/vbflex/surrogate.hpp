#pragma once

// Data-driven map from (soc, Q, T_out) windows to per-step electric energy:
// dataset construction, ridge least squares on lagged features, metrics.

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "vbflex/core.hpp"
#include "vbflex/policy.hpp"

namespace vbflex {

/// One window ending at step k. Index l of each vector holds the value at k - l.
struct SampleRecord {
  std::vector<double> soc;
  std::vector<double> Q;
  std::vector<double> T_out;
  double target = 0.0;  // Q_tol(k), J
  std::size_t run = 0;
  std::size_t step = 0;
};

struct Dataset {
  std::string name;
  std::size_t lags = 1;
  std::vector<SampleRecord> samples;
  std::size_t size() const { return samples.size(); }
};

inline Dataset build_dataset(const std::vector<SimulationRun>& runs, std::size_t L, std::string name = "") {
  if (runs.empty()) throw Error("build_dataset: no runs");
  Dataset d;
  d.name = std::move(name);
  d.lags = L;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const Trajectory& tr = runs[r].trajectory;
    const std::size_t K = tr.horizon();
    if (K < L + 1)
      throw Error("build_dataset: run " + std::to_string(r) + " has " + std::to_string(K) + " steps, needs at least " +
                  std::to_string(L + 1));
    if (tr.soc.size() < K) throw Error("build_dataset: run " + std::to_string(r) + " has no soc series");
    for (std::size_t k = L; k < K; ++k) {
      SampleRecord s;
      s.run = r;
      s.step = k;
      for (std::size_t l = 0; l <= L; ++l) {
        s.soc.push_back(tr.soc[k - l]);
        s.Q.push_back(tr.Q[k - l]);
        s.T_out.push_back(tr.T_out[k - l]);
      }
      s.target = tr.Q_tol[k];
      d.samples.push_back(std::move(s));
    }
  }
  return d;
}

struct DatasetSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Contiguous chronological blocks in the ratio train:validation:test.
/// Block sizes are floor(N r_i / sum r) for the first two; the rest is test.
inline DatasetSplits split_dataset(const Dataset& d, double r_train = 6, double r_val = 2, double r_test = 4) {
  if (r_train < 0 || r_val < 0 || r_test < 0 || !(r_train + r_val + r_test > 0))
    throw Error("split_dataset: ratios must be nonnegative with a positive sum");
  const double total = r_train + r_val + r_test;
  const std::size_t N = d.size();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(N) * r_train / total + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(N) * r_val / total + 1e-9));
  DatasetSplits s;
  for (Dataset* part : {&s.train, &s.validation, &s.test}) part->lags = d.lags;
  s.train.name = d.name + ":train";
  s.validation.name = d.name + ":validation";
  s.test.name = d.name + ":test";
  const auto b = d.samples.begin();
  s.train.samples.assign(b, b + static_cast<std::ptrdiff_t>(n_train));
  s.validation.samples.assign(b + static_cast<std::ptrdiff_t>(n_train), b + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.samples.assign(b + static_cast<std::ptrdiff_t>(n_train + n_val), d.samples.end());
  return s;
}

/// Round-robin concatenation of equal-length segments, one from each source
/// per round, until the shortest source is exhausted.
inline Dataset mixture_dataset(const std::vector<Dataset>& sources, std::size_t segment, std::string name = "mixture") {
  if (sources.empty()) throw Error("mixture_dataset: no sources");
  if (segment == 0) throw Error("mixture_dataset: segment length must be positive");
  std::size_t shortest = std::numeric_limits<std::size_t>::max();
  for (const auto& s : sources) {
    if (s.lags != sources.front().lags) throw Error("mixture_dataset: sources use different look-back windows");
    shortest = std::min(shortest, s.size());
  }
  Dataset d;
  d.name = std::move(name);
  d.lags = sources.front().lags;
  const std::size_t rounds = shortest / segment;
  for (std::size_t r = 0; r < rounds; ++r)
    for (const auto& s : sources) {
      const auto b = s.samples.begin() + static_cast<std::ptrdiff_t>(r * segment);
      d.samples.insert(d.samples.end(), b, b + static_cast<std::ptrdiff_t>(segment));
    }
  return d;
}

// ---------------------------------------------------------------------------
// Features

struct FeatureSpec {
  std::size_t lags = 1;
  bool interactions = true;  // Q(k-l) * T_out(k-l); affine in Q because T_out is data
  bool squares = true;       // Q(k)^2
  bool soc_q = true;         // soc(k) * Q(k)

  /// Subset whose features are affine in the decision variables (soc, Q).
  FeatureSpec decision_affine() const {
    FeatureSpec f = *this;
    f.squares = false;
    f.soc_q = false;
    return f;
  }
  bool operator==(const FeatureSpec&) const = default;
};

inline std::vector<std::string> feature_names(const FeatureSpec& f) {
  std::vector<std::string> names;
  auto lag = [](std::size_t l) { return l == 0 ? std::string("[k]") : "[k-" + std::to_string(l) + "]"; };
  for (std::size_t l = 0; l <= f.lags; ++l) {
    names.push_back("soc" + lag(l));
    names.push_back("Q" + lag(l));
    names.push_back("T_out" + lag(l));
    if (f.interactions) names.push_back("Q*T_out" + lag(l));
  }
  if (f.squares) names.push_back("Q^2[k]");
  if (f.soc_q) names.push_back("soc*Q[k]");
  return names;
}

inline std::size_t feature_count(const FeatureSpec& f) { return feature_names(f).size(); }

inline Vec expand_features(const SampleRecord& s, const FeatureSpec& f) {
  if (s.soc.size() != f.lags + 1 || s.Q.size() != f.lags + 1 || s.T_out.size() != f.lags + 1)
    throw Error("expand_features: window length does not match the look-back " + std::to_string(f.lags));
  Vec x(static_cast<Eigen::Index>(feature_count(f)));
  Eigen::Index j = 0;
  for (std::size_t l = 0; l <= f.lags; ++l) {
    x[j++] = s.soc[l];
    x[j++] = s.Q[l];
    x[j++] = s.T_out[l];
    if (f.interactions) x[j++] = s.Q[l] * s.T_out[l];
  }
  if (f.squares) x[j++] = s.Q[0] * s.Q[0];
  if (f.soc_q) x[j++] = s.soc[0] * s.Q[0];
  return x;
}

// ---------------------------------------------------------------------------
// Model

struct SurrogateModel {
  FeatureSpec features;
  Vec coef;
  double intercept = 0.0;
  // training metadata
  std::string dataset;
  std::size_t samples = 0;
  double relative_damping = 0.0;
  Eigen::Index rank = 0;  // numerical rank of the undamped design
};

inline double predict(const SurrogateModel& m, const SampleRecord& window) {
  return m.intercept + m.coef.dot(expand_features(window, m.features));
}

inline std::vector<double> predict_all(const SurrogateModel& m, const Dataset& d) {
  std::vector<double> out;
  out.reserve(d.size());
  for (const auto& s : d.samples) out.push_back(predict(m, s));
  return out;
}

struct FitOptions {
  double relative_damping = 1e-8;
  bool require_sample_ratio = true;  // at least ten samples per feature
};

/// Ridge least squares with an unpenalised intercept. Columns are equilibrated
/// to unit norm before damping, so lambda = relative_damping * trace / p
/// acts on every feature alike regardless of its raw scale; the raw features
/// themselves are never normalised.
inline SurrogateModel fit(const Dataset& d, const FeatureSpec& f, const FitOptions& opt = {}) {
  if (d.lags != f.lags) throw Error("fit: dataset look-back differs from the feature spec");
  const auto N = static_cast<Eigen::Index>(d.size());
  const auto p = static_cast<Eigen::Index>(feature_count(f));
  if (N == 0) throw Error("fit: empty dataset");
  if (opt.require_sample_ratio && N < 10 * (p + 1))
    throw Error("fit: " + std::to_string(N) + " samples for " + std::to_string(p + 1) +
                " parameters; need at least ten per parameter");
  Mat X(N, p);
  Vec y(N);
  for (Eigen::Index r = 0; r < N; ++r) {
    X.row(r) = expand_features(d.samples[static_cast<std::size_t>(r)], f).transpose();
    y[r] = d.samples[static_cast<std::size_t>(r)].target;
  }
  const Vec mean_x = X.colwise().mean();
  const double mean_y = y.mean();
  Mat Xc = X.rowwise() - mean_x.transpose();
  Vec scale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double nrm = Xc.col(j).norm();
    scale[j] = nrm > 0.0 ? nrm : 1.0;
    Xc.col(j) /= scale[j];
  }
  const Vec yc = (y.array() - mean_y).matrix();
  const double trace = Xc.squaredNorm();
  const double lambda = opt.relative_damping * trace / static_cast<double>(p);
  Mat Aug(N + p, p);
  Aug << Xc, std::sqrt(lambda) * Mat::Identity(p, p);
  Vec rhs = Vec::Zero(N + p);
  rhs.head(N) = yc;
  Eigen::ColPivHouseholderQR<Mat> qr(Aug);
  const Vec beta_scaled = qr.solve(rhs);
  SurrogateModel m;
  m.features = f;
  m.coef = beta_scaled.cwiseQuotient(scale);
  m.intercept = mean_y - m.coef.dot(mean_x);
  m.dataset = d.name;
  m.samples = d.size();
  m.relative_damping = opt.relative_damping;
  m.rank = Eigen::ColPivHouseholderQR<Mat>(Xc).rank();
  if (!m.coef.allFinite() || !std::isfinite(m.intercept))
    throw Error("fit: non-finite coefficients (design rank " + std::to_string(m.rank) + ", damping " +
                std::to_string(lambda) + ")");
  return m;
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricReport {
  double MAPE = 0.0;  // percent
  double RMSE = 0.0;
  double MAE = 0.0;
  double RSE = 0.0;   // percent; NaN for a constant target
  double RAE = 0.0;   // percent; NaN for a constant target
  double Corr = 0.0;  // NaN when either series is constant
  std::size_t samples = 0;
  std::size_t mape_excluded = 0;  // |y| < 1e-9
  double nonnegative_fraction = 0.0;
};

inline MetricReport compute_metrics(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.empty() || y.size() != yhat.size()) throw Error("compute_metrics: empty or mismatched series");
  const auto N = static_cast<double>(y.size());
  MetricReport r;
  r.samples = y.size();
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / N;
  const double hbar = std::accumulate(yhat.begin(), yhat.end(), 0.0) / N;
  double se = 0, ae = 0, ape = 0, sty = 0, aty = 0, cov = 0, vy = 0, vh = 0;
  std::size_t n_ape = 0, nonneg = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = yhat[i] - y[i];
    se += e * e;
    ae += std::abs(e);
    if (std::abs(y[i]) >= 1e-9) {
      ape += std::abs(e / y[i]);
      ++n_ape;
    } else {
      ++r.mape_excluded;
    }
    sty += (y[i] - ybar) * (y[i] - ybar);
    aty += std::abs(y[i] - ybar);
    cov += (y[i] - ybar) * (yhat[i] - hbar);
    vy += (y[i] - ybar) * (y[i] - ybar);
    vh += (yhat[i] - hbar) * (yhat[i] - hbar);
    if (yhat[i] >= 0.0) ++nonneg;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.MAPE = n_ape ? 100.0 * ape / static_cast<double>(n_ape) : nan;
  r.RMSE = std::sqrt(se / N);
  r.MAE = ae / N;
  r.RSE = sty > 0 ? 100.0 * se / sty : nan;
  r.RAE = aty > 0 ? 100.0 * ae / aty : nan;
  r.Corr = (vy > 0 && vh > 0) ? cov / std::sqrt(vy * vh) : nan;
  r.nonnegative_fraction = static_cast<double>(nonneg) / N;
  return r;
}

inline MetricReport evaluate(const SurrogateModel& m, const Dataset& d) {
  if (d.size() == 0) throw Error("evaluate: empty dataset");
  std::vector<double> y;
  y.reserve(d.size());
  for (const auto& s : d.samples) y.push_back(s.target);
  return compute_metrics(y, predict_all(m, d));
}

/// Picks the damping from a fixed grid by validation RMSE, then refits.
inline SurrogateModel fit_with_validation(const Dataset& train, const Dataset& validation, const FeatureSpec& f,
                                          const std::vector<double>& grid = {1e-10, 1e-8, 1e-6, 1e-4}) {
  if (grid.empty()) throw Error("fit_with_validation: empty damping grid");
  SurrogateModel best;
  double best_rmse = std::numeric_limits<double>::infinity();
  for (double g : grid) {
    FitOptions o;
    o.relative_damping = g;
    SurrogateModel m = fit(train, f, o);
    const double rmse = validation.size() ? evaluate(m, validation).RMSE : 0.0;
    if (rmse < best_rmse) {
      best_rmse = rmse;
      best = std::move(m);
    }
  }
  return best;
}

}  // namespace vbflex
