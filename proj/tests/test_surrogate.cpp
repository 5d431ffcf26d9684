#include <gtest/gtest.h>

#include <cmath>

#include "vbflex/experiment.hpp"
#include "vbflex/surrogate.hpp"

using namespace vbflex;

namespace {

SampleRecord window(Rng& rng, std::size_t L) {
  SampleRecord s;
  for (std::size_t l = 0; l <= L; ++l) {
    s.soc.push_back(rng.uniform(-1.0, 1.0));
    s.Q.push_back(rng.uniform(0.0, 25000.0));
    s.T_out.push_back(rng.uniform(24.0, 36.0));
  }
  return s;
}

// Dataset whose target is an exact function of the features (no noise).
Dataset exact_dataset(const FeatureSpec& f, const Vec& coef, double intercept, std::size_t N, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.lags = f.lags;
  for (std::size_t i = 0; i < N; ++i) {
    SampleRecord s = window(rng, f.lags);
    s.target = intercept + expand_features(s, f).dot(coef);
    s.step = i;
    d.samples.push_back(s);
  }
  return d;
}

// Pearson correlation, written out independently of compute_metrics.
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

Trajectory tiny_trajectory(std::size_t K, double offset) {
  Trajectory tr;
  for (std::size_t k = 0; k < K; ++k) {
    tr.Q.push_back(offset + static_cast<double>(k));
    tr.Q_tol.push_back(10.0 * (offset + static_cast<double>(k)));
    tr.T_out.push_back(30.0 + static_cast<double>(k));
  }
  for (std::size_t k = 0; k <= K; ++k) tr.soc.push_back(0.01 * static_cast<double>(k));
  return tr;
}

}  // namespace

TEST(Features, NamesAndCounts) {
  FeatureSpec f;
  EXPECT_EQ(feature_count(f), 10u);
  EXPECT_EQ(feature_names(f).front(), "soc[k]");
  EXPECT_EQ(feature_names(f)[5], "Q[k-1]");
  EXPECT_EQ(feature_names(f).back(), "soc*Q[k]");
  const FeatureSpec a = f.decision_affine();
  EXPECT_EQ(feature_count(a), 8u);
  EXPECT_FALSE(a.squares);
  EXPECT_FALSE(a.soc_q);
  FeatureSpec three;
  three.lags = 2;
  three.interactions = false;
  three.squares = false;
  three.soc_q = false;
  EXPECT_EQ(feature_count(three), 9u);
}

TEST(Features, ExpandByHand) {
  SampleRecord s;
  s.soc = {0.5, -0.25};
  s.Q = {1000.0, 2000.0};
  s.T_out = {30.0, 31.0};
  const Vec x = expand_features(s, FeatureSpec{});
  const Vec expect = (Vec(10) << 0.5, 1000.0, 30.0, 30000.0, -0.25, 2000.0, 31.0, 62000.0, 1e6, 500.0).finished();
  EXPECT_EQ(x, expect);
  SampleRecord short_window = s;
  short_window.Q.pop_back();
  EXPECT_THROW(expand_features(short_window, FeatureSpec{}), Error);
}

TEST(Dataset, WindowsFollowTrajectory) {
  SimulationRun r;
  r.trajectory = tiny_trajectory(6, 100.0);
  const Dataset d = build_dataset({r, r}, 2, "toy");
  ASSERT_EQ(d.size(), 8u);  // (6 - 2) per run
  const SampleRecord& s = d.samples[1];
  EXPECT_EQ(s.step, 3u);
  EXPECT_EQ(s.Q, (std::vector<double>{103.0, 102.0, 101.0}));
  EXPECT_EQ(s.T_out, (std::vector<double>{33.0, 32.0, 31.0}));
  EXPECT_DOUBLE_EQ(s.soc[0], 0.03);
  EXPECT_DOUBLE_EQ(s.target, 1030.0);
  EXPECT_EQ(d.samples[4].run, 1u);
  EXPECT_THROW(build_dataset({r}, 6), Error);
}

TEST(Dataset, SplitSizesAreFloorOfRatios) {
  for (std::size_t N : {0u, 1u, 11u, 12u, 100u, 1001u}) {
    Dataset d;
    for (std::size_t i = 0; i < N; ++i) {
      SampleRecord s;
      s.step = i;
      d.samples.push_back(s);
    }
    const DatasetSplits sp = split_dataset(d);
    EXPECT_EQ(sp.train.size(), N * 6 / 12) << N;
    EXPECT_EQ(sp.validation.size(), N * 2 / 12) << N;
    EXPECT_EQ(sp.train.size() + sp.validation.size() + sp.test.size(), N);
    // Contiguous and chronological.
    std::size_t expect = 0;
    for (const Dataset* part : {&sp.train, &sp.validation, &sp.test})
      for (const auto& s : part->samples) EXPECT_EQ(s.step, expect++);
  }
  EXPECT_THROW(split_dataset(Dataset{}, -1, 1, 1), Error);
}

TEST(Dataset, MixtureInterleavesSegments) {
  std::vector<Dataset> src(3);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < 10 + j; ++i) {
      SampleRecord s;
      s.run = j;
      s.step = i;
      src[j].samples.push_back(s);
    }
  const Dataset m = mixture_dataset(src, 4);
  ASSERT_EQ(m.size(), 24u);  // two rounds of three segments
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(m.samples[i].run, (i / 4) % 3);
    EXPECT_EQ(m.samples[i].step, (i / 12) * 4 + i % 4);
  }
  EXPECT_THROW(mixture_dataset(src, 0), Error);
}

TEST(Fit, RecoversExactModel) {
  for (const FeatureSpec f : {FeatureSpec{}, FeatureSpec{}.decision_affine()}) {
    Rng rng(21);
    Vec coef(static_cast<Eigen::Index>(feature_count(f)));
    for (Eigen::Index j = 0; j < coef.size(); ++j) coef[j] = rng.uniform(-2.0, 2.0);
    const Dataset d = exact_dataset(f, coef, 1.5e5, 400, 4);
    FitOptions o;
    o.relative_damping = 0.0;
    const SurrogateModel m = fit(d, f, o);
    EXPECT_LT((m.coef - coef).cwiseAbs().maxCoeff() / coef.cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(m.intercept, 1.5e5, 1e-3 * 1.5e5);
    const Dataset fresh = exact_dataset(f, coef, 1.5e5, 50, 9);
    const MetricReport r = evaluate(m, fresh);
    EXPECT_LT(r.MAPE, 1e-6);
  }
}

TEST(Fit, DampingKeepsDuplicateColumnsFinite) {
  // soc == T_out - 30 in every sample: two identical directions.
  Rng rng(3);
  Dataset d;
  for (std::size_t i = 0; i < 200; ++i) {
    SampleRecord s = window(rng, 1);
    for (std::size_t l = 0; l < 2; ++l) s.soc[l] = s.T_out[l] - 30.0;
    s.target = 2.0 * s.Q[0] + 1000.0 * s.T_out[0];
    d.samples.push_back(s);
  }
  const FeatureSpec f = FeatureSpec{}.decision_affine();
  const SurrogateModel m = fit(d, f);
  EXPECT_TRUE(m.coef.allFinite());
  EXPECT_LT(m.rank, static_cast<Eigen::Index>(feature_count(f)));
  EXPECT_LT(evaluate(m, d).MAPE, 1e-3);
}

TEST(Fit, RejectsTooFewSamples) {
  Rng rng(1);
  const FeatureSpec f;
  const Dataset d = exact_dataset(f, Vec::Ones(static_cast<Eigen::Index>(feature_count(f))), 0.0, 20, 2);
  EXPECT_THROW(fit(d, f), Error);
  FitOptions o;
  o.require_sample_ratio = false;
  EXPECT_NO_THROW(fit(d, f, o));
}

TEST(Metrics, HandValues) {
  const std::vector<double> y = {1, 2, 3, 4};
  const std::vector<double> yh = {1, 2, 3, 5};
  const MetricReport r = compute_metrics(y, yh);
  EXPECT_DOUBLE_EQ(r.MAPE, 6.25);
  EXPECT_DOUBLE_EQ(r.RMSE, 0.5);
  EXPECT_DOUBLE_EQ(r.MAE, 0.25);
  EXPECT_DOUBLE_EQ(r.RSE, 100.0 * 1.0 / 5.0);
  EXPECT_DOUBLE_EQ(r.RAE, 100.0 * 1.0 / 4.0);
  EXPECT_NEAR(r.Corr, pearson(y, yh), 1e-14);
  const MetricReport z = compute_metrics({0.0, 2.0}, {1.0, 2.0});
  EXPECT_EQ(z.mape_excluded, 1u);
  EXPECT_DOUBLE_EQ(z.MAPE, 0.0);
  EXPECT_TRUE(std::isnan(compute_metrics({1.0, 1.0}, {1.0, 2.0}).Corr));
  EXPECT_THROW(compute_metrics({}, {}), Error);
}

TEST(Metrics, PerfectPredictionIsPerfect) {
  const std::vector<double> y = {3, 1, 4, 1, 5, 9, 2, 6};
  const MetricReport r = compute_metrics(y, y);
  EXPECT_EQ(r.MAPE, 0.0);
  EXPECT_EQ(r.RMSE, 0.0);
  EXPECT_NEAR(r.Corr, 1.0, 1e-15);
}

TEST(Pipeline, SimulatedDataFitsWell) {
  // Reduced version of the training pipeline: 20 days per policy.
  ScenarioConfig cfg = default_config();
  cfg.surrogate.days_per_policy = 20;
  const Building b(cfg.building);
  const SurrogateSuite s = train_surrogates(cfg, b, 5);
  ASSERT_EQ(s.data.names.size(), 3u);
  EXPECT_EQ(s.data.mixture.train.size() + s.data.mixture.validation.size() + s.data.mixture.test.size(),
            3 * (s.data.datasets[0].size() / cfg.surrogate.segment) * cfg.surrogate.segment);
  const MetricReport r = evaluate(s.affine, s.data.mixture.test);
  EXPECT_LT(r.MAPE, 15.0);
  EXPECT_GT(r.Corr, 0.97);
  EXPECT_EQ(s.matrix.size(), 2u * 16u);
  // A model only ever predicts from its own features.
  EXPECT_EQ(s.affine.features, cfg.surrogate.features.decision_affine());
}

TEST(Pipeline, ValidationPicksFromGrid) {
  FeatureSpec f = FeatureSpec{}.decision_affine();
  Rng rng(8);
  Vec coef(static_cast<Eigen::Index>(feature_count(f)));
  for (Eigen::Index j = 0; j < coef.size(); ++j) coef[j] = rng.uniform(-1.0, 1.0);
  const Dataset tr = exact_dataset(f, coef, 10.0, 300, 1);
  const Dataset va = exact_dataset(f, coef, 10.0, 100, 2);
  const SurrogateModel m = fit_with_validation(tr, va, f, {1e-2, 1e-10});
  EXPECT_EQ(m.relative_damping, 1e-10);
}
