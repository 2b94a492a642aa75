#include "stp/ski.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "test_util.hpp"

namespace stp {
namespace {

SkiConfig small_cfg(int m = 128, int r = 32) {
  SkiConfig cfg;
  cfg.grid_size = m;
  cfg.max_rank = r;
  cfg.refresh_every = 0;  // keep params fixed unless a test refreshes
  return cfg;
}

TEST(InterpWeights, GridPointIdentity) {
  const int m = 16;
  for (int j : {0, 1, 7, 14, 15}) {
    double x = 24.0 * j / (m - 1);
    InterpWeights w = interpolation_weights(0.0, 24.0, m, x);
    // accumulate per grid index; boundary stencils fold onto edge points
    std::map<int, double> acc;
    for (int k = 0; k < 4; ++k) acc[w.index[k]] += w.weight[k];
    double sum = 0.0;
    for (const auto& [idx, wt] : acc) {
      sum += wt;
      EXPECT_NEAR(wt, idx == j ? 1.0 : 0.0, 1e-12);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(InterpWeights, PartitionOfUnity) {
  Rng rng(1);
  for (int i = 0; i < 300; ++i) {
    double x = rng.uniform(0.0, 24.0);
    InterpWeights w = interpolation_weights(0.0, 24.0, 128, x);
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) sum += w.weight[k];
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(InterpWeights, SmallGridRejected) {
  EXPECT_THROW(interpolation_weights(0.0, 24.0, 3, 1.0),
               std::invalid_argument);
}

TEST(InterpWeights, OutOfHullClamped) {
  bool clamped = false;
  InterpWeights w = interpolation_weights(0.0, 24.0, 16, 25.5, &clamped);
  EXPECT_TRUE(clamped);
  double sum = 0.0;
  for (int k = 0; k < 4; ++k) sum += w.weight[k];
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(InterpWeights, KernelReconstruction) {
  const int m = 128;
  const double h = 24.0 / (m - 1);
  Eigen::VectorXd grid(m);
  for (int i = 0; i < m; ++i) grid(i) = i * h;

  auto max_err = [&](double length) {
    KernelParams p{1.0, length, 1e-12};
    int j = m / 2;
    double worst = 0.0;
    for (int s = 0; s < 1500; ++s) {
      double x = 2.0 * h + (24.0 - 4.0 * h) * s / 1499.0;
      InterpWeights w = interpolation_weights(0.0, 24.0, m, x);
      double approx = 0.0;
      for (int k = 0; k < 4; ++k) {
        approx += w.weight[k] * kernel_eval(p, grid(w.index[k]), grid(j));
      }
      worst = std::max(worst, std::abs(approx - kernel_eval(p, x, grid(j))));
    }
    return worst;
  };
  EXPECT_LT(max_err(2.0 * h), 4.5e-3);
  EXPECT_LT(max_err(3.0 * h), 1e-3);
  EXPECT_LT(max_err(8.0 * h), 1e-4);
}

// Data restricted to inducing points with rank below the cap: the SKI
// machinery is exact, so it must agree with the dense GP.
TEST(SkiModel, OnGridMatchesDensePosterior) {
  KernelParams p{900.0, 2.0, 100.0};
  SkiModel model(small_cfg(), p);
  const Eigen::VectorXd& grid = model.grid();

  Rng rng(2);
  std::vector<int> support;
  for (int i = 10; i < 128; i += 6) support.push_back(i);  // 20 points
  ASSERT_LE(static_cast<int>(support.size()), 32);

  const int n = 200;
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = grid(support[rng.below(support.size())]);
  }
  y = testing::sample_gp(p, x, 640.0, rng);
  for (int i = 0; i < n; ++i) model.update(x(i), y(i));

  double mean_range_lo = 1e300, mean_range_hi = -1e300;
  for (int j : support) {
    Gaussian want = testing::dense_posterior(p, x, y, grid(j));
    mean_range_lo = std::min(mean_range_lo, want.mean);
    mean_range_hi = std::max(mean_range_hi, want.mean);
  }
  for (int j : support) {
    Gaussian got = model.predict(grid(j));
    Gaussian want = testing::dense_posterior(p, x, y, grid(j));
    EXPECT_NEAR(got.mean, want.mean, 1e-6 * std::abs(want.mean));
    EXPECT_NEAR(got.var, want.var, 1e-6 * want.var);
  }
  EXPECT_GT(mean_range_hi, mean_range_lo);
}

TEST(SkiModel, OnGridMllMatchesDense) {
  KernelParams p{400.0, 1.5, 64.0};
  SkiModel model(small_cfg(), p);
  const Eigen::VectorXd& grid = model.grid();

  Rng rng(3);
  const int n = 150;
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = grid(8 + 5 * static_cast<int>(rng.below(24)));
  }
  y = testing::sample_gp(p, x, 520.0, rng);
  for (int i = 0; i < n; ++i) model.update(x(i), y(i));

  double got = model.mll();
  double want = testing::dense_mll(p, x, y);
  EXPECT_NEAR(got, want, 0.01 * std::abs(want));
}

TEST(SkiModel, SufficientStatisticsCommute) {
  KernelParams p{100.0, 2.0, 25.0};
  SkiModel a(small_cfg(32, 8), p);
  SkiModel b(small_cfg(32, 8), p);
  a.update(3.0, 500.0);
  a.update(17.5, 640.0);
  b.update(17.5, 640.0);
  b.update(3.0, 500.0);
  auto sa = a.snapshot();
  auto sb = b.snapshot();
  EXPECT_TRUE(sa.swy.isApprox(sb.swy, 1e-12));
  EXPECT_DOUBLE_EQ(sa.syy, sb.syy);
  EXPECT_DOUBLE_EQ(sa.sy, sb.sy);
  EXPECT_EQ(sa.n, sb.n);
}

TEST(SkiModel, MllInvariantToUpdateOrder) {
  KernelParams p{900.0, 2.0, 100.0};
  Rng rng(4);
  const int n = 25;  // below the rank cap: no truncation error
  std::vector<std::pair<double, double>> data;
  for (int i = 0; i < n; ++i) {
    data.emplace_back(rng.uniform(0.0, 24.0), rng.normal(600.0, 30.0));
  }
  SkiModel fwd(small_cfg(), p);
  for (const auto& [x, y] : data) fwd.update(x, y);
  std::reverse(data.begin(), data.end());
  SkiModel rev(small_cfg(), p);
  for (const auto& [x, y] : data) rev.update(x, y);

  EXPECT_NEAR(fwd.mll(), rev.mll(), 1e-8 * std::abs(fwd.mll()));
  for (double t : {1.0, 7.7, 13.2, 22.9}) {
    EXPECT_NEAR(fwd.predict(t).mean, rev.predict(t).mean,
                1e-7 * std::max(1.0, std::abs(fwd.predict(t).mean)));
  }
}

TEST(SkiModel, PriorBeforeAnyData) {
  KernelParams p{900.0, 2.0, 100.0};
  SkiModel model(small_cfg(), p);
  Gaussian g = model.predict(12.0);
  EXPECT_DOUBLE_EQ(g.mean, 0.0);
  EXPECT_NEAR(g.var, 900.0 + 100.0, 1.0);
}

TEST(SkiModel, RootTruncationQuality) {
  // scheduled-departure stream: observations cluster tightly around a dozen
  // slots, which is what per-edge time-of-day data looks like
  KernelParams p{900.0, 2.0, 100.0};
  SkiModel model(small_cfg(), p);
  Rng rng(5);
  const int n = 600;
  Eigen::MatrixXd wtw = Eigen::MatrixXd::Zero(128, 128);
  for (int i = 0; i < n; ++i) {
    double slot = 6.0 + 1.5 * static_cast<double>(rng.below(12));
    double x = std::clamp(slot + rng.normal(0.0, 1.0 / 60.0), 0.0, 24.0);
    double y = rng.normal(600.0, 30.0);
    model.update(x, y);
    InterpWeights w = model.weights_of(x);
    Eigen::VectorXd wv = Eigen::VectorXd::Zero(128);
    for (int k = 0; k < 4; ++k) wv(w.index[k]) += w.weight[k];
    wtw += wv * wv.transpose();
  }
  EXPECT_LE(model.root_error(wtw), 0.05);
}

TEST(SkiModel, VarianceNonNegativeUnderLoad) {
  KernelParams p{900.0, 2.0, 100.0};
  SkiModel model(small_cfg(), p);
  Rng rng(6);
  for (int i = 0; i < 10000; ++i) {
    model.update(rng.uniform(0.0, 24.0),
                 600.0 + 80.0 * std::sin(0.5 * i) + rng.normal(0.0, 10.0));
  }
  for (int i = 0; i < 10000; ++i) {
    Gaussian g = model.predict(rng.uniform(0.0, 24.0));
    EXPECT_GE(g.var, 0.0);
  }
}

TEST(SkiModel, RefreshImprovesMllMonotonically) {
  KernelParams truth{900.0, 2.0, 100.0};
  KernelParams wrong{200.0, 0.7, 400.0};
  SkiModel model(small_cfg(), wrong);
  Rng rng(7);
  const int n = 300;
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.uniform(0.0, 24.0);
  Eigen::VectorXd y = testing::sample_gp(truth, x, 600.0, rng);
  for (int i = 0; i < n; ++i) model.update(x(i), y(i));

  double prev = model.mll();
  for (int step = 0; step < 5; ++step) {
    model.refresh_hyperparameters(1);
    double cur = model.mll();
    EXPECT_GE(cur, prev - 1e-9);
    prev = cur;
  }
  EXPECT_GT(prev, testing::dense_mll(wrong, x, y) - 1.0);
}

TEST(SkiModel, SnapshotRestoreReproducesPredictions) {
  KernelParams p{400.0, 1.7, 81.0};
  SkiModel model(small_cfg(), p);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    model.update(rng.uniform(0.0, 24.0), rng.normal(550.0, 25.0));
  }
  SkiModel copy = SkiModel::restore(model.snapshot());
  for (double t : {0.0, 3.3, 11.8, 19.2, 24.0}) {
    Gaussian a = model.predict(t);
    Gaussian b = copy.predict(t);
    EXPECT_DOUBLE_EQ(a.mean, b.mean);
    EXPECT_DOUBLE_EQ(a.var, b.var);
  }
  EXPECT_DOUBLE_EQ(model.mll(), copy.mll());
}

// Off-grid stream: predictions track the dense GP over a query grid within
// a small fraction of the posterior mean's range.
TEST(SkiModel, OffGridStreamTracksDense) {
  KernelParams p{900.0, 2.0, 100.0};
  SkiModel model(small_cfg(), p);
  Rng rng(9);
  const int n = 400;
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.uniform(0.0, 24.0);
  Eigen::VectorXd y = testing::sample_gp(p, x, 620.0, rng);
  for (int i = 0; i < n; ++i) model.update(x(i), y(i));

  double lo = 1e300, hi = -1e300;
  std::vector<double> qs;
  for (int q = 0; q <= 200; ++q) qs.push_back(24.0 * q / 200.0);
  std::vector<double> want;
  for (double t : qs) {
    Gaussian d = testing::dense_posterior(p, x, y, t);
    want.push_back(d.mean);
    lo = std::min(lo, d.mean);
    hi = std::max(hi, d.mean);
  }
  double se = 0.0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    double diff = model.predict(qs[i]).mean - want[i];
    se += diff * diff;
  }
  double rmse = std::sqrt(se / qs.size());
  EXPECT_LE(rmse, 0.02 * (hi - lo));
}

}  // namespace
}  // namespace stp
