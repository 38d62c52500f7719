#include <gtest/gtest.h>

#include <random>

#include "gnssfl/train.hpp"

using namespace gnssfl;

namespace {

// Windows over `n_traces` random-feature traces; target = f(last timestep).
WindowSet synthetic_windows(std::size_t n_traces, std::size_t len, std::uint64_t seed, bool learnable,
                            std::size_t window = 5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  WindowSet w(window);
  for (std::size_t t = 0; t < n_traces; ++t) {
    std::vector<FeatureVector> f(len);
    std::vector<double> y(len);
    for (std::size_t i = 0; i < len; ++i) {
      for (auto& x : f[i]) x = u(rng);
      y[i] = learnable ? 0.2 + 0.6 * f[i][4] : 0.3;
    }
    append_windows(w, f, y, static_cast<std::int64_t>(t));
  }
  return w;
}

TrainConfig quick_config(std::size_t epochs) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.base_learning_rate = 3e-3;
  c.batch_size = 32;
  c.rng_seed = 5;
  return c;
}

}  // namespace

TEST(LrScale, ClampedRatio) {
  EXPECT_EQ(lr_scale_rule(100, 100), 1.0);
  EXPECT_EQ(lr_scale_rule(10, 100), 0.5);
  EXPECT_EQ(lr_scale_rule(1000, 100), 2.0);
  EXPECT_DOUBLE_EQ(lr_scale_rule(150, 100), 1.5);
  EXPECT_EQ(lr_scale_rule(150, 0), 1.0);
}

TEST(EarlyStoppingRule, StrictImprovementByMinDelta) {
  EarlyStopping s(3, 1e-6);
  EXPECT_TRUE(s.observe(1.0));
  EXPECT_FALSE(s.observe(1.0 - 5e-7));
  EXPECT_TRUE(s.observe(0.5));
  EXPECT_FALSE(s.should_stop());
  s.observe(0.6);
  s.observe(0.6);
  EXPECT_FALSE(s.should_stop());
  s.observe(0.6);
  EXPECT_TRUE(s.should_stop());
}

TEST(Adam, ClipGlobalNorm) {
  std::vector<float> g{3.f, 4.f};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 5.0), 5.0);
  EXPECT_EQ(g[0], 3.f);
  std::vector<float> h{30.f, 40.f};
  clip_global_norm(h, 5.0);
  EXPECT_NEAR(h[0], 3.f, 1e-6);
  EXPECT_NEAR(h[1], 4.f, 1e-6);
}

TEST(Split, LastTwentyPercentOfEachTrace) {
  const auto w = synthetic_windows(3, 14, 1, false);  // 10 windows per trace
  const auto s = split_validation(w, 0.2);
  EXPECT_EQ(s.train.size(), 24u);
  EXPECT_EQ(s.validation.size(), 6u);
  for (std::size_t i = 0; i < s.validation.size(); ++i) EXPECT_GE(s.validation.last_sample[i], 12u);
  for (std::size_t i = 0; i < s.train.size(); ++i) EXPECT_LT(s.train.last_sample[i], 12u);
}

TEST(Split, TooSmallDatasetIsAnError) {
  const auto w = synthetic_windows(1, 6, 1, false);  // 2 windows, 0.4 rounds to no validation
  EXPECT_THROW(split_validation(w, 0.2), DataError);
  EXPECT_THROW(train_local(init_params<float>(1, {36, 4}), w, quick_config(1)), DataError);
}

TEST(Train, ConstantTargetConverges) {
  const auto w = synthetic_windows(4, 60, 2, false);
  auto cfg = quick_config(60);
  const auto r = train_local(init_params<float>(3, {36, 16}), w, cfg);
  for (double p : predict(r.params, w)) EXPECT_NEAR(p, 0.3, 0.05);
}

TEST(Train, PlateauStopsExactlyPatienceLater) {
  const auto w = synthetic_windows(2, 30, 3, true);
  for (std::size_t k : {1u, 4u, 9u}) {
    TrainConfig cfg = quick_config(200);
    TrainHooks hooks;
    hooks.validation_override = [k](std::size_t epoch, double) { return epoch <= k ? 1.0 / double(epoch) : 1.0 / double(k); };
    const auto r = train_local(init_params<float>(1, {36, 4}), w, cfg, hooks);
    EXPECT_EQ(r.report.epochs_run, k + 20) << "plateau after epoch " << k;
    EXPECT_EQ(r.report.best_epoch, k);
    EXPECT_EQ(r.report.loss_curve.size(), k + 20);
  }
}

TEST(Train, MaxEpochsBoundsTheRun) {
  const auto w = synthetic_windows(2, 30, 3, true);
  const auto r = train_local(init_params<float>(1, {36, 4}), w, quick_config(3));
  EXPECT_EQ(r.report.epochs_run, 3u);
  EXPECT_EQ(r.report.best_validation_loss,
            *std::min_element(r.report.loss_curve.begin(), r.report.loss_curve.end()));
}

TEST(Train, DeterministicPerSeed) {
  const auto w = synthetic_windows(3, 40, 4, true);
  const auto init = init_params<float>(7, {36, 8});
  const auto a = train_local(init, w, quick_config(4));
  const auto b = train_local(init, w, quick_config(4));
  EXPECT_EQ(a.params.values, b.params.values);
  EXPECT_EQ(a.report.loss_curve, b.report.loss_curve);
  auto other = quick_config(4);
  other.rng_seed = 99;
  EXPECT_NE(train_local(init, w, other).params.values, a.params.values);
}

TEST(Train, TrainingLossDecreasesOnLearnableData) {
  const auto w = synthetic_windows(6, 60, 5, true);
  auto cfg = quick_config(30);
  cfg.early_stop_patience = 1000;
  const auto r = train_local(init_params<float>(2, {36, 16}), w, cfg);
  const auto& c = r.report.train_curve;
  ASSERT_EQ(c.size(), 30u);
  const double first = (c[0] + c[1] + c[2] + c[3] + c[4]) / 5;
  const double last = (c[25] + c[26] + c[27] + c[28] + c[29]) / 5;
  EXPECT_GT(first, last);
  for (float v : r.params.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(Train, RejectsInvalidConfig) {
  const auto w = synthetic_windows(2, 30, 3, true);
  auto cfg = quick_config(1);
  cfg.batch_size = 0;
  EXPECT_THROW(train_local(init_params<float>(1, {36, 4}), w, cfg), ConfigError);
}
