#include <gtest/gtest.h>

#include <random>

#include "gnssfl/labels.hpp"
#include "gnssfl/simgen.hpp"

using namespace gnssfl;

namespace {

// A stationary trace whose GNSS fixes sit `dev[i]` meters east of the fused position.
std::pair<Trace, std::vector<FusedEstimate>> with_deviations(const std::vector<double>& dev) {
  Trace tr{1, 1, {}};
  std::vector<FusedEstimate> fused;
  const LocalFrame f({69.27, 15.96});
  for (std::size_t i = 0; i < dev.size(); ++i) {
    PlatformSample s;
    s.platform_id = 1;
    s.trace_id = 1;
    s.t = static_cast<double>(i);
    s.p_net = s.p_true = f.anchor();
    s.p_gnss = f.to_geo({dev[i], 0.0});
    tr.samples.push_back(s);
    fused.push_back({f.anchor(), {20.0, 20.0}});
  }
  return {tr, fused};
}

}  // namespace

TEST(Labels, ZeroDeviationGivesZeroLabels) {
  const auto [tr, fused] = with_deviations(std::vector<double>(15, 0.0));
  for (double y : generate_labels(tr, fused).values) EXPECT_EQ(y, 0.0);
}

TEST(Labels, SingleSpoofedSampleOfTwenty) {
  // P95 of nineteen zeros and one 100 = 0 + 0.05 * 100 = 5 m; the spike caps
  // to 5 and scales to 1, the zeros to 0.
  std::vector<double> dev(20, 0.0);
  dev[13] = 100.0;
  const auto [tr, fused] = with_deviations(dev);
  const auto labels = generate_labels(tr, fused);
  EXPECT_NEAR(labels.cap_value(), 5.0, 1e-6);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(labels.values[i], i == 13 ? 1.0 : 0.0) << i;
}

TEST(Labels, InvariantUnderUniformScaling) {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(0.1);
  std::vector<double> dev(60);
  for (auto& d : dev) d = e(rng);
  auto scaled = dev;
  for (auto& d : scaled) d *= 3.0;
  const auto [a_tr, a_f] = with_deviations(dev);
  const auto [b_tr, b_f] = with_deviations(scaled);
  const auto a = generate_labels(a_tr, a_f), b = generate_labels(b_tr, b_f);
  for (std::size_t i = 0; i < dev.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-6);
}

TEST(Labels, MonotoneBelowCap) {
  std::vector<double> dev;
  for (int i = 0; i < 40; ++i) dev.push_back(0.5 * i + (i % 3) * 0.1);
  const auto [tr, fused] = with_deviations(dev);
  const auto l = generate_labels(tr, fused);
  const auto d = gnss_deviation_m(tr, fused);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_GE(l.values[i], 0.0);
    EXPECT_LE(l.values[i], 1.0);
    for (std::size_t j = 0; j < d.size(); ++j)
      if (d[i] < d[j] && d[j] < l.cap_value()) EXPECT_LT(l.values[i], l.values[j]);
  }
}

TEST(Labels, IgnoreOracleFields) {
  SimConfig sc;
  sc.n_traces = 3;
  sc.trace_duration_s = 300;
  auto traces = generate_dataset(sc);
  std::vector<std::vector<FusedEstimate>> fused;
  for (const auto& t : traces) fused.push_back(fuse_trace(t, {}));
  const auto before = generate_labels(traces, fused);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& t : traces)
    for (auto& s : t.samples) {
      s.p_true = {s.p_true.lat + u(rng), s.p_true.lon + u(rng)};
      s.attacked = !s.attacked;
    }
  std::vector<std::vector<FusedEstimate>> fused2;
  for (const auto& t : traces) fused2.push_back(fuse_trace(t, {}));
  const auto after = generate_labels(traces, fused2);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t k = 0; k < before.size(); ++k) EXPECT_EQ(before[k].values, after[k].values);
}

TEST(Labels, PooledScalingSharedAcrossTraces) {
  const auto [t1, f1] = with_deviations({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto [t2, f2] = with_deviations({0, 10, 20, 30, 40, 50, 60, 70, 80, 90});
  const std::vector<Trace> traces{t1, t2};
  const std::vector<std::vector<FusedEstimate>> fused{f1, f2};
  const auto labels = generate_labels(traces, fused);
  EXPECT_EQ(labels[0].scaler, labels[1].scaler);
  // The small-deviation trace stays small under the pooled scale.
  EXPECT_LT(labels[0].values.back(), 0.15);
  EXPECT_EQ(labels[1].values.back(), 1.0);
}
