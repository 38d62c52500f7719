#include <gtest/gtest.h>

#include <random>

#include "gnssfl/eval.hpp"

using namespace gnssfl;

namespace {

// O(n^2) Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      if (s[i] > s[j])
        wins += 1.0;
      else if (s[i] == s[j])
        wins += 0.5;
    }
  }
  return wins / pairs;
}

struct Instance {
  std::vector<double> scores;
  std::vector<bool> truth;
};

Instance random_instance(std::mt19937_64& rng, std::size_t n, bool coarse) {
  std::uniform_real_distribution<double> u(0, 1);
  Instance in;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = i < 2 ? i == 0 : u(rng) < 0.3;
    double s = u(rng) + (pos ? 0.3 : 0.0);
    if (coarse) s = std::round(s * 8) / 8;  // forces ties
    in.scores.push_back(s);
    in.truth.push_back(pos);
  }
  return in;
}

}  // namespace

TEST(Roc, PerfectSeparation) {
  const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
  const std::vector<bool> y{true, true, false, false};
  const auto c = roc(s, y);
  EXPECT_NE(std::find(c.points.begin(), c.points.end(), RocPoint{0.0, 1.0}), c.points.end());
  EXPECT_DOUBLE_EQ(auc(c).value, 1.0);
}

TEST(Roc, ConstantScoresGiveHalf) {
  const std::vector<double> s(10, 0.3);
  std::vector<bool> y(10, false);
  y[1] = y[4] = y[7] = true;
  const auto c = roc(s, y);
  EXPECT_EQ(c.points.size(), 2u);
  EXPECT_DOUBLE_EQ(auc(c).value, 0.5);
}

TEST(Roc, SingleClassThrows) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<bool> y{false, false};
  EXPECT_THROW(roc(s, y), SingleClassError);
}

TEST(Roc, RandomFiftyPointInstanceMatchesPairwise) {
  std::mt19937_64 rng(50);
  const auto in = random_instance(rng, 50, false);
  EXPECT_NEAR(auc_of(in.scores, in.truth), pairwise_auc(in.scores, in.truth), 1e-9);
}

TEST(Roc, MonotoneWithEndpoints) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const auto in = random_instance(rng, 5 + rep * 7, rep % 2 == 0);
    const auto c = roc(in.scores, in.truth);
    EXPECT_EQ(c.points.front(), (RocPoint{0, 0}));
    EXPECT_DOUBLE_EQ(c.points.back().fpr, 1.0);
    EXPECT_DOUBLE_EQ(c.points.back().tpr, 1.0);
    for (std::size_t k = 1; k < c.points.size(); ++k) {
      EXPECT_GE(c.points[k].fpr, c.points[k - 1].fpr);
      EXPECT_GE(c.points[k].tpr, c.points[k - 1].tpr);
    }
  }
}

TEST(Roc, AucInvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    auto in = random_instance(rng, 200, rep % 3 == 0);
    const double a = auc_of(in.scores, in.truth);
    for (auto& s : in.scores) s = std::exp(3 * s) - 7;
    EXPECT_NEAR(auc_of(in.scores, in.truth), a, 1e-12);
  }
}

TEST(Roc, TrapezoidEqualsPairwiseUpTo500) {
  std::mt19937_64 rng(500);
  std::uniform_int_distribution<std::size_t> size(2, 500);
  for (int rep = 0; rep < 100; ++rep) {
    const auto in = random_instance(rng, size(rng), rep % 2 == 1);
    EXPECT_NEAR(auc_of(in.scores, in.truth), pairwise_auc(in.scores, in.truth), 1e-9);
  }
}

TEST(Evaluate, SingleClassSplitNamesTheSplit) {
  WindowSet w(1);
  FeatureVector fv{};
  w.push(fv, 0.f, 0, 0);
  w.push(fv, 0.f, 0, 1);
  const std::vector<bool> y{false, false};
  try {
    evaluate_model([](const WindowSet& ws) { return std::vector<double>(ws.size(), 0.0); }, w, y, "trace-holdout");
    FAIL() << "expected SingleClassError";
  } catch (const SingleClassError& e) {
    EXPECT_NE(std::string(e.what()).find("trace-holdout"), std::string::npos);
  }
}
