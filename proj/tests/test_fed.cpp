#include <gtest/gtest.h>

#include <random>
#include <set>

#include "gnssfl/fed.hpp"
#include "gnssfl/labels.hpp"
#include "privacy_contract.hpp"

using namespace gnssfl;

namespace {

const ModelLayout kSmall{36, 6};

RoundUpdate random_update(std::mt19937_64& rng, std::size_t client, std::size_t n, const ModelLayout& layout = kSmall) {
  std::normal_distribution<float> g(0.f, 1.f);
  RoundUpdate u{client, 3, LstmModelParams(layout), n};
  for (auto& v : u.params.values) v = g(rng);
  return u;
}

// Windows whose target is driven by feature `signal` of the last timestep.
WindowSet cluster_windows(std::size_t signal, std::size_t n_traces, std::uint64_t seed, double constant = -1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  WindowSet w(4);
  for (std::size_t t = 0; t < n_traces; ++t) {
    std::vector<FeatureVector> f(40);
    std::vector<double> y(40);
    for (std::size_t i = 0; i < f.size(); ++i) {
      for (auto& x : f[i]) x = u(rng);
      y[i] = constant >= 0 ? constant : (f[i][signal] > 0.5f ? 0.8 : 0.2);
    }
    append_windows(w, f, y, static_cast<std::int64_t>(seed * 100 + t));
  }
  return w;
}

ClientOptions options(std::uint64_t seed) {
  ClientOptions o;
  o.seed = seed;
  o.train.batch_size = 32;
  o.train.base_learning_rate = 5e-3;
  return o;
}

FederationConfig small_federation(std::size_t rounds, bool gate) {
  FederationConfig f;
  f.rounds = rounds;
  f.local_epochs = 2;
  f.gate_enabled = gate;
  f.warmup_rounds = 2;
  f.layout = kSmall;
  f.init_seed = 4;
  return f;
}

double pooled_auc(const LstmModelParams& p, const WindowSet& w) {
  std::vector<bool> truth(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) truth[i] = w.targets[i] >= 0.5f;
  return auc_of(predict(p, w), truth);
}

}  // namespace

// ---- FedAvg algebra ----

TEST(FedAvg, IdentityOnEqualInputs) {
  std::mt19937_64 rng(1);
  const auto base = random_update(rng, 0, 5);
  std::vector<RoundUpdate> ups;
  std::uniform_int_distribution<std::size_t> n(1, 10000);
  for (std::size_t k = 0; k < 7; ++k) ups.push_back({k, 3, base.params, n(rng)});
  EXPECT_EQ(fedavg(ups), base.params);
  EXPECT_EQ(fedavg(ups, Weighting::Uniform), base.params);
}

TEST(FedAvg, ZerosAndOnesWeightedOneToThree) {
  RoundUpdate a{0, 1, LstmModelParams(kSmall), 1}, b{1, 1, LstmModelParams(kSmall), 3};
  std::fill(b.params.values.begin(), b.params.values.end(), 1.0f);
  const std::vector<RoundUpdate> ups{a, b};
  for (float v : fedavg(ups).values) EXPECT_EQ(v, 0.75f);
  for (float v : fedavg(ups, Weighting::Uniform).values) EXPECT_EQ(v, 0.5f);
}

TEST(FedAvg, MatchesSixtyFourBitOracle) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> n(1, 50000), k(1, 12);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<RoundUpdate> ups;
    const std::size_t K = k(rng);
    for (std::size_t c = 0; c < K; ++c) ups.push_back(random_update(rng, c, n(rng)));
    const auto got = fedavg(ups);
    for (std::size_t i = 0; i < got.size(); ++i) {
      long double num = 0, den = 0;
      for (const auto& u : ups) {
        num += static_cast<long double>(u.n_samples) * u.params.values[i];
        den += static_cast<long double>(u.n_samples);
      }
      const double want = static_cast<double>(num / den);
      EXPECT_LE(std::abs(got.values[i] - want), 1e-7 * std::max(std::abs(want), 1e-30) + 1e-30) << i;
    }
  }
}

TEST(FedAvg, PermutationInvariant) {
  std::mt19937_64 rng(3);
  std::vector<RoundUpdate> ups;
  for (std::size_t c = 0; c < 6; ++c) ups.push_back(random_update(rng, c, 10 + c * 17));
  const auto ref = fedavg(ups);
  for (int rep = 0; rep < 10; ++rep) {
    std::shuffle(ups.begin(), ups.end(), rng);
    EXPECT_EQ(fedavg(ups), ref);
  }
}

TEST(FedAvg, WeightScaleInvariant) {
  std::mt19937_64 rng(4);
  std::vector<RoundUpdate> ups;
  for (std::size_t c = 0; c < 5; ++c) ups.push_back(random_update(rng, c, 3 + c * 101));
  const auto ref = fedavg(ups);
  for (std::size_t lambda : {2u, 7u, 1000u}) {
    auto scaled = ups;
    for (auto& u : scaled) u.n_samples *= lambda;
    const auto got = fedavg(scaled);
    for (std::size_t i = 0; i < ref.size(); ++i)
      EXPECT_LE(std::abs(got.values[i] - ref.values[i]), 1e-7 * std::abs(ref.values[i]) + 1e-30);
  }
}

TEST(FedAvg, RejectsBadInput) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(fedavg(std::vector<RoundUpdate>{}), PreconditionError);
  std::vector<RoundUpdate> ups{random_update(rng, 0, 3), random_update(rng, 1, 3, {36, 7})};
  EXPECT_THROW(fedavg(ups), PreconditionError);
  std::vector<RoundUpdate> rounds{random_update(rng, 0, 3), random_update(rng, 1, 3)};
  rounds[1].round_index = 4;
  EXPECT_THROW(fedavg(rounds), PreconditionError);
}

// ---- privacy contract ----

TEST(Privacy, ServerReceivableMessagesCarryNoPositionsFeaturesOrSensorData) {
  const auto names = privacy::inbound_field_names();
  EXPECT_EQ(names.size(), 2u + 4u + 5u);
  for (const auto& v : privacy::violations(names)) ADD_FAILURE() << "forbidden token in field " << v;
}

TEST(Privacy, TokenCheckCatchesPositionFields) {
  EXPECT_EQ(privacy::violations({"p_gnss", "trace_id", "n_samples"}).size(), 2u);
}

// ---- quality gate ----

class GateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    for (std::size_t c = 0; c < 3; ++c) clients.emplace_back(c, cluster_windows(4, 4, 10 + c), options(c + 1));
    TrainConfig cfg = options(9).train;
    cfg.max_epochs = 25;
    global.params = train_local(init_params<float>(2, kSmall), cluster_windows(4, 8, 77), cfg).params;
    record_global_auc(global, assess_global(global.params, clients));
  }
  std::vector<Client> clients;
  GlobalModelState global;
};

TEST_F(GateTest, TrainedGlobalIsInformative) { EXPECT_GT(global.last_auc, 0.85); }

TEST_F(GateTest, CandidateEqualToGlobalIsAccepted) {
  const RoundUpdate cand{1, 1, global.params, 50};
  const auto d = quality_gate(cand, clients, global, 0.0);
  EXPECT_TRUE(d.accepted);
  EXPECT_EQ(d.reports.size(), 2u);
  for (const auto& r : d.reports) EXPECT_NE(r.evaluating_client_id, 1u);
}

TEST_F(GateTest, ShuffledCandidateIsRejected) {
  RoundUpdate cand{0, 1, global.params, 50};
  std::mt19937_64 rng(6);
  std::shuffle(cand.params.values.begin(), cand.params.values.end(), rng);
  const auto d = quality_gate(cand, clients, global, 0.02);
  EXPECT_FALSE(d.accepted) << "mean AUC " << d.mean_auc << " vs global " << global.last_auc;
}

TEST_F(GateTest, SingleClassEvaluatorAbstains) {
  std::vector<Client> evaluators;
  evaluators.emplace_back(0, cluster_windows(4, 3, 1), options(1));
  evaluators.emplace_back(5, cluster_windows(4, 3, 2, 0.1), options(2));
  RoundUpdate cand{0, 1, global.params, 50};
  std::mt19937_64 rng(6);
  std::shuffle(cand.params.values.begin(), cand.params.values.end(), rng);
  const auto d = quality_gate(cand, evaluators, global, 0.02);
  ASSERT_EQ(d.reports.size(), 1u);
  EXPECT_TRUE(d.reports[0].abstained);
  EXPECT_TRUE(std::isnan(d.mean_auc));
  EXPECT_TRUE(d.accepted);
}

TEST_F(GateTest, NeedsAnotherEvaluator) {
  const RoundUpdate cand{0, 1, global.params, 50};
  EXPECT_THROW(quality_gate(cand, std::span<const Client>(clients.data(), 1), global, 0.02), PreconditionError);
}

// ---- round loop ----

TEST(Rounds, SingleClientRoundOneEqualsLocalTraining) {
  const std::vector<Client> clients{Client(0, cluster_windows(4, 3, 5), options(3))};
  const auto cfg = small_federation(1, false);
  const auto fed = run_rounds(clients, cfg);
  const GlobalBroadcast msg{1, init_params<float>(cfg.init_seed, cfg.layout),
                            static_cast<double>(clients[0].n_train()), cfg.local_epochs};
  EXPECT_EQ(fed.global.params, clients[0].train_round(msg).params);
  EXPECT_EQ(fed.global.round_index, 1u);
}

TEST(Rounds, IdenticalClientsMatchASingleClient) {
  const auto w = cluster_windows(4, 3, 6);
  const std::vector<Client> one{Client(0, w, options(8))};
  const std::vector<Client> three{Client(0, w, options(8)), Client(1, w, options(8)), Client(2, w, options(8))};
  const auto cfg = small_federation(3, false);
  std::vector<LstmModelParams> a, b;
  run_rounds(one, cfg, [&](const RoundMetrics&, const GlobalModelState& g) { a.push_back(g.params); });
  run_rounds(three, cfg, [&](const RoundMetrics&, const GlobalModelState& g) { b.push_back(g.params); });
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
}

TEST(Rounds, UngatedLoopIsPlainFedAvg) {
  const std::vector<Client> clients{Client(0, cluster_windows(4, 3, 7), options(1)),
                                    Client(1, cluster_windows(5, 5, 8), options(2))};
  const auto cfg = small_federation(2, false);
  const auto fed = run_rounds(clients, cfg);

  auto params = init_params<float>(cfg.init_seed, cfg.layout);
  const double mean = 0.5 * static_cast<double>(clients[0].n_train() + clients[1].n_train());
  for (std::size_t r = 1; r <= 2; ++r) {
    const GlobalBroadcast msg{r, params, mean, cfg.local_epochs};
    const std::vector<RoundUpdate> ups{clients[0].train_round(msg), clients[1].train_round(msg)};
    params = fedavg(ups);
  }
  EXPECT_EQ(fed.global.params, params);
  for (const auto& m : fed.rounds) {
    EXPECT_EQ(m.accepted_clients, 2u);
    EXPECT_FALSE(m.gate_active);
  }
}

TEST(Rounds, ClientWithoutWindowsIsSkipped) {
  const std::vector<Client> clients{Client(0, cluster_windows(4, 3, 7), options(1)), Client(1, WindowSet(4), options(2))};
  const auto fed = run_rounds(clients, small_federation(1, false));
  EXPECT_EQ(fed.rounds[0].participating_clients, 1u);
}

TEST(Rounds, GateRejectsShuffledClientAfterWarmup) {
  std::vector<Client> clients;
  for (std::size_t c = 0; c < 3; ++c) {
    auto o = options(c + 1);
    if (c == 2) o.shuffle_params_from_round = 4;
    clients.emplace_back(c, cluster_windows(4, 4, 20 + c), o);
  }
  auto cfg = small_federation(6, true);
  const auto fed = run_rounds(clients, cfg);
  for (const auto& m : fed.rounds) {
    EXPECT_EQ(m.gate_active, m.round > cfg.warmup_rounds);
    if (m.round >= 4) EXPECT_EQ(m.accepted_clients, 2u) << "round " << m.round;
  }
}

TEST(Rounds, FederationBeatsEveryLocalModelOnTwoClusters) {
  // Cluster A's targets depend on feature 4, cluster B's on feature 9.
  std::vector<Client> clients;
  std::vector<WindowSet> data;
  for (std::size_t c = 0; c < 4; ++c) data.push_back(cluster_windows(c < 2 ? 4 : 9, 4, 30 + c));
  for (std::size_t c = 0; c < 4; ++c) clients.emplace_back(c, data[c], options(c + 1));
  WindowSet pooled_test = cluster_windows(4, 3, 90);
  pooled_test.append(cluster_windows(9, 3, 91));

  const auto fed = run_rounds(clients, small_federation(30, false));
  const double fed_auc = pooled_auc(fed.global.params, pooled_test);

  double best_local = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    TrainConfig cfg = options(c + 1).train;
    cfg.max_epochs = 60;
    const auto local = train_local(init_params<float>(4, kSmall), data[c], cfg).params;
    best_local = std::max(best_local, pooled_auc(local, pooled_test));
  }
  EXPECT_GT(fed_auc, best_local) << "federated " << fed_auc << " best local " << best_local;
}
