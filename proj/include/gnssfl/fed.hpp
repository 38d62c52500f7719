#pragma once

// Federated orchestration over in-process, value-semantic messages.
//
// Clients own their windows and self-supervised labels; the server only ever
// receives the message types listed in ServerInbound: a registration with the
// local sample count, trained parameters, and quality reports holding
// predicted scores. Nothing position-, feature- or label-bearing crosses to
// the server.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <tuple>
#include <type_traits>
#include <vector>

#include <spdlog/spdlog.h>

#include "gnssfl/errors.hpp"
#include "gnssfl/eval.hpp"
#include "gnssfl/features.hpp"
#include "gnssfl/lstm.hpp"
#include "gnssfl/simgen.hpp"
#include "gnssfl/train.hpp"

namespace gnssfl {

// ---- messages ----------------------------------------------------------------

struct ClientHello {
  std::size_t client_id = 0;
  std::size_t n_samples = 0;

  static constexpr std::array<std::string_view, 2> field_names{"client_id", "n_samples"};
  auto fields() const { return std::tie(client_id, n_samples); }
};

struct RoundUpdate {
  std::size_t client_id = 0;
  std::size_t round_index = 0;
  LstmModelParams params;
  std::size_t n_samples = 0;

  static constexpr std::array<std::string_view, 4> field_names{"client_id", "round_index", "params", "n_samples"};
  auto fields() const { return std::tie(client_id, round_index, params, n_samples); }
};

struct QualityReport {
  std::size_t candidate_client_id = 0;
  std::size_t evaluating_client_id = 0;
  std::vector<float> predicted_labels;  // model scores on the evaluator's windows
  double auc_vs_reference = std::numeric_limits<double>::quiet_NaN();
  bool abstained = false;  // evaluator's reference labels hold a single class

  static constexpr std::array<std::string_view, 5> field_names{
      "candidate_client_id", "evaluating_client_id", "predicted_labels", "auc_vs_reference", "abstained"};
  auto fields() const {
    return std::tie(candidate_client_id, evaluating_client_id, predicted_labels, auc_vs_reference, abstained);
  }
};

// Everything a server can be handed by a client.
using ServerInbound = std::tuple<ClientHello, RoundUpdate, QualityReport>;

template <typename T, typename Tuple>
struct tuple_contains;
template <typename T, typename... Ts>
struct tuple_contains<T, std::tuple<Ts...>> : std::disjunction<std::is_same<T, Ts>...> {};

template <typename T>
concept ServerReceivable = tuple_contains<std::remove_cvref_t<T>, ServerInbound>::value;

// Server -> client.
struct GlobalBroadcast {
  std::size_t round_index = 0;
  LstmModelParams params;
  double mean_client_samples = 0.0;
  std::size_t local_epochs = 1;
};

struct EvaluationRequest {
  std::size_t candidate_client_id = 0;
  LstmModelParams params;
};

// Candidate id used when evaluators score the current global model.
inline constexpr std::size_t kGlobalCandidate = std::numeric_limits<std::size_t>::max();

struct GlobalModelState {
  std::size_t round_index = 0;
  LstmModelParams params;
  double last_auc = std::numeric_limits<double>::quiet_NaN();
  std::map<std::size_t, double> evaluator_auc;  // per evaluator, from the latest global assessment
};

// ---- aggregation ---------------------------------------------------------------

enum class Weighting { BySamples, Uniform };

// Coordinate-wise mean weighted by n_k / sum(n). Accumulates in 64-bit in
// client-id order so the result does not depend on input order.
inline LstmModelParams fedavg(std::span<const RoundUpdate> updates, Weighting weighting = Weighting::BySamples) {
  if (updates.empty()) throw PreconditionError("fedavg: no updates");
  const auto& first = updates.front();
  for (const auto& u : updates) {
    if (u.params.layout != first.params.layout || u.params.size() != first.params.size())
      throw PreconditionError("fedavg: parameter layout mismatch from client " + std::to_string(u.client_id));
    if (u.round_index != first.round_index) throw PreconditionError("fedavg: updates from different rounds");
    if (u.n_samples < 1) throw PreconditionError("fedavg: update with zero samples");
  }
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return updates[a].client_id < updates[b].client_id; });

  std::vector<double> acc(first.params.size(), 0.0);
  double total = 0.0;
  for (std::size_t k : order) {
    const double w = weighting == Weighting::BySamples ? static_cast<double>(updates[k].n_samples) : 1.0;
    total += w;
    const auto& v = updates[k].params.values;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * static_cast<double>(v[i]);
  }
  LstmModelParams out(first.params.layout);
  for (std::size_t i = 0; i < acc.size(); ++i) out.values[i] = static_cast<float>(acc[i] / total);
  return out;
}

// ---- client ------------------------------------------------------------------

struct ClientOptions {
  std::uint64_t seed = 1;
  TrainConfig train;                     // max_epochs is overridden by the broadcast
  std::size_t gate_eval_max_windows = 2000;
  double reference_threshold = 0.5;      // binarizes self-supervised labels for gate AUC
  // Fault injection: from this round on, the client submits a random
  // permutation of its trained parameters.
  std::optional<std::size_t> shuffle_params_from_round;
};

class Client {
 public:
  Client(std::size_t id, const WindowSet& windows, ClientOptions opts) : id_(id), opts_(std::move(opts)) {
    n_windows_ = windows.size();
    if (windows.empty()) return;
    split_ = split_validation(windows, opts_.train.validation_fraction);
    const std::size_t n = windows.size();
    const std::size_t m = std::min(n, opts_.gate_eval_max_windows);
    std::vector<std::size_t> idx(m);
    for (std::size_t k = 0; k < m; ++k) idx[k] = k * n / m;
    gate_windows_ = windows.subset(idx);
    reference_.resize(m);
    for (std::size_t k = 0; k < m; ++k) reference_[k] = gate_windows_.targets[k] >= opts_.reference_threshold;
  }

  std::size_t id() const { return id_; }
  bool has_data() const { return !split_.train.empty(); }
  std::size_t n_train() const { return split_.train.size(); }

  ClientHello hello() const { return {id_, n_train()}; }

  RoundUpdate train_round(const GlobalBroadcast& msg) const {
    TrainConfig cfg = opts_.train;
    cfg.max_epochs = msg.local_epochs;
    cfg.rng_seed = derive_seed(opts_.seed, msg.round_index);
    cfg.lr_scale = opts_.train.lr_scale * lr_scale_rule(static_cast<double>(n_train()), msg.mean_client_samples);
    auto trained = train_local(msg.params, split_, cfg);
    last_report_ = trained.report;
    RoundUpdate u{id_, msg.round_index, std::move(trained.params), n_train()};
    if (opts_.shuffle_params_from_round && msg.round_index >= *opts_.shuffle_params_from_round) {
      std::mt19937_64 rng(derive_seed(opts_.seed ^ 0x5EEDULL, msg.round_index));
      std::shuffle(u.params.values.begin(), u.params.values.end(), rng);
    }
    return u;
  }

  QualityReport evaluate(const EvaluationRequest& req) const {
    QualityReport r;
    r.candidate_client_id = req.candidate_client_id;
    r.evaluating_client_id = id_;
    const auto scores = predict(req.params, gate_windows_);
    r.predicted_labels.assign(scores.begin(), scores.end());
    const auto pos = std::count(reference_.begin(), reference_.end(), true);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(reference_.size())) {
      r.abstained = true;
      return r;
    }
    r.auc_vs_reference = auc_of(scores, reference_);
    return r;
  }

  // Validation MSE of a model on this client's held-out windows.
  double validation_mse(const LstmModelParams& params) const { return mean_squared_error(params, split_.validation); }
  std::size_t n_validation() const { return split_.validation.size(); }
  const TrainReport& last_report() const { return last_report_; }

 private:
  std::size_t id_;
  ClientOptions opts_;
  std::size_t n_windows_ = 0;
  TrainValSplit split_;
  WindowSet gate_windows_;
  std::vector<bool> reference_;
  mutable TrainReport last_report_;
};

// ---- quality control ---------------------------------------------------------

struct GateDecision {
  bool accepted = true;
  double mean_auc = std::numeric_limits<double>::quiet_NaN();  // NaN when every evaluator abstained
  std::vector<QualityReport> reports;
};

inline double mean_report_auc(std::span<const QualityReport> reports) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : reports)
    if (!r.abstained) {
      sum += r.auc_vs_reference;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

// Reports of every client able to score the current global model.
inline std::vector<QualityReport> assess_global(const LstmModelParams& params, std::span<const Client> clients) {
  std::vector<QualityReport> reports;
  for (const auto& c : clients)
    if (c.has_data()) reports.push_back(c.evaluate({kGlobalCandidate, params}));
  return reports;
}

// Records a global assessment: last_auc is the mean over non-abstaining
// evaluators, evaluator_auc keeps the individual values.
inline void record_global_auc(GlobalModelState& global, std::span<const QualityReport> reports) {
  global.evaluator_auc.clear();
  for (const auto& r : reports)
    if (!r.abstained) global.evaluator_auc[r.evaluating_client_id] = r.auc_vs_reference;
  global.last_auc = mean_report_auc(reports);
}

// Accepts the candidate iff the mean AUC over evaluators other than its
// author is at least the global model's AUC minus threshold_delta. The global
// reference is averaged over the same evaluators when per-evaluator values
// are known, else global.last_auc is used. If every evaluator abstains (or
// the global model has no AUC yet) the update is accepted.
inline GateDecision quality_gate(const RoundUpdate& candidate, std::span<const Client> evaluators,
                                 const GlobalModelState& global, double threshold_delta) {
  GateDecision d;
  std::size_t eligible = 0;
  for (const auto& e : evaluators) {
    if (e.id() == candidate.client_id || !e.has_data()) continue;
    ++eligible;
    d.reports.push_back(e.evaluate({candidate.client_id, candidate.params}));
  }
  if (eligible == 0) throw PreconditionError("quality_gate: needs at least one evaluator besides the candidate");
  d.mean_auc = mean_report_auc(d.reports);

  double reference = global.last_auc;
  if (!global.evaluator_auc.empty()) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : d.reports) {
      const auto it = global.evaluator_auc.find(r.evaluating_client_id);
      if (r.abstained || it == global.evaluator_auc.end()) continue;
      sum += it->second;
      ++n;
    }
    if (n) reference = sum / static_cast<double>(n);
  }
  if (std::isnan(d.mean_auc) || std::isnan(reference)) {
    if (std::isnan(d.mean_auc))
      spdlog::warn("quality gate: every evaluator abstained on client {}; accepting", candidate.client_id);
    d.accepted = true;
    return d;
  }
  d.accepted = d.mean_auc >= reference - threshold_delta;
  return d;
}

// ---- server & round loop -------------------------------------------------------

struct FederationConfig {
  std::size_t rounds = 100;
  std::size_t local_epochs = 5;
  bool gate_enabled = true;
  std::size_t warmup_rounds = 10;
  double threshold_delta = 0.02;
  Weighting weighting = Weighting::BySamples;
  std::uint64_t init_seed = 1;
  ModelLayout layout{};

  void validate() const {
    if (rounds < 1) throw ConfigError("federation: rounds must be >= 1");
    if (local_epochs < 1) throw ConfigError("federation: local_epochs must be >= 1");
    if (threshold_delta < 0) throw ConfigError("federation: threshold_delta must be >= 0");
  }
};

struct RoundMetrics {
  std::size_t round = 0;
  std::size_t participating_clients = 0;
  std::size_t accepted_clients = 0;
  bool gate_active = false;
  double mean_gate_auc = std::numeric_limits<double>::quiet_NaN();
  double global_auc = std::numeric_limits<double>::quiet_NaN();
  double global_val_mse = std::numeric_limits<double>::quiet_NaN();
};

// Sequential server state machine. Its inputs are restricted to ServerInbound.
class Server {
 public:
  Server(const FederationConfig& cfg, LstmModelParams initial) : cfg_(cfg) {
    cfg_.validate();
    state_.params = std::move(initial);
  }

  template <ServerReceivable M>
  void receive(M msg) {
    if constexpr (std::is_same_v<M, ClientHello>) {
      registered_.push_back(msg);
    } else if constexpr (std::is_same_v<M, RoundUpdate>) {
      pending_.push_back(std::move(msg));
    } else {
      reports_.push_back(std::move(msg));
    }
  }

  GlobalBroadcast broadcast() const {
    double mean = 0.0;
    for (const auto& h : registered_) mean += static_cast<double>(h.n_samples);
    if (!registered_.empty()) mean /= static_cast<double>(registered_.size());
    return {state_.round_index + 1, state_.params, mean, cfg_.local_epochs};
  }

  bool gate_active() const { return cfg_.gate_enabled && state_.round_index + 1 > cfg_.warmup_rounds; }

  void record_global_assessment(std::span<const QualityReport> reports) { record_global_auc(state_, reports); }

  // Aggregates the accepted updates and advances the round.
  std::size_t aggregate(std::span<const std::size_t> accepted_clients) {
    std::vector<RoundUpdate> accepted;
    for (auto& u : pending_)
      if (std::find(accepted_clients.begin(), accepted_clients.end(), u.client_id) != accepted_clients.end())
        accepted.push_back(std::move(u));
    if (!accepted.empty()) state_.params = fedavg(accepted, cfg_.weighting);
    pending_.clear();
    reports_.clear();
    ++state_.round_index;
    return accepted.size();
  }

  const std::vector<RoundUpdate>& pending() const { return pending_; }
  const GlobalModelState& state() const { return state_; }
  const FederationConfig& config() const { return cfg_; }

 private:
  FederationConfig cfg_;
  GlobalModelState state_;
  std::vector<ClientHello> registered_;
  std::vector<RoundUpdate> pending_;
  std::vector<QualityReport> reports_;
};

struct FederationResult {
  GlobalModelState global;
  std::vector<RoundMetrics> rounds;
};

using RoundCallback = std::function<void(const RoundMetrics&, const GlobalModelState&)>;

// Broadcast -> local training -> (gate) -> FedAvg, `rounds` times.
inline FederationResult run_rounds(std::span<const Client> clients, const FederationConfig& cfg,
                                   const RoundCallback& on_round = {}) {
  if (clients.empty()) throw PreconditionError("run_rounds: no clients");
  Server server(cfg, init_params<float>(cfg.init_seed, cfg.layout));
  for (const auto& c : clients) {
    if (c.has_data())
      server.receive(c.hello());
    else
      spdlog::warn("client {} has no windows and is skipped", c.id());
  }
  FederationResult result;

  for (std::size_t r = 1; r <= cfg.rounds; ++r) {
    const GlobalBroadcast msg = server.broadcast();
    RoundMetrics m;
    m.round = r;
    for (const auto& c : clients) {
      if (!c.has_data()) continue;
      server.receive(c.train_round(msg));
      ++m.participating_clients;
    }

    std::vector<std::size_t> accepted;
    m.gate_active = server.gate_active() && m.participating_clients > 1;
    if (m.gate_active) {
      const auto global_reports = assess_global(msg.params, clients);
      server.record_global_assessment(global_reports);
      m.global_auc = server.state().last_auc;
      for (const auto& rep : global_reports) server.receive(rep);
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& u : server.pending()) {
        auto d = quality_gate(u, clients, server.state(), cfg.threshold_delta);
        for (auto& rep : d.reports) server.receive(std::move(rep));
        if (d.accepted) accepted.push_back(u.client_id);
        if (!std::isnan(d.mean_auc)) {
          sum += d.mean_auc;
          ++n;
        }
      }
      if (n) m.mean_gate_auc = sum / static_cast<double>(n);
    } else {
      for (const auto& u : server.pending()) accepted.push_back(u.client_id);
    }
    m.accepted_clients = server.aggregate(accepted);

    double mse = 0.0;
    std::size_t nval = 0;
    for (const auto& c : clients) {
      if (!c.has_data()) continue;
      mse += c.validation_mse(server.state().params) * static_cast<double>(c.n_validation());
      nval += c.n_validation();
    }
    if (nval) m.global_val_mse = mse / static_cast<double>(nval);
    result.rounds.push_back(m);
    if (on_round) on_round(m, server.state());
  }
  result.global = server.state();
  return result;
}

}  // namespace gnssfl
