#pragma once

// End-to-end pipelines: per-party preprocessing, the three detectors
// (centralized LSTM, federated LSTM, PDS) and the experiment matrix.
//
// Output files (all under the experiment output directory):
//   manifest.ini               version, config hash, seed + full effective config
//   dataset.csv                generated corpus
//   models/<cell>/<name>.ckpt  trained parameters (checkpoint format)
//   models/<cell>/<name>.train.csv     epoch,train_loss,val_loss (centralized)
//   models/<cell>/<name>/rounds.csv    round,accepted_clients,mean_gate_auc,global_val_mse
//   models/<cell>/<name>/round_NNNN.ckpt  periodic global checkpoints
//   pds_scores.csv             trace_id,sample,pds_score
//   roc_<experiment>.csv       threshold,fpr,tpr
//   auc_table.csv              experiment,cell,method,train_set,test_set,auc,n_windows,n_positive
//   plot_roc.gp                gnuplot script over the ROC files

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "gnssfl/checkpoint.hpp"
#include "gnssfl/config.hpp"
#include "gnssfl/dataset_io.hpp"
#include "gnssfl/eval.hpp"
#include "gnssfl/features.hpp"
#include "gnssfl/fed.hpp"
#include "gnssfl/fusion.hpp"
#include "gnssfl/labels.hpp"
#include "gnssfl/simgen.hpp"
#include "gnssfl/train.hpp"

#ifndef GNSSFL_VERSION
#define GNSSFL_VERSION "0.1.0"
#endif

namespace gnssfl {

inline constexpr std::string_view kVersion = GNSSFL_VERSION;

// Seed streams derived from the master seed.
namespace stream {
inline constexpr std::uint64_t kSimulation = 1;
inline constexpr std::uint64_t kPartition = 2;
inline constexpr std::uint64_t kModelInit = 3;
inline constexpr std::uint64_t kTraining = 4;
}  // namespace stream

inline std::string format_number(double v) {
  if (std::isnan(v)) return std::string(kMissingToken);
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline SimConfig simulation_config(const ExperimentConfig& cfg) {
  SimConfig s = cfg.sim;
  s.rng_seed = derive_seed(cfg.master_seed(), stream::kSimulation);
  return s;
}

// ---- per-party preprocessing ---------------------------------------------------

struct LocalData {
  WindowSet windows;
  NormalizationState norm;
  MinMaxScaler label_scaler;
};

// Everything a party derives from its own traces: fusion, pooled label
// scaling, pooled feature normalization and windows. Traces shorter than the
// window contribute nothing and are logged.
inline LocalData prepare_local(std::span<const Trace> traces, const ExperimentConfig& cfg) {
  LocalData out;
  out.windows = WindowSet(cfg.features.window_length);
  if (traces.empty()) return out;
  std::vector<std::vector<FusedEstimate>> fused;
  fused.reserve(traces.size());
  for (const auto& t : traces) fused.push_back(fuse_trace(t, cfg.fusion));
  out.label_scaler = fit_label_scaler(traces, fused);

  std::vector<std::vector<RawFeatureVector>> raw;
  std::vector<RawFeatureVector> pooled;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    raw.push_back(extract_raw(traces[k], fused[k], cfg.features.ranges));
    pooled.insert(pooled.end(), raw.back().begin(), raw.back().end());
  }
  out.norm = fit_normalization(pooled, cfg.features.ranges);

  for (std::size_t k = 0; k < traces.size(); ++k) {
    const auto features = apply_normalization(raw[k], out.norm);
    const auto labels = generate_labels(traces[k], fused[k], out.label_scaler);
    if (append_windows(out.windows, features, labels.values, traces[k].trace_id, cfg.features.stride) == 0)
      spdlog::warn("trace {} has {} samples, fewer than the window length {}; no windows", traces[k].trace_id,
                   traces[k].size(), cfg.features.window_length);
  }
  return out;
}

// A test split: windows normalized per device over the split's own traces,
// simulator ground truth and the PDS score of each window's last sample.
struct EvalSet {
  std::string name;
  WindowSet windows;
  std::vector<bool> truth;
  std::vector<double> pds;

  std::size_t positives() const { return static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true)); }
};

using PdsTable = std::map<std::int64_t, std::vector<double>>;  // trace_id -> per-sample score

inline PdsTable compute_pds(std::span<const Trace> traces, const FusionConfig& fusion) {
  PdsTable out;
  for (const auto& t : traces) out[t.trace_id] = pds_score(t, fuse_trace(t, fusion));
  return out;
}

inline EvalSet prepare_eval(std::span<const Trace> traces, const ExperimentConfig& cfg, const std::string& name) {
  if (traces.empty()) throw DataError("test split '" + name + "' has no traces");
  std::map<std::int64_t, std::vector<Trace>> by_device;
  for (const auto& t : traces) by_device[t.platform_id].push_back(t);
  EvalSet e;
  e.name = name;
  e.windows = WindowSet(cfg.features.window_length);
  for (const auto& [device, list] : by_device) e.windows.append(prepare_local(list, cfg).windows);
  if (e.windows.empty()) throw DataError("test split '" + name + "' produced no windows");
  e.truth = window_truth(traces, e.windows);
  const auto pos = e.positives();
  if (pos == 0 || pos == e.truth.size())
    throw SingleClassError("test split '" + name + "' has a single ground-truth class (" + std::to_string(pos) +
                           " attacked of " + std::to_string(e.truth.size()) + " windows); ROC/AUC undefined");
  const auto table = compute_pds(traces, cfg.fusion);
  e.pds.resize(e.windows.size());
  for (std::size_t i = 0; i < e.windows.size(); ++i) e.pds[i] = table.at(e.windows.trace_ids[i]).at(e.windows.last_sample[i]);
  return e;
}

// ---- detectors -------------------------------------------------------------------

inline WindowSet pool_windows(const std::vector<std::vector<Trace>>& parties, const ExperimentConfig& cfg) {
  WindowSet pooled(cfg.features.window_length);
  for (const auto& p : parties) pooled.append(prepare_local(p, cfg).windows);
  return pooled;
}

inline LstmModelParams initial_model(const ExperimentConfig& cfg) {
  return init_params<float>(derive_seed(cfg.master_seed(), stream::kModelInit), cfg.layout());
}

// Centralized baseline: every party preprocesses locally, the windows are
// pooled and one trainer runs with early stopping.
inline TrainResult train_centralized(const std::vector<std::vector<Trace>>& parties, const ExperimentConfig& cfg,
                                     std::uint64_t job_seed) {
  const WindowSet pooled = pool_windows(parties, cfg);
  if (pooled.empty()) throw DataError("centralized training: no windows");
  TrainConfig t = cfg.train;
  t.rng_seed = derive_seed(job_seed, 0);
  return train_local(initial_model(cfg), pooled, t);
}

inline void write_train_curve(const TrainReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < r.loss_curve.size(); ++e)
    out << e + 1 << ',' << format_number(r.train_curve[e]) << ',' << format_number(r.loss_curve[e]) << '\n';
}

// Runs the federation over one party per entry. With `out_dir` set, rounds.csv
// is appended to each round and the global model is checkpointed every
// `checkpoint_every` rounds.
inline FederationResult train_federated(const std::vector<std::vector<Trace>>& parties, const ExperimentConfig& cfg,
                                        std::uint64_t job_seed, const std::filesystem::path& out_dir = {}) {
  const auto& fo = cfg.federation;
  std::vector<Client> clients;
  clients.reserve(parties.size());
  for (std::size_t k = 0; k < parties.size(); ++k) {
    ClientOptions o;
    o.seed = derive_seed(job_seed, 100 + k);
    o.train = cfg.train;
    o.gate_eval_max_windows = fo.gate_eval_max_windows;
    if (fo.shuffle_client && *fo.shuffle_client == k) o.shuffle_params_from_round = fo.shuffle_from_round;
    clients.emplace_back(k, prepare_local(parties[k], cfg).windows, std::move(o));
  }
  FederationConfig loop = fo.loop;
  loop.layout = cfg.layout();
  loop.init_seed = derive_seed(cfg.master_seed(), stream::kModelInit);

  std::ofstream rounds_csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    rounds_csv.open(out_dir / "rounds.csv", std::ios::trunc);
    if (!rounds_csv) throw DataError("cannot write " + (out_dir / "rounds.csv").string());
    rounds_csv << "round,accepted_clients,mean_gate_auc,global_val_mse\n";
  }
  auto on_round = [&](const RoundMetrics& m, const GlobalModelState& g) {
    if (out_dir.empty()) return;
    rounds_csv << m.round << ',' << m.accepted_clients << ',' << format_number(m.mean_gate_auc) << ','
               << format_number(m.global_val_mse) << '\n';
    rounds_csv.flush();
    if (fo.checkpoint_every && m.round % fo.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "round_%04zu.ckpt", m.round);
      save_checkpoint(g.params, out_dir / name);
    }
  };
  return run_rounds(clients, loop, on_round);
}

// ---- experiment matrix -----------------------------------------------------------

inline const std::vector<std::string>& all_cells() {
  static const std::vector<std::string> cells{"same-trace", "per-device",  "per-model",
                                              "cross-model", "trace-split", "trace-split-per-model"};
  return cells;
}

enum class Trainer { Centralized, Federated };

struct TrainJob {
  std::string key;  // "<cell>/<name>", also the artifact path below models/
  Trainer trainer = Trainer::Centralized;
  std::vector<std::vector<Trace>> parties;
};

struct EvalJob {
  std::string cell;
  std::string method;     // centralized, federated, local or pds
  std::string model_key;  // empty for pds
  std::string train_set;
  std::string test_set;
  std::string test_key;   // shared by jobs scoring the same split

  std::string experiment() const {
    std::string e = cell + "_" + method;
    if (!train_set.empty()) e += "_" + train_set;
    if (!test_set.empty() && test_set != train_set) e += "_on_" + test_set;
    return e;
  }
};

struct ExperimentPlan {
  std::vector<TrainJob> train;
  std::vector<EvalJob> eval;
  std::map<std::string, std::vector<Trace>> tests;  // test_key -> traces
};

inline std::uint64_t job_seed(const ExperimentConfig& cfg, const std::string& key) {
  return derive_seed(cfg.master_seed() ^ fnv1a64(key), stream::kTraining);
}

inline ExperimentPlan plan_experiments(const ExperimentConfig& cfg, const std::vector<Trace>& corpus) {
  if (corpus.empty()) throw DataError("experiment: empty corpus");
  const std::uint64_t pseed = derive_seed(cfg.master_seed(), stream::kPartition);
  const std::set<std::string> cells(cfg.cells.begin(), cfg.cells.end());
  ExperimentPlan plan;
  std::set<std::string> keys;
  auto add_train = [&](TrainJob job) {
    if (keys.insert(job.key).second) plan.train.push_back(std::move(job));
  };

  std::map<std::int64_t, std::vector<Trace>> by_device;
  for (const auto& t : corpus) by_device[t.platform_id].push_back(t);
  auto model_of = [&](std::int64_t platform) -> std::string {
    const auto d = static_cast<std::size_t>(platform - 1);
    if (platform < 1 || d >= cfg.sim.device_profile.size()) return "unknown";
    return cfg.sim.profile_of_device(d).model_name;
  };
  std::map<std::string, std::vector<std::int64_t>> devices_of_model;
  for (const auto& [device, list] : by_device) devices_of_model[model_of(device)].push_back(device);
  auto model_traces = [&](const std::string& model) {
    std::vector<Trace> out;
    for (auto d : devices_of_model.at(model)) out.insert(out.end(), by_device.at(d).begin(), by_device.at(d).end());
    return out;
  };
  auto group_by_device = [](const std::vector<Trace>& traces) {
    std::map<std::int64_t, std::vector<Trace>> g;
    for (const auto& t : traces) g[t.platform_id].push_back(t);
    std::vector<std::vector<Trace>> out;
    for (auto& [d, list] : g) out.push_back(std::move(list));
    return out;
  };
  auto add_trio = [&](const std::string& cell, const Partition& p, const std::string& train_set,
                      const std::string& test_set) {
    add_train({cell + "/centralized", Trainer::Centralized, p.clients});
    add_train({cell + "/federated", Trainer::Federated, p.clients});
    const std::string tk = cell + "|" + test_set;
    plan.tests[tk] = p.test;
    for (const char* m : {"centralized", "federated"})
      plan.eval.push_back({cell, m, cell + "/" + m, train_set, test_set, tk});
    plan.eval.push_back({cell, "pds", "", "", test_set, tk});
  };

  if (cells.count("same-trace")) {
    const auto mode = cfg.sim.partition_mode;
    const auto p = partition(corpus, mode, cfg.federation.n_clients, pseed, cfg.sim.test_fraction);
    const std::string test_set = p.test_is_train ? "all" : "held-out";
    add_trio("same-trace", p, to_string(mode), test_set);
  }

  if (cells.count("per-device")) {
    for (const auto& [device, list] : by_device) {
      const std::string name = "device-" + std::to_string(device);
      add_train({"per-device/local-" + name, Trainer::Centralized, {list}});
      const std::string tk = "per-device|" + name;
      plan.tests[tk] = list;
      plan.eval.push_back({"per-device", "local", "per-device/local-" + name, name, name, tk});
      plan.eval.push_back({"per-device", "pds", "", "", name, tk});
    }
  }

  const bool want_per_model = cells.count("per-model") || cells.count("cross-model");
  if (want_per_model) {
    for (const auto& [model, devices] : devices_of_model) {
      const auto traces = model_traces(model);
      add_train({"per-model/federated-" + model, Trainer::Federated, group_by_device(traces)});
      const std::string tk = "per-model|" + model;
      plan.tests[tk] = traces;
      if (cells.count("per-model")) {
        plan.eval.push_back({"per-model", "federated", "per-model/federated-" + model, model, model, tk});
        plan.eval.push_back({"per-model", "pds", "", "", model, tk});
      }
    }
  }

  if (cells.count("cross-model")) {
    for (const auto& [train_model, d1] : devices_of_model)
      for (const auto& [test_model, d2] : devices_of_model) {
        if (train_model == test_model) continue;
        plan.eval.push_back({"cross-model", "federated", "per-model/federated-" + train_model, train_model, test_model,
                             "per-model|" + test_model});
      }
  }

  if (cells.count("trace-split")) {
    const auto p = partition(corpus, PartitionMode::NonIidByTrace, cfg.federation.n_clients, pseed, cfg.sim.test_fraction);
    add_trio("trace-split", p, "non-iid-by-trace", "held-out");
  }

  if (cells.count("trace-split-per-model")) {
    for (const auto& [model, devices] : devices_of_model) {
      const auto p = partition(model_traces(model), PartitionMode::NonIidByTrace, 1, pseed, cfg.sim.test_fraction);
      const std::string key = "trace-split-per-model/federated-" + model;
      add_train({key, Trainer::Federated, group_by_device(p.clients.front())});
      const std::string tk = "trace-split-per-model|" + model;
      plan.tests[tk] = p.test;
      plan.eval.push_back({"trace-split-per-model", "federated", key, model, model + "-held-out", tk});
      plan.eval.push_back({"trace-split-per-model", "pds", "", "", model + "-held-out", tk});
    }
  }
  return plan;
}

struct AucRow {
  std::string experiment;
  std::string cell;
  std::string method;
  std::string train_set;
  std::string test_set;
  double auc = 0.0;
  std::size_t n_windows = 0;
  std::size_t n_positive = 0;
};

struct MatrixReport {
  std::vector<AucRow> rows;

  const AucRow* find(const std::string& cell, const std::string& method, const std::string& train_set = {}) const {
    for (const auto& r : rows)
      if (r.cell == cell && r.method == method && (train_set.empty() || r.train_set == train_set)) return &r;
    return nullptr;
  }
};

inline std::filesystem::path model_path(const std::filesystem::path& out, const std::string& key) {
  return out / "models" / (key + ".ckpt");
}

inline void write_manifest(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.ini", std::ios::trunc);
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << "[manifest]\n"
      << "version=" << kVersion << '\n'
      << "config_hash=" << config_hash(cfg) << '\n'
      << "seed=" << cfg.master_seed() << "\n\n"
      << canonical_config(cfg);
}

// Trains every job of the plan whose trainer is listed; checkpoints and
// training logs are written when `out` is non-empty.
inline std::map<std::string, LstmModelParams> run_training(const ExperimentConfig& cfg, const ExperimentPlan& plan,
                                                           std::set<Trainer> trainers,
                                                           const std::filesystem::path& out = {}) {
  std::map<std::string, LstmModelParams> models;
  for (const auto& job : plan.train) {
    if (!trainers.count(job.trainer)) continue;
    const auto seed = job_seed(cfg, job.key);
    const auto ckpt = model_path(out, job.key);
    if (!out.empty()) std::filesystem::create_directories(ckpt.parent_path());
    spdlog::info("training {} ({} parties)", job.key, job.parties.size());
    if (job.trainer == Trainer::Centralized) {
      auto r = train_centralized(job.parties, cfg, seed);
      if (!out.empty()) write_train_curve(r.report, out / "models" / (job.key + ".train.csv"));
      models.emplace(job.key, std::move(r.params));
    } else {
      auto r = train_federated(job.parties, cfg, seed, out.empty() ? std::filesystem::path{} : out / "models" / job.key);
      models.emplace(job.key, std::move(r.global.params));
    }
    if (!out.empty()) save_checkpoint(models.at(job.key), ckpt);
  }
  return models;
}

inline void write_pds_scores(const PdsTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "trace_id,sample,pds_score\n";
  for (const auto& [id, scores] : table)
    for (std::size_t i = 0; i < scores.size(); ++i) out << id << ',' << i << ',' << format_number(scores[i]) << '\n';
}

inline PdsTable read_pds_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "trace_id,sample,pds_score") throw DataError(path.string() + ": unexpected header");
  PdsTable t;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_commas(line);
    std::int64_t id = 0;
    std::size_t idx = 0;
    double v = 0;
    if (f.size() != 3 || !detail::parse_number(f[0], id) || !detail::parse_number(f[1], idx) ||
        !detail::parse_number(f[2], v))
      throw DataError(path.string() + ": bad line " + std::to_string(line_no));
    auto& scores = t[id];
    if (idx != scores.size()) throw DataError(path.string() + ": samples out of order at line " + std::to_string(line_no));
    scores.push_back(v);
  }
  return t;
}

inline void write_auc_table(const MatrixReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "experiment,cell,method,train_set,test_set,auc,n_windows,n_positive\n";
  for (const auto& r : rep.rows)
    out << r.experiment << ',' << r.cell << ',' << r.method << ',' << r.train_set << ',' << r.test_set << ','
        << format_number(r.auc) << ',' << r.n_windows << ',' << r.n_positive << '\n';
}

inline MatrixReport read_auc_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "experiment,cell,method,train_set,test_set,auc,n_windows,n_positive")
    throw DataError(path.string() + ": unexpected header");
  MatrixReport rep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_commas(line);
    AucRow r;
    if (f.size() != 8 || !detail::parse_number(f[5], r.auc) || !detail::parse_number(f[6], r.n_windows) ||
        !detail::parse_number(f[7], r.n_positive))
      throw DataError(path.string() + ": bad row '" + line + "'");
    r.experiment = f[0];
    r.cell = f[1];
    r.method = f[2];
    r.train_set = f[3];
    r.test_set = f[4];
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

inline void write_gnuplot(const MatrixReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# gnuplot " << path.filename().string() << "\n"
      << "set datafile separator ','\n"
      << "set key bottom right\n"
      << "set xlabel 'false positive rate'\n"
      << "set ylabel 'true positive rate'\n"
      << "set xrange [0:1]\nset yrange [0:1]\n"
      << "set terminal pngcairo size 900,700\n";
  std::map<std::string, std::vector<const AucRow*>> by_cell;
  for (const auto& r : rep.rows) by_cell[r.cell].push_back(&r);
  for (const auto& [cell, rows] : by_cell) {
    out << "\nset output 'roc_" << cell << ".png'\nset title '" << cell << "'\nplot \\\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out << "  'roc_" << rows[i]->experiment << ".csv' skip 1 using 2:3 with lines title '" << rows[i]->method;
      if (!rows[i]->train_set.empty()) out << ' ' << rows[i]->train_set;
      out << " -> " << rows[i]->test_set << " (AUC " << format_number(std::round(rows[i]->auc * 1000) / 1000) << ")'"
          << (i + 1 < rows.size() ? ", \\\n" : ", \\\n  x with lines dt 2 lc rgb 'gray' notitle\n");
    }
  }
}

// Source of detector scores for evaluation.
struct ModelStore {
  std::map<std::string, LstmModelParams> models;
  std::optional<PdsTable> pds;  // unset: pds rows are skipped
};

using EvalSets = std::map<std::string, EvalSet>;

inline bool artifact_available(const EvalJob& j, const ModelStore& store) {
  return j.method == "pds" ? store.pds.has_value() : store.models.count(j.model_key) > 0;
}

// Builds (and checks for both classes) every test split referenced by a job
// that passes `wanted`.
template <typename Pred>
EvalSets build_eval_sets(const ExperimentConfig& cfg, const ExperimentPlan& plan, Pred&& wanted) {
  EvalSets sets;
  for (const auto& j : plan.eval)
    if (wanted(j) && !sets.count(j.test_key)) sets.emplace(j.test_key, prepare_eval(plan.tests.at(j.test_key), cfg, j.test_key));
  return sets;
}

// Scores every evaluation job whose artifact is available.
inline MatrixReport evaluate_plan(const ExperimentPlan& plan, const EvalSets& sets, const ModelStore& store,
                                  const std::filesystem::path& out = {}) {
  if (!out.empty()) std::filesystem::create_directories(out);
  MatrixReport rep;
  for (const auto& j : plan.eval) {
    if (!artifact_available(j, store)) {
      spdlog::warn("no artifact for {}; skipped", j.experiment());
      continue;
    }
    const EvalSet& e = sets.at(j.test_key);
    auto score = [&](const WindowSet& w) {
      if (j.method != "pds") return predict(store.models.at(j.model_key), w);
      std::vector<double> s(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) {
        const auto it = store.pds->find(w.trace_ids[i]);
        if (it == store.pds->end() || w.last_sample[i] >= it->second.size())
          throw DataError("pds scores missing for trace " + std::to_string(w.trace_ids[i]));
        s[i] = it->second[w.last_sample[i]];
      }
      return s;
    };
    const auto roc_path = out.empty() ? std::filesystem::path{} : out / ("roc_" + j.experiment() + ".csv");
    const auto r = evaluate_model(score, e.windows, e.truth, j.test_key, roc_path);
    rep.rows.push_back({j.experiment(), j.cell, j.method, j.train_set, j.test_set, r.auc.value, e.windows.size(), e.positives()});
    spdlog::info("{}: AUC {:.4f}", j.experiment(), r.auc.value);
  }
  if (rep.rows.empty()) throw DataError("nothing to evaluate: no trained models or PDS scores found");
  if (!out.empty()) {
    write_auc_table(rep, out / "auc_table.csv");
    write_gnuplot(rep, out / "plot_roc.gp");
  }
  return rep;
}

// Plans, trains and evaluates all configured cells in memory; with `out` set
// the artifacts, tables and manifest are written as well. Degenerate test
// splits fail before any training starts.
inline MatrixReport experiment_matrix(const ExperimentConfig& cfg, const std::vector<Trace>& corpus,
                                      const std::filesystem::path& out = {}) {
  cfg.validate();
  const auto plan = plan_experiments(cfg, corpus);
  const auto sets = build_eval_sets(cfg, plan, [](const EvalJob&) { return true; });
  ModelStore store;
  store.pds = compute_pds(corpus, cfg.fusion);
  if (!out.empty()) {
    write_manifest(cfg, out);
    write_pds_scores(*store.pds, out / "pds_scores.csv");
  }
  store.models = run_training(cfg, plan, {Trainer::Centralized, Trainer::Federated}, out);
  return evaluate_plan(plan, sets, store, out);
}

}  // namespace gnssfl
