// gnssfl: generate a synthetic corpus, train the detectors, evaluate them and
// summarize the results.
//
//   gnssfl generate --config exp.ini [--seed N] [--out DIR]
//   gnssfl train {centralized|federated|pds-baseline} --config exp.ini
//   gnssfl eval --config exp.ini
//   gnssfl report --config exp.ini
//
// Settings precedence: flags > config file > built-in defaults. The output
// directory is --out, else $GNSSFL_OUT_ROOT/<experiment name>, else the
// config's [experiment] out_dir.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 data error,
// 4 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gnssfl/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gnssfl;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config file (INI)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed, overrides [experiment] seed");
  cmd->add_option("--out", f.out, "output directory, overrides GNSSFL_OUT_ROOT and [experiment] out_dir");
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  resolve_out_dir(cfg, f.out ? std::optional<fs::path>(*f.out) : std::nullopt);
  cfg.validate();
  return cfg;
}

// An output directory belongs to one configuration; artifacts of another
// configuration are never mixed in.
void claim_out_dir(const ExperimentConfig& cfg) {
  const fs::path manifest = cfg.out_dir / "manifest.ini";
  if (fs::exists(manifest)) {
    boost::property_tree::ptree pt;
    boost::property_tree::ini_parser::read_ini(manifest.string(), pt);
    const auto hash = pt.get<std::string>("manifest.config_hash", "");
    if (hash != config_hash(cfg))
      throw ConfigError("output directory " + cfg.out_dir.string() + " holds artifacts of config " + hash +
                        ", not " + config_hash(cfg) + "; choose another --out");
  }
  write_manifest(cfg, cfg.out_dir);
}

std::vector<Trace> load_or_generate(const ExperimentConfig& cfg) {
  const fs::path path = cfg.out_dir / "dataset.csv";
  if (fs::exists(path)) return read_dataset(path);
  spdlog::info("generating {} traces into {}", cfg.sim.n_traces, path.string());
  auto traces = generate_dataset(simulation_config(cfg));
  write_dataset(traces, path);
  return traces;
}

int cmd_generate(const ExperimentConfig& cfg) {
  claim_out_dir(cfg);
  const auto traces = generate_dataset(simulation_config(cfg));
  write_dataset(traces, cfg.out_dir / "dataset.csv");
  std::size_t samples = 0, attacked = 0;
  for (const auto& t : traces)
    for (const auto& s : t.samples) {
      ++samples;
      attacked += s.attacked;
    }
  std::printf("wrote %zu traces, %zu samples (%zu attacked) to %s\n", traces.size(), samples, attacked,
              (cfg.out_dir / "dataset.csv").string().c_str());
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& mode) {
  claim_out_dir(cfg);
  const auto corpus = load_or_generate(cfg);
  if (mode == "pds-baseline") {
    write_pds_scores(compute_pds(corpus, cfg.fusion), cfg.out_dir / "pds_scores.csv");
    std::printf("wrote %s\n", (cfg.out_dir / "pds_scores.csv").string().c_str());
    return 0;
  }
  const auto plan = plan_experiments(cfg, corpus);
  const Trainer trainer = mode == "centralized" ? Trainer::Centralized : Trainer::Federated;
  const auto models = run_training(cfg, plan, {trainer}, cfg.out_dir);
  if (models.empty()) std::printf("no %s models in the configured cells\n", mode.c_str());
  for (const auto& [key, params] : models) std::printf("wrote %s\n", model_path(cfg.out_dir, key).string().c_str());
  return 0;
}

int cmd_eval(const ExperimentConfig& cfg) {
  claim_out_dir(cfg);
  const fs::path dataset = cfg.out_dir / "dataset.csv";
  if (!fs::exists(dataset)) throw DataError("no dataset in " + cfg.out_dir.string() + "; run generate and train first");
  const auto corpus = read_dataset(dataset);
  const auto plan = plan_experiments(cfg, corpus);
  ModelStore store;
  for (const auto& job : plan.train) {
    const auto path = model_path(cfg.out_dir, job.key);
    if (fs::exists(path)) store.models.emplace(job.key, load_checkpoint(path));
  }
  if (fs::exists(cfg.out_dir / "pds_scores.csv")) store.pds = read_pds_scores(cfg.out_dir / "pds_scores.csv");
  const auto sets = build_eval_sets(cfg, plan, [&](const EvalJob& j) { return artifact_available(j, store); });
  const auto rep = evaluate_plan(plan, sets, store, cfg.out_dir);
  for (const auto& r : rep.rows) std::printf("%-60s AUC %.4f\n", r.experiment.c_str(), r.auc);
  return 0;
}

int cmd_report(const ExperimentConfig& cfg) {
  const auto rep = read_auc_table(cfg.out_dir / "auc_table.csv");
  write_gnuplot(rep, cfg.out_dir / "plot_roc.gp");
  std::printf("%-22s %-12s %-18s %-18s %8s %9s %9s\n", "cell", "method", "train", "test", "auc", "windows", "attacked");
  for (const auto& r : rep.rows)
    std::printf("%-22s %-12s %-18s %-18s %8.4f %9zu %9zu\n", r.cell.c_str(), r.method.c_str(),
                r.train_set.empty() ? "-" : r.train_set.c_str(), r.test_set.c_str(), r.auc, r.n_windows, r.n_positive);
  std::printf("gnuplot script: %s\n", (cfg.out_dir / "plot_roc.gp").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("gnssfl"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"GNSS spoofing detection with federated LSTM training"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only log warnings and errors");

  CommonFlags gen_flags, train_flags, eval_flags, report_flags;
  auto* gen = app.add_subcommand("generate", "simulate the trace corpus");
  add_common(gen, gen_flags);
  auto* train = app.add_subcommand("train", "train detectors for the configured experiment cells");
  std::string mode;
  train->add_option("mode", mode, "centralized, federated or pds-baseline")
      ->required()
      ->check(CLI::IsMember({"centralized", "federated", "pds-baseline"}));
  add_common(train, train_flags);
  auto* eval = app.add_subcommand("eval", "score trained artifacts: ROC files and auc_table.csv");
  add_common(eval, eval_flags);
  auto* report = app.add_subcommand("report", "print auc_table.csv and write the gnuplot script");
  add_common(report, report_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (gen->parsed()) return cmd_generate(resolve(gen_flags));
    if (train->parsed()) return cmd_train(resolve(train_flags), mode);
    if (eval->parsed()) return cmd_eval(resolve(eval_flags));
    if (report->parsed()) return cmd_report(resolve(report_flags));
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  } catch (const DataError& e) {
    spdlog::error("data: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 4;
  }
  return 4;
}
