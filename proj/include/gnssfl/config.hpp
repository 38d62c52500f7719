#pragma once

// Experiment configuration: INI-style file with sections, read through
// boost::property_tree. Precedence, lowest to highest: built-in defaults,
// config file, command-line flags. The output directory is resolved as
// --out, else $GNSSFL_OUT_ROOT/<experiment.name>, else [experiment] out_dir.
//
//   [experiment]  name, seed (required), out_dir, cells
//   [sim]         n_traces, trace_duration_s, sample_rate_hz, attack_fraction,
//                 benign_trace_fraction, device_profile (comma list), offset_model, min_deviation_m,
//                 max_deviation_m, ramp_time_s, mean_attack_s, cn0_uplift_db,
//                 compression, agc_shift_db, multipath_rate_per_hour,
//                 anchor_lat, anchor_lon, partition_mode, test_fraction
//   [profile.N]   overrides for device profile N (model_name, *_db, ...)
//   [fusion]      process_noise, net_meas_noise, initial_sigma
//   [features]    window_length, stride, agc_lo/hi, cn0_lo/hi, doppler_lo/hi
//   [train]       hidden, batch_size, base_learning_rate, max_epochs,
//                 early_stop_patience, min_delta, validation_fraction, clip_norm
//   [federation]  n_clients, rounds, local_epochs, gate, warmup_rounds,
//                 threshold_delta, weighting, gate_eval_max_windows,
//                 checkpoint_every, shuffle_client, shuffle_from_round

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <system_error>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gnssfl/errors.hpp"
#include "gnssfl/features.hpp"
#include "gnssfl/fed.hpp"
#include "gnssfl/fusion.hpp"
#include "gnssfl/simgen.hpp"
#include "gnssfl/train.hpp"

namespace gnssfl {

struct FeatureOptions {
  FeatureConfig ranges;
  std::size_t window_length = 10;
  std::size_t stride = 1;
};

struct FederationOptions {
  FederationConfig loop;
  std::size_t n_clients = 6;
  std::size_t gate_eval_max_windows = 2000;
  std::size_t checkpoint_every = 10;  // 0 disables periodic checkpoints
  std::optional<std::size_t> shuffle_client;
  std::size_t shuffle_from_round = 15;
};

struct ExperimentConfig {
  std::string name = "default";
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "out";
  std::vector<std::string> cells{"same-trace"};
  SimConfig sim;
  FusionConfig fusion;
  FeatureOptions features;
  TrainConfig train;
  std::size_t hidden = 100;
  FederationOptions federation;

  std::uint64_t master_seed() const {
    if (!seed) throw ConfigError("experiment seed is required ([experiment] seed or --seed)");
    return *seed;
  }

  void validate() const {
    master_seed();
    sim.validate();
    fusion.validate();
    train.validate();
    federation.loop.validate();
    if (features.window_length < 1) throw ConfigError("features: window_length must be >= 1");
    if (features.stride < 1) throw ConfigError("features: stride must be >= 1");
    if (hidden < 1) throw ConfigError("train: hidden must be >= 1");
    if (federation.n_clients < 1) throw ConfigError("federation: n_clients must be >= 1");
    for (const auto& c : cells)
      if (c != "same-trace" && c != "per-device" && c != "per-model" && c != "cross-model" && c != "trace-split" &&
          c != "trace-split-per-model")
        throw ConfigError("unknown experiment cell '" + c + "'");
  }

  ModelLayout layout() const { return {kFeatureDim, hidden}; }
};

namespace detail {

// "profile.0.model_name" -> section "profile.0", key "model_name".
inline boost::property_tree::ptree::path_type ini_path(const std::string& key) {
  std::string p = key;
  p[p.rfind('.')] = '/';
  return {p, '/'};
}

inline std::optional<std::string> lookup(const boost::property_tree::ptree& pt, const std::string& key) {
  if (const auto v = pt.get_optional<std::string>(ini_path(key))) return *v;
  return std::nullopt;
}

template <typename T>
void read(const boost::property_tree::ptree& pt, const std::string& key, T& target) {
  const auto v = lookup(pt, key);
  if (!v) return;
  std::string s = boost::trim_copy(*v);
  if constexpr (std::is_same_v<T, bool>) {
    boost::to_lower(s);
    if (s == "true" || s == "1" || s == "yes" || s == "on")
      target = true;
    else if (s == "false" || s == "0" || s == "no" || s == "off")
      target = false;
    else
      throw ConfigError("config key " + key + ": expected a boolean, got '" + s + "'");
  } else if constexpr (std::is_same_v<T, std::string>) {
    target = s;
  } else {
    std::istringstream in(s);
    T value{};
    in >> value;
    if (!in || !in.eof()) throw ConfigError("config key " + key + ": cannot parse '" + s + "'");
    if constexpr (std::is_unsigned_v<T>)
      if (s.starts_with('-')) throw ConfigError("config key " + key + ": must be non-negative");
    target = value;
  }
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  boost::split(out, s, boost::is_any_of(","));
  for (auto& e : out) boost::trim(e);
  std::erase_if(out, [](const std::string& e) { return e.empty(); });
  return out;
}

}  // namespace detail

inline boost::property_tree::ptree to_ptree(const ExperimentConfig& c);

namespace detail {

// Rejects sections and keys the reader does not know; [manifest] is
// informational and skipped.
inline void check_known_keys(const boost::property_tree::ptree& pt) {
  ExperimentConfig reference;
  reference.seed = 0;
  const auto known = to_ptree(reference);
  for (const auto& [section, body] : pt) {
    if (section == "manifest") continue;
    std::string lookup_section = section.starts_with("profile.") ? "profile.0" : section;
    const auto ref = known.get_child_optional(boost::property_tree::ptree::path_type(lookup_section, '/'));
    if (!ref || body.empty()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (section == "experiment" && key == "out_dir") continue;
      if (!ref->get_child_optional(boost::property_tree::ptree::path_type(key, '/')))
        throw ConfigError("unknown config key " + section + "." + key);
    }
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const boost::property_tree::ptree& pt) {
  using detail::read;
  detail::check_known_keys(pt);
  ExperimentConfig c;
  read(pt, "experiment.name", c.name);
  if (detail::lookup(pt, "experiment.seed")) {
    std::uint64_t seed = 0;
    read(pt, "experiment.seed", seed);
    c.seed = seed;
  }
  std::string out;
  read(pt, "experiment.out_dir", out);
  if (!out.empty()) c.out_dir = out;
  if (const auto cells = detail::lookup(pt, "experiment.cells")) c.cells = detail::split_list(*cells);

  auto& sim = c.sim;
  read(pt, "sim.n_traces", sim.n_traces);
  read(pt, "sim.trace_duration_s", sim.trace_duration_s);
  read(pt, "sim.sample_rate_hz", sim.sample_rate_hz);
  read(pt, "sim.attack_fraction", sim.attack_fraction);
  read(pt, "sim.benign_trace_fraction", sim.benign_trace_fraction);
  read(pt, "sim.multipath_rate_per_hour", sim.multipath_rate_per_hour);
  read(pt, "sim.anchor_lat", sim.anchor.lat);
  read(pt, "sim.anchor_lon", sim.anchor.lon);
  read(pt, "sim.test_fraction", sim.test_fraction);
  if (const auto dp = detail::lookup(pt, "sim.device_profile")) {
    sim.device_profile.clear();
    for (const auto& e : detail::split_list(*dp)) {
      try {
        sim.device_profile.push_back(std::stoul(e));
      } catch (const std::exception&) {
        throw ConfigError("config key sim.device_profile: bad entry '" + e + "'");
      }
    }
    sim.n_devices = sim.device_profile.size();
  }
  if (const auto pm = detail::lookup(pt, "sim.partition_mode"))
    sim.partition_mode = parse_partition_mode(boost::trim_copy(*pm));
  auto& atk = sim.attack;
  if (const auto om = detail::lookup(pt, "sim.offset_model")) {
    const auto m = boost::trim_copy(*om);
    if (m == "ramp")
      atk.offset_model = OffsetModel::Ramp;
    else if (m == "step")
      atk.offset_model = OffsetModel::Step;
    else
      throw ConfigError("sim.offset_model must be ramp or step, got '" + m + "'");
  }
  read(pt, "sim.min_deviation_m", atk.min_deviation_m);
  read(pt, "sim.max_deviation_m", atk.max_deviation_m);
  read(pt, "sim.ramp_time_s", atk.ramp_time_s);
  read(pt, "sim.mean_attack_s", atk.mean_attack_s);
  read(pt, "sim.cn0_uplift_db", atk.cn0_uplift_db);
  read(pt, "sim.compression", atk.compression);
  read(pt, "sim.agc_shift_db", atk.agc_shift_db);

  for (const auto& [section, body] : pt) {
    if (!section.starts_with("profile.")) continue;
    std::size_t k = 0;
    const auto idx = section.substr(8);
    const auto r = std::from_chars(idx.data(), idx.data() + idx.size(), k);
    if (r.ec != std::errc{} || r.ptr != idx.data() + idx.size() || k > 64)
      throw ConfigError("bad profile section [" + section + "]");
    while (sim.profiles.size() <= k) {
      DeviceProfile extra;
      extra.model_name = "model-" + std::to_string(sim.profiles.size());
      sim.profiles.push_back(extra);
    }
  }
  for (std::size_t k = 0; k < sim.profiles.size(); ++k) {
    const std::string sec = "profile." + std::to_string(k) + ".";
    auto& p = sim.profiles[k];
    read(pt, sec + "model_name", p.model_name);
    read(pt, sec + "agc_baseline_db", p.agc_baseline_db);
    read(pt, sec + "agc_jitter_db", p.agc_jitter_db);
    read(pt, sec + "cn0_baseline_dbhz", p.cn0_baseline_dbhz);
    read(pt, sec + "cn0_jitter_db", p.cn0_jitter_db);
    read(pt, sec + "doppler_noise_hz", p.doppler_noise_hz);
    read(pt, sec + "net_pos_noise_m", p.net_pos_noise_m);
    read(pt, sec + "gnss_noise_m", p.gnss_noise_m);
    read(pt, sec + "dataset_scale", p.dataset_scale);
    read(pt, sec + "invalid_probability", p.invalid_probability);
  }

  read(pt, "fusion.process_noise", c.fusion.process_noise);
  read(pt, "fusion.net_meas_noise", c.fusion.net_meas_noise);
  read(pt, "fusion.initial_sigma", c.fusion.initial_sigma);

  auto& f = c.features;
  read(pt, "features.window_length", f.window_length);
  read(pt, "features.stride", f.stride);
  read(pt, "features.agc_lo", f.ranges.agc.lo);
  read(pt, "features.agc_hi", f.ranges.agc.hi);
  read(pt, "features.cn0_lo", f.ranges.cn0.lo);
  read(pt, "features.cn0_hi", f.ranges.cn0.hi);
  read(pt, "features.doppler_lo", f.ranges.doppler.lo);
  read(pt, "features.doppler_hi", f.ranges.doppler.hi);

  auto& t = c.train;
  read(pt, "train.hidden", c.hidden);
  read(pt, "train.batch_size", t.batch_size);
  read(pt, "train.base_learning_rate", t.base_learning_rate);
  read(pt, "train.max_epochs", t.max_epochs);
  read(pt, "train.early_stop_patience", t.early_stop_patience);
  read(pt, "train.min_delta", t.min_delta);
  read(pt, "train.validation_fraction", t.validation_fraction);
  read(pt, "train.clip_norm", t.clip_norm);

  auto& fed = c.federation;
  read(pt, "federation.n_clients", fed.n_clients);
  read(pt, "federation.rounds", fed.loop.rounds);
  read(pt, "federation.local_epochs", fed.loop.local_epochs);
  read(pt, "federation.gate", fed.loop.gate_enabled);
  read(pt, "federation.warmup_rounds", fed.loop.warmup_rounds);
  read(pt, "federation.threshold_delta", fed.loop.threshold_delta);
  read(pt, "federation.gate_eval_max_windows", fed.gate_eval_max_windows);
  read(pt, "federation.checkpoint_every", fed.checkpoint_every);
  read(pt, "federation.shuffle_from_round", fed.shuffle_from_round);
  if (detail::lookup(pt, "federation.shuffle_client")) {
    long long client = -1;
    read(pt, "federation.shuffle_client", client);
    if (client >= 0) fed.shuffle_client = static_cast<std::size_t>(client);
  }
  if (const auto w = detail::lookup(pt, "federation.weighting")) {
    const auto m = boost::trim_copy(*w);
    if (m == "samples")
      fed.loop.weighting = Weighting::BySamples;
    else if (m == "uniform")
      fed.loop.weighting = Weighting::Uniform;
    else
      throw ConfigError("federation.weighting must be samples or uniform, got '" + m + "'");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  return parse_config(pt);
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree pt;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  return parse_config(pt);
}

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }
inline std::string fmt(const std::string& v) { return v; }

}  // namespace detail

// Every effective setting as a property tree that parse_config reads back to
// an equal configuration.
inline boost::property_tree::ptree to_ptree(const ExperimentConfig& c) {
  using detail::fmt;
  boost::property_tree::ptree pt;
  auto put = [&pt](const std::string& key, const std::string& value) { pt.put(detail::ini_path(key), value); };
  put("experiment.name", c.name);
  if (c.seed) put("experiment.seed", std::to_string(*c.seed));
  put("experiment.cells", boost::join(c.cells, ","));

  const auto& s = c.sim;
  put("sim.n_traces", fmt(s.n_traces));
  put("sim.trace_duration_s", fmt(s.trace_duration_s));
  put("sim.sample_rate_hz", fmt(s.sample_rate_hz));
  put("sim.attack_fraction", fmt(s.attack_fraction));
  put("sim.benign_trace_fraction", fmt(s.benign_trace_fraction));
  std::vector<std::string> dp;
  for (auto k : s.device_profile) dp.push_back(std::to_string(k));
  put("sim.device_profile", boost::join(dp, ","));
  put("sim.offset_model", s.attack.offset_model == OffsetModel::Ramp ? "ramp" : "step");
  put("sim.min_deviation_m", fmt(s.attack.min_deviation_m));
  put("sim.max_deviation_m", fmt(s.attack.max_deviation_m));
  put("sim.ramp_time_s", fmt(s.attack.ramp_time_s));
  put("sim.mean_attack_s", fmt(s.attack.mean_attack_s));
  put("sim.cn0_uplift_db", fmt(s.attack.cn0_uplift_db));
  put("sim.compression", fmt(s.attack.compression));
  put("sim.agc_shift_db", fmt(s.attack.agc_shift_db));
  put("sim.multipath_rate_per_hour", fmt(s.multipath_rate_per_hour));
  put("sim.anchor_lat", fmt(s.anchor.lat));
  put("sim.anchor_lon", fmt(s.anchor.lon));
  put("sim.partition_mode", to_string(s.partition_mode));
  put("sim.test_fraction", fmt(s.test_fraction));
  for (std::size_t k = 0; k < s.profiles.size(); ++k) {
    const auto& p = s.profiles[k];
    const std::string sec = "profile." + std::to_string(k) + ".";
    put(sec + "model_name", p.model_name);
    put(sec + "agc_baseline_db", fmt(p.agc_baseline_db));
    put(sec + "agc_jitter_db", fmt(p.agc_jitter_db));
    put(sec + "cn0_baseline_dbhz", fmt(p.cn0_baseline_dbhz));
    put(sec + "cn0_jitter_db", fmt(p.cn0_jitter_db));
    put(sec + "doppler_noise_hz", fmt(p.doppler_noise_hz));
    put(sec + "net_pos_noise_m", fmt(p.net_pos_noise_m));
    put(sec + "gnss_noise_m", fmt(p.gnss_noise_m));
    put(sec + "dataset_scale", fmt(p.dataset_scale));
    put(sec + "invalid_probability", fmt(p.invalid_probability));
  }

  put("fusion.process_noise", fmt(c.fusion.process_noise));
  put("fusion.net_meas_noise", fmt(c.fusion.net_meas_noise));
  put("fusion.initial_sigma", fmt(c.fusion.initial_sigma));

  const auto& f = c.features;
  put("features.window_length", fmt(f.window_length));
  put("features.stride", fmt(f.stride));
  put("features.agc_lo", fmt(f.ranges.agc.lo));
  put("features.agc_hi", fmt(f.ranges.agc.hi));
  put("features.cn0_lo", fmt(f.ranges.cn0.lo));
  put("features.cn0_hi", fmt(f.ranges.cn0.hi));
  put("features.doppler_lo", fmt(f.ranges.doppler.lo));
  put("features.doppler_hi", fmt(f.ranges.doppler.hi));

  const auto& t = c.train;
  put("train.hidden", fmt(c.hidden));
  put("train.batch_size", fmt(t.batch_size));
  put("train.base_learning_rate", fmt(t.base_learning_rate));
  put("train.max_epochs", fmt(t.max_epochs));
  put("train.early_stop_patience", fmt(t.early_stop_patience));
  put("train.min_delta", fmt(t.min_delta));
  put("train.validation_fraction", fmt(t.validation_fraction));
  put("train.clip_norm", fmt(t.clip_norm));

  const auto& fed = c.federation;
  put("federation.n_clients", fmt(fed.n_clients));
  put("federation.rounds", fmt(fed.loop.rounds));
  put("federation.local_epochs", fmt(fed.loop.local_epochs));
  put("federation.gate", fmt(fed.loop.gate_enabled));
  put("federation.warmup_rounds", fmt(fed.loop.warmup_rounds));
  put("federation.threshold_delta", fmt(fed.loop.threshold_delta));
  put("federation.weighting", fed.loop.weighting == Weighting::BySamples ? "samples" : "uniform");
  put("federation.gate_eval_max_windows", fmt(fed.gate_eval_max_windows));
  put("federation.checkpoint_every", fmt(fed.checkpoint_every));
  put("federation.shuffle_client", fed.shuffle_client ? fmt(*fed.shuffle_client) : "-1");
  put("federation.shuffle_from_round", fmt(fed.shuffle_from_round));
  return pt;
}

// Canonical INI text of the effective configuration; loadable as a config
// file and the input of the config hash.
inline std::string canonical_config(const ExperimentConfig& c) {
  std::ostringstream o;
  boost::property_tree::ini_parser::write_ini(o, to_ptree(c));
  return o.str();
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  std::ostringstream o;
  o << std::hex;
  o.width(16);
  o.fill('0');
  o << fnv1a64(canonical_config(c));
  return o.str();
}

// Applies the output-root environment override when no --out flag was given.
inline void resolve_out_dir(ExperimentConfig& c, const std::optional<std::filesystem::path>& flag) {
  if (flag) {
    c.out_dir = *flag;
  } else if (const char* root = std::getenv("GNSSFL_OUT_ROOT"); root && *root) {
    c.out_dir = std::filesystem::path(root) / c.name;
  }
}

}  // namespace gnssfl
