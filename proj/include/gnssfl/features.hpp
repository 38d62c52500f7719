#pragma once

// 36-element model input.
//
// Index  0..1   signed residual mu - p_gnss along lat (north) and lon (east), m
// Index  2..3   fused position std along lat and lon, m
// Index  4..35  signal statistics, slot order constellation -> property ->
//               statistic (see signal_slot), e.g. 4..7 = GPS L1 AGC
//               mean/median/min/max.
//
// Normalization is fitted on one party's local data. Position features are
// capped at the 95th percentile of their magnitude (sign kept); invalid signal
// values are replaced by the lower end of the property's valid range; then
// every feature is min-max scaled to [0, 1] and clamped.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gnssfl/domain.hpp"
#include "gnssfl/errors.hpp"
#include "gnssfl/fusion.hpp"
#include "gnssfl/scaling.hpp"

namespace gnssfl {

inline constexpr std::size_t kPositionFeatures = 4;
inline constexpr std::size_t kFeatureDim = kPositionFeatures + kSignalSlots;
static_assert(kFeatureDim == 36);

constexpr std::size_t feature_index(Constellation c, SignalProperty p, Statistic s) {
  return kPositionFeatures + signal_slot(c, p, s);
}

using FeatureVector = std::array<float, kFeatureDim>;

struct RawFeatureVector {
  std::array<double, kFeatureDim> values{};
  std::array<bool, kFeatureDim> invalid{};  // marked for replacement
};

struct ValidRange {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return std::isfinite(v) && v >= lo && v <= hi; }
};

struct FeatureConfig {
  ValidRange agc{-100.0, 100.0};       // dB
  ValidRange cn0{0.0, 64.0};           // dB-Hz, antenna and baseband
  ValidRange doppler{-10000.0, 10000.0};  // Hz

  const ValidRange& range_for(SignalProperty p) const {
    switch (p) {
      case SignalProperty::Agc: return agc;
      case SignalProperty::AntennaCn0:
      case SignalProperty::BasebandCn0: return cn0;
      case SignalProperty::Doppler: return doppler;
    }
    return agc;
  }
};

inline std::vector<RawFeatureVector> extract_raw(const Trace& trace, std::span<const FusedEstimate> fused,
                                                 const FeatureConfig& cfg = {}) {
  require(trace.samples.size() == fused.size(), "extract_raw: fused estimates must align with samples");
  std::vector<RawFeatureVector> out(fused.size());
  for (std::size_t i = 0; i < fused.size(); ++i) {
    const auto& s = trace.samples[i];
    auto& r = out[i];
    const EnuOffset res = residual_m(fused[i].mu, s.p_gnss);
    r.values[0] = res.north;
    r.values[1] = res.east;
    r.values[2] = fused[i].sigma[0];
    r.values[3] = fused[i].sigma[1];
    for (std::size_t slot = 0; slot < kSignalSlots; ++slot) {
      const auto& v = s.s.slots[slot];
      const std::size_t f = kPositionFeatures + slot;
      if (v && cfg.range_for(slot_property(slot)).contains(*v)) {
        r.values[f] = *v;
      } else {
        r.invalid[f] = true;
        r.values[f] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return out;
}

struct FeatureScaler {
  double abs_cap = INFINITY;  // position features: cap on |x|, sign preserved
  double replacement = 0.0;   // signal features: value used for invalid entries
  double min = 0.0;
  double max = 0.0;
  bool degenerate = true;

  double prepare(double v, bool invalid) const {
    if (invalid) return replacement;
    if (std::abs(v) > abs_cap) return std::copysign(abs_cap, v);
    return v;
  }

  double scale(double v, bool invalid) const {
    if (degenerate) return 0.0;
    return std::clamp((prepare(v, invalid) - min) / (max - min), 0.0, 1.0);
  }

  friend bool operator==(const FeatureScaler&, const FeatureScaler&) = default;
};

struct NormalizationState {
  std::array<FeatureScaler, kFeatureDim> features{};
  friend bool operator==(const NormalizationState&, const NormalizationState&) = default;
};

inline NormalizationState fit_normalization(std::span<const RawFeatureVector> raw, const FeatureConfig& cfg = {}) {
  if (raw.empty()) throw DataError("fit_normalization: empty training set");
  NormalizationState st;
  std::vector<double> column(raw.size());
  for (std::size_t f = 0; f < kFeatureDim; ++f) {
    auto& sc = st.features[f];
    if (f < kPositionFeatures) {
      for (std::size_t i = 0; i < raw.size(); ++i) column[i] = std::abs(raw[i].values[f]);
      sc.abs_cap = percentile(column, kCapQuantile);
    } else {
      sc.replacement = cfg.range_for(slot_property(f - kPositionFeatures)).lo;
    }
    sc.min = INFINITY;
    sc.max = -INFINITY;
    for (const auto& r : raw) {
      const double v = sc.prepare(r.values[f], r.invalid[f]);
      sc.min = std::min(sc.min, v);
      sc.max = std::max(sc.max, v);
    }
    sc.degenerate = !(sc.max > sc.min);
  }
  return st;
}

inline FeatureVector normalize(const RawFeatureVector& r, const NormalizationState& st) {
  FeatureVector fv{};
  for (std::size_t f = 0; f < kFeatureDim; ++f)
    fv[f] = static_cast<float>(st.features[f].scale(r.values[f], r.invalid[f]));
  return fv;
}

inline std::vector<FeatureVector> apply_normalization(std::span<const RawFeatureVector> raw,
                                                      const NormalizationState& st) {
  std::vector<FeatureVector> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(normalize(r, st));
  return out;
}

// Sidecar text format: one line per feature
//   <index> <abs_cap> <replacement> <min> <max> <degenerate>
// with doubles printed at round-trip precision ("inf" for no cap).
inline void save_normalization(const NormalizationState& st, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write normalization state: " + path.string());
  out << "gnssfl-normalization v1 " << kFeatureDim << '\n';
  out << std::setprecision(17);
  for (std::size_t f = 0; f < kFeatureDim; ++f) {
    const auto& s = st.features[f];
    out << f << ' ' << s.abs_cap << ' ' << s.replacement << ' ' << s.min << ' ' << s.max << ' '
        << (s.degenerate ? 1 : 0) << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

inline NormalizationState load_normalization(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read normalization state: " + path.string());
  std::string magic, version;
  std::size_t dim = 0;
  in >> magic >> version >> dim;
  if (magic != "gnssfl-normalization" || version != "v1" || dim != kFeatureDim)
    throw DataError("bad normalization header in " + path.string());
  NormalizationState st;
  auto read_double = [&](double& d) {
    std::string tok;
    in >> tok;
    if (tok == "inf")
      d = INFINITY;
    else if (tok == "-inf")
      d = -INFINITY;
    else
      d = std::stod(tok);
  };
  for (std::size_t f = 0; f < kFeatureDim; ++f) {
    std::size_t idx = 0;
    int deg = 0;
    in >> idx;
    auto& s = st.features[f];
    read_double(s.abs_cap);
    read_double(s.replacement);
    read_double(s.min);
    read_double(s.max);
    in >> deg;
    if (!in || idx != f) throw DataError("bad normalization record " + std::to_string(f) + " in " + path.string());
    s.degenerate = deg != 0;
  }
  return st;
}

// Sliding windows over one or more traces, stored contiguously as
// [window][timestep][feature]. A window never spans two traces and its target
// is the label of its last timestep.
struct WindowSet {
  std::size_t length = 0;  // timesteps per window
  std::vector<float> data;
  std::vector<float> targets;
  std::vector<std::int64_t> trace_ids;
  std::vector<std::size_t> last_sample;  // index of the last timestep within its trace

  explicit WindowSet(std::size_t window_length = 0) : length(window_length) {}

  std::size_t size() const { return targets.size(); }
  bool empty() const { return targets.empty(); }
  std::size_t stride_floats() const { return length * kFeatureDim; }

  std::span<const float> sequence(std::size_t i) const {
    return std::span<const float>(data).subspan(i * stride_floats(), stride_floats());
  }

  void push(std::span<const float> seq, float target, std::int64_t trace_id, std::size_t last) {
    data.insert(data.end(), seq.begin(), seq.end());
    targets.push_back(target);
    trace_ids.push_back(trace_id);
    last_sample.push_back(last);
  }

  void append(const WindowSet& other) {
    require(other.empty() || empty() || other.length == length, "WindowSet::append: window length mismatch");
    if (empty()) length = other.length;
    data.insert(data.end(), other.data.begin(), other.data.end());
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
    trace_ids.insert(trace_ids.end(), other.trace_ids.begin(), other.trace_ids.end());
    last_sample.insert(last_sample.end(), other.last_sample.begin(), other.last_sample.end());
  }

  WindowSet subset(std::span<const std::size_t> idx) const {
    WindowSet out(length);
    out.data.reserve(idx.size() * stride_floats());
    for (std::size_t i : idx) out.push(sequence(i), targets[i], trace_ids[i], last_sample[i]);
    return out;
  }
};

// Appends the windows of one trace; returns how many were produced (0 when
// the trace is shorter than the window).
inline std::size_t append_windows(WindowSet& out, std::span<const FeatureVector> features,
                                  std::span<const double> labels, std::int64_t trace_id, std::size_t stride = 1) {
  require(out.length >= 1, "window length must be >= 1");
  require(stride >= 1, "window stride must be >= 1");
  require(features.size() == labels.size(), "features and labels must align");
  const std::size_t w = out.length;
  if (features.size() < w) return 0;
  std::vector<float> seq(w * kFeatureDim);
  std::size_t produced = 0;
  for (std::size_t end = w - 1; end < features.size(); end += stride) {
    for (std::size_t k = 0; k < w; ++k) {
      const auto& fv = features[end + 1 - w + k];
      std::copy(fv.begin(), fv.end(), seq.begin() + static_cast<std::ptrdiff_t>(k * kFeatureDim));
    }
    out.push(seq, static_cast<float>(labels[end]), trace_id, end);
    ++produced;
  }
  return produced;
}

}  // namespace gnssfl
