#pragma once

// Self-supervised regression targets: the fused-vs-GNSS deviation, capped at
// the 95th percentile of the local dataset and min-max scaled to [0, 1].
// Only p_gnss and the fused estimate are read.

#include <span>
#include <vector>

#include "gnssfl/domain.hpp"
#include "gnssfl/errors.hpp"
#include "gnssfl/fusion.hpp"
#include "gnssfl/scaling.hpp"

namespace gnssfl {

struct LabelSeries {
  std::vector<double> values;
  MinMaxScaler scaler;  // cap_value = scaler.cap, plus min/max

  double cap_value() const { return scaler.cap; }
};

// Fits cap/min/max over all deviations of a party's traces pooled together.
inline MinMaxScaler fit_label_scaler(std::span<const Trace> traces,
                                     std::span<const std::vector<FusedEstimate>> fused) {
  require(traces.size() == fused.size(), "fit_label_scaler: one fused series per trace");
  std::vector<double> pooled;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const auto d = gnss_deviation_m(traces[k], fused[k]);
    pooled.insert(pooled.end(), d.begin(), d.end());
  }
  if (pooled.empty()) throw DataError("fit_label_scaler: no samples");
  return fit_scaler(pooled, true);
}

inline LabelSeries generate_labels(const Trace& trace, std::span<const FusedEstimate> fused,
                                   const MinMaxScaler& scaler) {
  LabelSeries out;
  out.scaler = scaler;
  const auto d = gnss_deviation_m(trace, fused);
  out.values.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out.values[i] = scaler.scale(d[i]);
  return out;
}

// Single trace treated as the whole local dataset.
inline LabelSeries generate_labels(const Trace& trace, std::span<const FusedEstimate> fused) {
  const auto d = gnss_deviation_m(trace, fused);
  if (d.empty()) throw DataError("generate_labels: empty trace");
  return generate_labels(trace, fused, fit_scaler(d, true));
}

// Labels for a party's dataset with statistics pooled over all its traces.
inline std::vector<LabelSeries> generate_labels(std::span<const Trace> traces,
                                                std::span<const std::vector<FusedEstimate>> fused) {
  const auto scaler = fit_label_scaler(traces, fused);
  std::vector<LabelSeries> out;
  out.reserve(traces.size());
  for (std::size_t k = 0; k < traces.size(); ++k) out.push_back(generate_labels(traces[k], fused[k], scaler));
  return out;
}

}  // namespace gnssfl
