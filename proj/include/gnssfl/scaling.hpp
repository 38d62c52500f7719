#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gnssfl/errors.hpp"

namespace gnssfl {

// Empirical quantile with linear interpolation between order statistics:
// h = (n - 1) q, result = x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h]).
inline double percentile(std::span<const double> values, double q) {
  require(!values.empty(), "percentile of empty set");
  require(q >= 0.0 && q <= 1.0, "percentile rank must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline constexpr double kCapQuantile = 0.95;

// Min-max scaling with an optional upper cap applied first. A feature whose
// fitted min equals its max is degenerate and always scales to 0.
struct MinMaxScaler {
  double cap = INFINITY;   // applied before scaling; +inf means no cap
  double min = 0.0;
  double max = 0.0;
  bool degenerate = true;

  double scale(double v) const {
    if (degenerate) return 0.0;
    const double c = std::min(v, cap);
    return std::clamp((c - min) / (max - min), 0.0, 1.0);
  }

  friend bool operator==(const MinMaxScaler&, const MinMaxScaler&) = default;
};

// Fits a scaler on values; with with_cap the cap is the 95th percentile.
inline MinMaxScaler fit_scaler(std::span<const double> values, bool with_cap) {
  require(!values.empty(), "cannot fit scaler on empty data");
  MinMaxScaler s;
  if (with_cap) s.cap = percentile(values, kCapQuantile);
  s.min = INFINITY;
  s.max = -INFINITY;
  for (double v : values) {
    const double c = std::min(v, s.cap);
    s.min = std::min(s.min, c);
    s.max = std::max(s.max, c);
  }
  s.degenerate = !(s.max > s.min);
  return s;
}

// Cap then min-max scale, fitted and applied on the same data.
inline std::vector<double> cap_and_scale(std::span<const double> values) {
  const auto s = fit_scaler(values, true);
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return s.scale(v); });
  return out;
}

}  // namespace gnssfl
