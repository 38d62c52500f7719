#pragma once

// GNSS-independent reference position.
//
// A linear Kalman filter per horizontal axis tracks (position, velocity) in a
// tangent plane anchored at the first network fix of the trace. Acceleration
// drives the prediction, the network position is the only measurement, and
// speed / angular rate only modulate the process noise. The GNSS position is
// never read, so the estimate cannot be pulled by a spoofer.

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "gnssfl/domain.hpp"
#include "gnssfl/errors.hpp"
#include "gnssfl/scaling.hpp"

namespace gnssfl {

struct FusionConfig {
  double process_noise = 0.5;    // acceleration noise std, m/s^2
  double net_meas_noise = 20.0;  // network position std, m
  double initial_sigma = 50.0;   // initial position std, m

  void validate() const {
    if (!(process_noise > 0.0) || !(net_meas_noise > 0.0) || !(initial_sigma > 0.0))
      throw ConfigError("fusion config: all noise parameters must be strictly positive");
  }
};

struct FusedEstimate {
  GeoPos mu;
  std::array<double, 2> sigma{};  // std in meters along (lat, lon) axes
};

namespace detail {

struct AxisFilter {
  double pos = 0.0;
  double vel = 0.0;
  double p00 = 0.0, p01 = 0.0, p11 = 0.0;

  void predict(double dt, double accel, double q) {
    pos += vel * dt + 0.5 * accel * dt * dt;
    vel += accel * dt;
    const double dt2 = dt * dt;
    const double n00 = p00 + dt * (2.0 * p01 + dt * p11) + q * dt2 * dt2 / 4.0;
    const double n01 = p01 + dt * p11 + q * dt2 * dt / 2.0;
    const double n11 = p11 + q * dt2;
    p00 = n00;
    p01 = n01;
    p11 = n11;
  }

  void update(double z, double r) {
    const double s = p00 + r;
    const double k0 = p00 / s;
    const double k1 = p01 / s;
    const double innov = z - pos;
    pos += k0 * innov;
    vel += k1 * innov;
    const double n00 = (1.0 - k0) * p00;
    const double n01 = (1.0 - k0) * p01;
    const double n11 = p11 - k1 * p01;
    p00 = n00;
    p01 = n01;
    p11 = n11;
  }
};

// Turning and standstill change how well the constant-velocity model holds.
inline double adapted_accel_variance(const PlatformSample& s, double accel_std) {
  double scale = 1.0 + std::abs(s.omega[2]);
  if (s.v < 0.5) scale *= 0.25;
  return accel_std * accel_std * scale;
}

}  // namespace detail

inline std::vector<FusedEstimate> fuse_trace(const Trace& trace, const FusionConfig& cfg) {
  require(!trace.samples.empty(), "fuse_trace: empty trace");
  cfg.validate();

  const LocalFrame frame(trace.samples.front().p_net);
  const double r = cfg.net_meas_noise * cfg.net_meas_noise;
  // Initial per-axis velocity std: the measured speed bounds each component.
  const double v0 = trace.samples.front().v;

  detail::AxisFilter north, east;
  for (auto* f : {&north, &east}) {
    f->p00 = cfg.initial_sigma * cfg.initial_sigma;
    f->p11 = v0 * v0;
  }

  std::vector<FusedEstimate> out;
  out.reserve(trace.samples.size());
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto& s = trace.samples[i];
    if (i > 0) {
      const double dt = s.t - trace.samples[i - 1].t;
      const double q = detail::adapted_accel_variance(s, cfg.process_noise);
      east.predict(dt, s.a[0], q);
      north.predict(dt, s.a[1], q);
    }
    const EnuOffset z = frame.to_local(s.p_net);
    east.update(z.east, r);
    north.update(z.north, r);
    out.push_back(FusedEstimate{frame.to_geo({east.pos, north.pos}), {std::sqrt(north.p00), std::sqrt(east.p00)}});
  }
  return out;
}

// Distance between fused and GNSS position for every sample, meters.
inline std::vector<double> gnss_deviation_m(const Trace& trace, std::span<const FusedEstimate> fused) {
  require(trace.samples.size() == fused.size(), "fused estimates must align with trace samples");
  std::vector<double> d(fused.size());
  for (std::size_t i = 0; i < fused.size(); ++i) d[i] = haversine_m(fused[i].mu, trace.samples[i].p_gnss);
  return d;
}

// Baseline detector: the normalized GNSS deviation of the trace, capped at its
// 95th percentile and min-max scaled. A trace whose deviations are all equal
// scores 0 everywhere.
inline std::vector<double> pds_score(const Trace& trace, std::span<const FusedEstimate> fused) {
  return cap_and_scale(gnss_deviation_m(trace, fused));
}

}  // namespace gnssfl
