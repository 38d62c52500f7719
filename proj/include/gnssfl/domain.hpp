#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gnssfl/errors.hpp"

namespace gnssfl {

inline constexpr double kEarthRadiusM = 6371000.0;

// WGS-84 latitude/longitude in degrees.
struct GeoPos {
  double lat = 0.0;
  double lon = 0.0;

  bool valid() const { return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0; }
  friend bool operator==(const GeoPos&, const GeoPos&) = default;
};

using Vec3 = std::array<double, 3>;

enum class Constellation : std::size_t { GpsL1 = 0, GalileoE1 = 1 };
enum class SignalProperty : std::size_t { Agc = 0, AntennaCn0 = 1, BasebandCn0 = 2, Doppler = 3 };
enum class Statistic : std::size_t { Mean = 0, Median = 1, Min = 2, Max = 3 };

inline constexpr std::size_t kConstellations = 2;
inline constexpr std::size_t kProperties = 4;
inline constexpr std::size_t kStatistics = 4;
inline constexpr std::size_t kSignalSlots = kConstellations * kProperties * kStatistics;

inline constexpr std::array<std::string_view, kConstellations> kConstellationNames{"gps_l1", "gal_e1"};
inline constexpr std::array<std::string_view, kProperties> kPropertyNames{"agc_db", "ant_cn0_dbhz",
                                                                         "bb_cn0_dbhz", "doppler_hz"};
inline constexpr std::array<std::string_view, kStatistics> kStatisticNames{"mean", "median", "min", "max"};

// Slot order is constellation -> property -> statistic.
constexpr std::size_t signal_slot(Constellation c, SignalProperty p, Statistic s) {
  return static_cast<std::size_t>(c) * kProperties * kStatistics +
         static_cast<std::size_t>(p) * kStatistics + static_cast<std::size_t>(s);
}

constexpr SignalProperty slot_property(std::size_t slot) {
  return static_cast<SignalProperty>((slot / kStatistics) % kProperties);
}

inline std::string signal_slot_name(std::size_t slot) {
  const std::size_t c = slot / (kProperties * kStatistics);
  const std::size_t p = (slot / kStatistics) % kProperties;
  const std::size_t s = slot % kStatistics;
  return std::string(kConstellationNames[c]) + "_" + std::string(kPropertyNames[p]) + "_" +
         std::string(kStatisticNames[s]);
}

// Per-constellation, per-property summary statistics over visible satellites.
// A slot without a value is an invalid or missing measurement.
struct SignalProps {
  std::array<std::optional<double>, kSignalSlots> slots{};

  std::optional<double>& at(Constellation c, SignalProperty p, Statistic s) { return slots[signal_slot(c, p, s)]; }
  const std::optional<double>& at(Constellation c, SignalProperty p, Statistic s) const {
    return slots[signal_slot(c, p, s)];
  }
  friend bool operator==(const SignalProps&, const SignalProps&) = default;
};

// One observation of platform m at time t.
//
// p_true and attacked are oracle-only: they exist for simulation and evaluation.
// Feature extraction, fusion and labeling never read them.
struct PlatformSample {
  std::int64_t platform_id = 1;
  std::int64_t trace_id = 0;
  double t = 0.0;           // s
  GeoPos p_true;            // oracle-only
  GeoPos p_gnss;
  GeoPos p_net;
  double v = 0.0;           // speed, m/s
  Vec3 a{};                 // acceleration in the local level frame (east, north, up), m/s^2
  Vec3 omega{};             // angular rate (roll, pitch, yaw), rad/s
  SignalProps s;
  bool attacked = false;    // oracle-only

  friend bool operator==(const PlatformSample&, const PlatformSample&) = default;
};

struct Trace {
  std::int64_t trace_id = 0;
  std::int64_t platform_id = 1;
  std::vector<PlatformSample> samples;

  std::size_t size() const { return samples.size(); }
  friend bool operator==(const Trace&, const Trace&) = default;
};

// Throws DataError when a trace breaks its invariants.
inline void validate_trace(const Trace& trace) {
  const std::string tag = "trace " + std::to_string(trace.trace_id);
  if (trace.samples.empty()) throw DataError(tag + ": empty");
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto& s = trace.samples[i];
    if (s.trace_id != trace.trace_id || s.platform_id != trace.platform_id)
      throw DataError(tag + ": sample " + std::to_string(i) + " has mismatched ids");
    if (i > 0 && !(s.t > trace.samples[i - 1].t))
      throw DataError(tag + ": timestamps not strictly increasing at sample " + std::to_string(i));
  }
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// Great-circle distance on a sphere of radius kEarthRadiusM.
inline double haversine_m(const GeoPos& a, const GeoPos& b) {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = deg2rad(b.lon - a.lon);
  const double h = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

// Local east/north offsets in meters.
struct EnuOffset {
  double east = 0.0;
  double north = 0.0;
};

// Equirectangular tangent plane anchored at a reference point. Accurate to
// well below a meter over a few kilometers, which covers a town-scale drive.
class LocalFrame {
 public:
  LocalFrame() = default;
  explicit LocalFrame(const GeoPos& anchor) : anchor_(anchor), cos_lat_(std::cos(deg2rad(anchor.lat))) {}

  EnuOffset to_local(const GeoPos& p) const {
    return {deg2rad(p.lon - anchor_.lon) * cos_lat_ * kEarthRadiusM, deg2rad(p.lat - anchor_.lat) * kEarthRadiusM};
  }

  GeoPos to_geo(const EnuOffset& e) const {
    return {anchor_.lat + rad2deg(e.north / kEarthRadiusM), anchor_.lon + rad2deg(e.east / (kEarthRadiusM * cos_lat_))};
  }

  const GeoPos& anchor() const { return anchor_; }

 private:
  GeoPos anchor_{};
  double cos_lat_ = 1.0;
};

// Signed per-axis difference a - b in meters (north, east), evaluated in a
// tangent plane at b. Used for sub-kilometer position residuals.
inline EnuOffset residual_m(const GeoPos& a, const GeoPos& b) { return LocalFrame(b).to_local(a); }

}  // namespace gnssfl
