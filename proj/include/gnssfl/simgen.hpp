#pragma once

// Synthetic multi-device driving dataset with injected GNSS spoofing.
//
// Each trace is one drive by one device. The vehicle follows a Catmull-Rom
// spline through random waypoints with a smooth speed profile (<= 25 m/s),
// integrated at 10 Hz and sampled at the configured rate. Network positions
// carry correlated device-dependent noise; benign GNSS positions carry small
// correlated noise. During an attack interval the GNSS position is dragged
// away from the truth (ramp or step) and the per-satellite signal values are
// pulled together, raised in power and shifted in AGC.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gnssfl/domain.hpp"
#include "gnssfl/errors.hpp"

namespace gnssfl {

struct DeviceProfile {
  std::string model_name;
  double agc_baseline_db = 40.0;
  double agc_jitter_db = 0.8;
  double cn0_baseline_dbhz = 32.0;
  double cn0_jitter_db = 1.5;
  double doppler_noise_hz = 2.0;
  double net_pos_noise_m = 20.0;
  double gnss_noise_m = 3.0;
  double dataset_scale = 1.0;     // relative sample volume
  double invalid_probability = 0.02;  // per signal slot and sample

  void validate() const {
    if (agc_jitter_db < 0 || cn0_jitter_db < 0 || doppler_noise_hz < 0 || net_pos_noise_m < 0 || gnss_noise_m < 0)
      throw ConfigError("device profile " + model_name + ": jitters must be >= 0");
    if (gnss_noise_m > 5.0) throw ConfigError("device profile " + model_name + ": benign GNSS noise must be <= 5 m");
    if (!(dataset_scale > 0)) throw ConfigError("device profile " + model_name + ": dataset_scale must be > 0");
    if (invalid_probability < 0 || invalid_probability > 1)
      throw ConfigError("device profile " + model_name + ": invalid_probability must lie in [0, 1]");
  }
};

// Three model families. The first has about 1.58x the data volume of the
// second, mirroring the volume asymmetry between the larger and smaller phone
// models of the reference campaign; all signal baselines are invented.
inline std::vector<DeviceProfile> default_profiles() {
  DeviceProfile a{"model-a", 42.0, 0.8, 33.0, 1.5, 2.0, 20.0, 3.0, (9899.0 + 10626.0) / (6238.0 + 6734.0), 0.01};
  DeviceProfile b{"model-b", 31.0, 1.2, 27.0, 2.5, 3.0, 30.0, 4.0, 1.0, 0.03};
  DeviceProfile c{"model-c", 36.0, 1.0, 30.0, 2.0, 2.5, 25.0, 3.5, 1.2, 0.05};
  return {a, b, c};
}

enum class OffsetModel { Ramp, Step };

struct AttackScenario {
  OffsetModel offset_model = OffsetModel::Ramp;
  double min_deviation_m = 15.0;   // each attack draws its max deviation uniformly from [min, max]
  double max_deviation_m = 250.0;
  double ramp_time_s = 30.0;       // ramp: linear drift to max deviation, then hold
  double mean_attack_s = 120.0;
  double cn0_uplift_db = 2.0;
  double compression = 0.7;        // cross-satellite spread multiplier in (0, 1]
  double agc_shift_db = -1.0;
  // Explicit per-trace schedule (trace index -> intervals, seconds from trace
  // start). When a trace has an entry it replaces the random schedule.
  std::map<std::size_t, std::vector<std::pair<double, double>>> intervals;

  void validate() const {
    if (!(min_deviation_m >= 0 && max_deviation_m >= min_deviation_m))
      throw ConfigError("attack scenario: need 0 <= min_deviation <= max_deviation");
    if (!(ramp_time_s > 0) || !(mean_attack_s > 0)) throw ConfigError("attack scenario: durations must be > 0");
    if (!(compression > 0 && compression <= 1)) throw ConfigError("attack scenario: compression must lie in (0, 1]");
  }
};

enum class PartitionMode { Iid, NonIidByDevice, NonIidByTrace };

inline PartitionMode parse_partition_mode(const std::string& s) {
  if (s == "iid") return PartitionMode::Iid;
  if (s == "non-iid-by-device") return PartitionMode::NonIidByDevice;
  if (s == "non-iid-by-trace") return PartitionMode::NonIidByTrace;
  throw ConfigError("unknown partition mode '" + s + "' (iid | non-iid-by-device | non-iid-by-trace)");
}

inline std::string to_string(PartitionMode m) {
  switch (m) {
    case PartitionMode::Iid: return "iid";
    case PartitionMode::NonIidByDevice: return "non-iid-by-device";
    case PartitionMode::NonIidByTrace: return "non-iid-by-trace";
  }
  return "iid";
}

struct SimConfig {
  std::size_t n_devices = 6;
  std::vector<std::size_t> device_profile{0, 0, 1, 1, 2, 2};  // profile index per device
  std::vector<DeviceProfile> profiles = default_profiles();
  std::size_t n_traces = 40;
  double trace_duration_s = 600.0;  // for a device with the mean dataset_scale
  double sample_rate_hz = 1.0;
  double attack_fraction = 0.2;      // of the total recorded time
  double benign_trace_fraction = 0.25;  // traces recorded while no attack was scheduled
  AttackScenario attack;
  double multipath_rate_per_hour = 0.0;  // benign GNSS excursions; 0 keeps benign noise <= 5 m
  GeoPos anchor{69.27, 15.96};
  std::uint64_t rng_seed = 1;
  PartitionMode partition_mode = PartitionMode::Iid;
  double test_fraction = 0.1;

  void validate() const {
    if (n_devices < 1) throw ConfigError("sim config: n_devices must be >= 1");
    if (device_profile.size() != n_devices)
      throw ConfigError("sim config: device_profile must list one profile per device");
    for (auto p : device_profile)
      if (p >= profiles.size()) throw ConfigError("sim config: device profile index out of range");
    for (const auto& p : profiles) p.validate();
    if (n_traces < 1) throw ConfigError("sim config: n_traces must be >= 1");
    if (!(trace_duration_s > 0) || !(sample_rate_hz > 0)) throw ConfigError("sim config: duration and rate must be > 0");
    if (!(attack_fraction >= 0 && attack_fraction <= 1)) throw ConfigError("sim config: attack fraction must lie in [0, 1]");
    if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("sim config: test_fraction must lie in (0, 1)");
    if (!(benign_trace_fraction >= 0 && benign_trace_fraction < 1))
      throw ConfigError("sim config: benign_trace_fraction must lie in [0, 1)");
    attack.validate();
  }

  const DeviceProfile& profile_of_device(std::size_t device) const { return profiles[device_profile[device]]; }
};

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace detail {

struct Point2 {
  double x = 0, y = 0;  // east, north
};

inline Point2 catmull_rom(const Point2& p0, const Point2& p1, const Point2& p2, const Point2& p3, double u) {
  const double u2 = u * u, u3 = u2 * u;
  auto f = [&](double a, double b, double c, double d) {
    return 0.5 * (2 * b + (-a + c) * u + (2 * a - 5 * b + 4 * c - d) * u2 + (-a + 3 * b - 3 * c + d) * u3);
  };
  return {f(p0.x, p1.x, p2.x, p3.x), f(p0.y, p1.y, p2.y, p3.y)};
}

// Dense polyline of a Catmull-Rom spline with cumulative arc length.
struct Path {
  std::vector<Point2> pts;
  std::vector<double> arc;

  Point2 at(double s) const {
    if (s <= 0) return pts.front();
    if (s >= arc.back()) return pts.back();
    const auto it = std::upper_bound(arc.begin(), arc.end(), s);
    const auto i = static_cast<std::size_t>(it - arc.begin());
    const double w = (s - arc[i - 1]) / (arc[i] - arc[i - 1]);
    return {pts[i - 1].x + w * (pts[i].x - pts[i - 1].x), pts[i - 1].y + w * (pts[i].y - pts[i - 1].y)};
  }
};

inline Path make_path(std::mt19937_64& rng, double min_length) {
  std::uniform_real_distribution<double> start(-1500.0, 1500.0);
  std::uniform_real_distribution<double> leg(200.0, 500.0);
  std::normal_distribution<double> turn(0.0, 0.8);
  std::uniform_real_distribution<double> heading0(0.0, 2 * std::numbers::pi);
  std::vector<Point2> way{{start(rng), start(rng)}};
  double heading = heading0(rng);
  double total = 0.0;
  // Two extra legs so the spline covers min_length between interior points.
  while (total < min_length + 1200.0 || way.size() < 4) {
    heading += turn(rng);
    const double d = leg(rng);
    way.push_back({way.back().x + d * std::cos(heading), way.back().y + d * std::sin(heading)});
    total += d;
  }
  Path path;
  const int per_seg = 40;
  for (std::size_t k = 1; k + 2 < way.size(); ++k)
    for (int j = 0; j < per_seg; ++j)
      path.pts.push_back(catmull_rom(way[k - 1], way[k], way[k + 1], way[k + 2], static_cast<double>(j) / per_seg));
  path.pts.push_back(way[way.size() - 2]);
  path.arc.assign(path.pts.size(), 0.0);
  for (std::size_t i = 1; i < path.pts.size(); ++i)
    path.arc[i] = path.arc[i - 1] + std::hypot(path.pts[i].x - path.pts[i - 1].x, path.pts[i].y - path.pts[i - 1].y);
  return path;
}

// First-order autoregressive noise with stationary std `sigma` and
// per-step correlation `phi`.
class Ar1 {
 public:
  Ar1(double sigma, double phi) : phi_(phi), innov_(sigma * std::sqrt(1 - phi * phi)), sigma_(sigma) {}
  double start(std::mt19937_64& rng) {
    value_ = std::normal_distribution<double>(0.0, sigma_)(rng);
    return value_;
  }
  double next(std::mt19937_64& rng) {
    value_ = phi_ * value_ + std::normal_distribution<double>(0.0, innov_)(rng);
    return value_;
  }

 private:
  double phi_, innov_, sigma_, value_ = 0.0;
};

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct SatState {
  double cn0_offset = 0.0;
  double doppler_base = 0.0;
  double doppler_rate = 0.0;
  double los_east = 0.0, los_north = 0.0;  // horizontal line-of-sight projection
};

}  // namespace detail

// Non-overlapping attack intervals [start, end) in seconds from trace start
// covering round(fraction * duration) seconds in total.
inline std::vector<std::pair<double, double>> schedule_attacks(std::mt19937_64& rng, double duration,
                                                               double fraction, double mean_attack_s) {
  const double total = std::round(fraction * duration);
  if (total <= 0) return {};
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(total / mean_attack_s)));
  const double free = duration - total;
  std::uniform_real_distribution<double> u(0.0, free);
  std::vector<double> cuts(n);
  for (auto& c : cuts) c = std::round(u(rng));
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::pair<double, double>> out;
  double used = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double len = k + 1 < n ? std::round(total / static_cast<double>(n)) : total - used;
    const double start = cuts[k] + used;
    out.emplace_back(start, start + len);
    used += len;
  }
  return out;
}

// Attack share of one trace. round(benign_trace_fraction * n_traces) traces,
// picked by a seeded permutation, are attack-free; the others carry the
// scaled-up share so the corpus keeps attack_fraction overall.
inline double trace_attack_fraction(const SimConfig& cfg, std::size_t trace_index) {
  const std::size_t n = cfg.n_traces;
  const auto n_benign = std::min(n - 1, static_cast<std::size_t>(std::floor(cfg.benign_trace_fraction * n + 0.5)));
  if (n_benign == 0) return cfg.attack_fraction;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(cfg.rng_seed, 0xBE9167ULL));
  std::shuffle(order.begin(), order.end(), rng);
  const auto pos = std::find(order.begin(), order.end(), trace_index) - order.begin();
  if (static_cast<std::size_t>(pos) < n_benign) return 0.0;
  return std::min(1.0, cfg.attack_fraction * static_cast<double>(n) / static_cast<double>(n - n_benign));
}

inline Trace generate_trace(const SimConfig& cfg, std::size_t trace_index) {
  std::mt19937_64 rng(derive_seed(cfg.rng_seed, trace_index));
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const std::size_t device = trace_index % cfg.n_devices;
  const DeviceProfile& prof = cfg.profile_of_device(device);
  double mean_scale = 0.0;
  for (std::size_t d = 0; d < cfg.n_devices; ++d) mean_scale += cfg.profile_of_device(d).dataset_scale;
  mean_scale /= static_cast<double>(cfg.n_devices);
  const double duration = std::round(cfg.trace_duration_s * prof.dataset_scale / mean_scale);
  const double dt = 1.0 / cfg.sample_rate_hz;
  const auto n_samples = static_cast<std::size_t>(std::max(1.0, std::floor(duration * cfg.sample_rate_hz)));

  // Speed profile at 10 Hz: piecewise targets with bounded acceleration.
  const double fine = 0.1;
  const auto n_fine = static_cast<std::size_t>(std::ceil((static_cast<double>(n_samples) * dt + 2.0) / fine)) + 1;
  std::vector<double> speed(n_fine), dist(n_fine);
  double v = 8.0 + 6.0 * u01(rng), target = v;
  for (std::size_t i = 0; i < n_fine; ++i) {
    if (i % 450 == 0) target = u01(rng) < 0.1 ? 0.0 : 6.0 + 16.0 * u01(rng);
    const double dv = std::clamp(target - v, -2.0 * fine, 1.5 * fine);
    v = std::clamp(v + dv, 0.0, 25.0);
    speed[i] = v;
    dist[i] = i == 0 ? 0.0 : dist[i - 1] + 0.5 * (speed[i - 1] + speed[i]) * fine;
  }
  const auto path = detail::make_path(rng, dist.back());
  auto pos_at = [&](std::size_t i) { return path.at(dist[std::min(i, n_fine - 1)]); };
  auto vel_at = [&](std::size_t i) {
    const auto a = pos_at(i == 0 ? 0 : i - 1), b = pos_at(i + 1);
    const double h = (i == 0 ? 1.0 : 2.0) * fine;
    return detail::Point2{(b.x - a.x) / h, (b.y - a.y) / h};
  };

  // Attack schedule and per-attack parameters.
  std::vector<std::pair<double, double>> attacks;
  if (auto it = cfg.attack.intervals.find(trace_index); it != cfg.attack.intervals.end())
    attacks = it->second;
  else
    attacks = schedule_attacks(rng, static_cast<double>(n_samples) * dt, trace_attack_fraction(cfg, trace_index),
                               cfg.attack.mean_attack_s);
  struct AttackDraw {
    double max_dev, bearing;
  };
  std::vector<AttackDraw> draws;
  for (std::size_t k = 0; k < attacks.size(); ++k)
    draws.push_back({cfg.attack.min_deviation_m + (cfg.attack.max_deviation_m - cfg.attack.min_deviation_m) * u01(rng),
                     2 * std::numbers::pi * u01(rng)});

  // Satellites visible during the trace.
  const std::array<std::size_t, 2> n_sats{7 + static_cast<std::size_t>(u01(rng) * 4),
                                          5 + static_cast<std::size_t>(u01(rng) * 4)};
  std::array<std::vector<detail::SatState>, 2> sats;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t k = 0; k < n_sats[c]; ++k) {
      const double az = 2 * std::numbers::pi * u01(rng);
      const double el = 0.2 + 1.2 * u01(rng);
      sats[c].push_back({std::clamp(6.0 * n01(rng), -12.0, 10.0), -3500.0 + 7000.0 * u01(rng),
                         -0.6 + 1.2 * u01(rng), std::cos(el) * std::sin(az), std::cos(el) * std::cos(az)});
    }
  constexpr double kHzPerMps = 1575.42e6 / 299792458.0;

  detail::Ar1 net_e(prof.net_pos_noise_m, 0.95), net_n(prof.net_pos_noise_m, 0.95);
  detail::Ar1 gnss_e(prof.gnss_noise_m, 0.9), gnss_n(prof.gnss_noise_m, 0.9);
  detail::Ar1 cn0_common(prof.cn0_jitter_db, 0.9);
  net_e.start(rng), net_n.start(rng), gnss_e.start(rng), gnss_n.start(rng), cn0_common.start(rng);

  const LocalFrame frame(cfg.anchor);
  Trace trace;
  trace.trace_id = static_cast<std::int64_t>(trace_index);
  trace.platform_id = static_cast<std::int64_t>(device) + 1;
  trace.samples.reserve(n_samples);
  double multipath_left = 0.0, multipath_e = 0.0, multipath_n = 0.0;

  for (std::size_t k = 0; k < n_samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    const auto fi = static_cast<std::size_t>(std::llround(t / fine)) + 1;
    const auto p = pos_at(fi);
    const auto vel = vel_at(fi);
    const auto vel_prev = vel_at(fi - 1), vel_next = vel_at(fi + 1);
    const double heading_prev = std::atan2(vel_prev.y, vel_prev.x), heading_next = std::atan2(vel_next.y, vel_next.x);
    double dh = heading_next - heading_prev;
    while (dh > std::numbers::pi) dh -= 2 * std::numbers::pi;
    while (dh < -std::numbers::pi) dh += 2 * std::numbers::pi;

    PlatformSample s;
    s.platform_id = trace.platform_id;
    s.trace_id = trace.trace_id;
    s.t = t;
    s.p_true = frame.to_geo({p.x, p.y});
    s.v = std::hypot(vel.x, vel.y) + 0.05 * n01(rng);
    s.v = std::max(0.0, s.v);
    s.a = {(vel_next.x - vel_prev.x) / (2 * fine) + 0.1 * n01(rng), (vel_next.y - vel_prev.y) / (2 * fine) + 0.1 * n01(rng),
           0.05 * n01(rng)};
    s.omega = {0.01 * n01(rng), 0.01 * n01(rng), (std::hypot(vel.x, vel.y) > 0.5 ? dh / (2 * fine) : 0.0) + 0.01 * n01(rng)};
    s.p_net = frame.to_geo({p.x + net_e.next(rng), p.y + net_n.next(rng)});

    // Benign GNSS error, optionally with multipath bursts.
    double ge = gnss_e.next(rng), gn = gnss_n.next(rng);
    bool multipath = false;
    if (multipath_left <= 0 && u01(rng) < cfg.multipath_rate_per_hour * dt / 3600.0) {
      multipath_left = 5.0 + 10.0 * u01(rng);
      const double mag = 15.0 + 25.0 * u01(rng), dir = 2 * std::numbers::pi * u01(rng);
      multipath_e = mag * std::cos(dir);
      multipath_n = mag * std::sin(dir);
    }
    if (multipath_left > 0) {
      ge += multipath_e;
      gn += multipath_n;
      multipath_left -= dt;
      multipath = true;
    }

    const AttackDraw* active = nullptr;
    double since = 0.0;
    for (std::size_t a = 0; a < attacks.size(); ++a)
      if (t >= attacks[a].first && t < attacks[a].second) {
        active = &draws[a];
        since = t - attacks[a].first;
      }
    s.attacked = active != nullptr;
    if (active) {
      const double frac = cfg.attack.offset_model == OffsetModel::Step ? 1.0 : std::min(1.0, since / cfg.attack.ramp_time_s);
      const double dev = active->max_dev * frac;
      ge += dev * std::cos(active->bearing);
      gn += dev * std::sin(active->bearing);
    }
    s.p_gnss = frame.to_geo({p.x + ge, p.y + gn});

    // Signal statistics over visible satellites.
    const double common = cn0_common.next(rng);
    for (std::size_t c = 0; c < 2; ++c) {
      const std::size_t n = sats[c].size();
      std::vector<double> agc(n), ant(n), bb(n), dop(n);
      for (std::size_t j = 0; j < n; ++j) {
        const auto& sat = sats[c][j];
        agc[j] = prof.agc_baseline_db + prof.agc_jitter_db * n01(rng);
        ant[j] = prof.cn0_baseline_dbhz + sat.cn0_offset + common + 0.7 * prof.cn0_jitter_db * n01(rng) -
                 (multipath ? 6.0 : 0.0);
        bb[j] = ant[j] - 1.5 + 0.5 * n01(rng);
        dop[j] = sat.doppler_base + sat.doppler_rate * t + kHzPerMps * (vel.x * sat.los_east + vel.y * sat.los_north) +
                 prof.doppler_noise_hz * n01(rng);
      }
      if (active) {
        auto compress = [&](std::vector<double>& vals, double shift) {
          double mean = 0.0;
          for (double x : vals) mean += x;
          mean /= static_cast<double>(vals.size());
          for (double& x : vals) x = mean + shift + cfg.attack.compression * (x - mean);
        };
        compress(agc, cfg.attack.agc_shift_db);
        compress(ant, cfg.attack.cn0_uplift_db);
        compress(bb, cfg.attack.cn0_uplift_db);
        compress(dop, 0.0);
      }
      const std::array<const std::vector<double>*, 4> props{&agc, &ant, &bb, &dop};
      for (std::size_t pidx = 0; pidx < 4; ++pidx) {
        const auto& vals = *props[pidx];
        const std::array<double, 4> stats{
            [&] {
              double m = 0;
              for (double x : vals) m += x;
              return m / static_cast<double>(vals.size());
            }(),
            detail::median_of(vals), *std::min_element(vals.begin(), vals.end()),
            *std::max_element(vals.begin(), vals.end())};
        for (std::size_t st = 0; st < 4; ++st) {
          auto& slot = s.s.slots[c * 16 + pidx * 4 + st];
          const double r = u01(rng);
          if (r < prof.invalid_probability * 0.5)
            slot.reset();  // missing
          else if (r < prof.invalid_probability)
            slot = pidx == 3 ? 1e6 : 999.0;  // faulty, outside the valid range
          else
            slot = stats[st];
        }
      }
    }
    trace.samples.push_back(std::move(s));
  }
  return trace;
}

// Generates cfg.n_traces traces; trace k belongs to device k % n_devices.
inline std::vector<Trace> generate_dataset(const SimConfig& cfg) {
  cfg.validate();
  std::vector<Trace> out;
  out.reserve(cfg.n_traces);
  for (std::size_t k = 0; k < cfg.n_traces; ++k) out.push_back(generate_trace(cfg, k));
  return out;
}

struct Partition {
  std::vector<std::vector<Trace>> clients;  // training traces per client
  std::vector<Trace> test;
  bool test_is_train = false;  // evaluation on the full training corpus
};

// Number of held-out test traces: round half up of fraction * n.
inline std::size_t test_trace_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 0.5));
}

// iid: traces shuffled and dealt to n_clients, test = all traces.
// non-iid-by-device: one client per platform, test = all traces.
// non-iid-by-trace: test_fraction of traces held out, the rest dealt to clients.
inline Partition partition(const std::vector<Trace>& traces, PartitionMode mode, std::size_t n_clients,
                           std::uint64_t seed, double test_fraction = 0.1) {
  if (traces.empty()) throw DataError("partition: no traces");
  Partition out;
  std::vector<std::size_t> order(traces.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(derive_seed(seed, 0xC0FFEE));

  if (mode == PartitionMode::NonIidByDevice) {
    std::map<std::int64_t, std::vector<Trace>> by_device;
    for (const auto& t : traces) by_device[t.platform_id].push_back(t);
    for (auto& [id, list] : by_device) out.clients.push_back(std::move(list));
    out.test = traces;
    out.test_is_train = true;
    return out;
  }

  std::shuffle(order.begin(), order.end(), rng);
  std::size_t first_train = 0;
  if (mode == PartitionMode::NonIidByTrace) {
    const std::size_t n_test = std::max<std::size_t>(1, test_trace_count(traces.size(), test_fraction));
    for (std::size_t i = 0; i < n_test && i < order.size(); ++i) out.test.push_back(traces[order[i]]);
    first_train = n_test;
  }
  if (n_clients < 1) throw ConfigError("partition: need at least one client");
  if (traces.size() - std::min(first_train, traces.size()) < n_clients)
    throw DataError("partition: " + std::to_string(traces.size() - first_train) + " training traces for " +
                    std::to_string(n_clients) + " clients");
  out.clients.resize(n_clients);
  for (std::size_t i = first_train; i < order.size(); ++i)
    out.clients[(i - first_train) % n_clients].push_back(traces[order[i]]);
  if (mode == PartitionMode::Iid) {
    out.test = traces;
    out.test_is_train = true;
  }
  return out;
}

}  // namespace gnssfl
