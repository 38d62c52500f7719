#pragma once

// Line-delimited dataset file.
//
// Line 1 is a header naming every column (units are part of the names).
// Each following line is one PlatformSample, comma separated, in header order.
// Doubles use the shortest representation that round-trips exactly, so a
// write/read cycle reproduces every value bit for bit. An invalid signal slot
// is written as the token NA. Columns prefixed "oracle_" carry simulator
// ground truth and must not feed features or labels.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "gnssfl/domain.hpp"
#include "gnssfl/errors.hpp"

namespace gnssfl {

inline constexpr std::string_view kMissingToken = "NA";

inline std::vector<std::string> dataset_columns() {
  std::vector<std::string> cols{"platform_id",      "trace_id",         "t_s",          "oracle_true_lat_deg",
                                "oracle_true_lon_deg", "gnss_lat_deg",  "gnss_lon_deg", "net_lat_deg",
                                "net_lon_deg",      "speed_mps",        "acc_e_mps2",   "acc_n_mps2",
                                "acc_u_mps2",       "omega_x_radps",    "omega_y_radps", "omega_z_radps"};
  for (std::size_t slot = 0; slot < kSignalSlots; ++slot) cols.push_back(signal_slot_name(slot));
  cols.emplace_back("oracle_attacked");
  return cols;
}

inline std::string dataset_header() {
  std::string h;
  for (const auto& c : dataset_columns()) {
    if (!h.empty()) h += ',';
    h += c;
  }
  return h;
}

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline void append_int(std::string& out, std::int64_t v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

}  // namespace detail

inline std::string format_sample(const PlatformSample& s) {
  std::string line;
  line.reserve(512);
  auto num = [&line](double v) {
    line += ',';
    detail::append_double(line, v);
  };
  detail::append_int(line, s.platform_id);
  line += ',';
  detail::append_int(line, s.trace_id);
  for (double v : {s.t, s.p_true.lat, s.p_true.lon, s.p_gnss.lat, s.p_gnss.lon, s.p_net.lat, s.p_net.lon, s.v})
    num(v);
  for (double v : s.a) num(v);
  for (double v : s.omega) num(v);
  for (const auto& slot : s.s.slots) {
    line += ',';
    if (slot)
      detail::append_double(line, *slot);
    else
      line += kMissingToken;
  }
  line += s.attacked ? ",1" : ",0";
  return line;
}

inline void write_dataset(const std::vector<Trace>& traces, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open dataset for writing: " + path.string());
  out << dataset_header() << '\n';
  for (const auto& tr : traces)
    for (const auto& s : tr.samples) out << format_sample(s) << '\n';
  out.flush();
  if (!out) throw DataError("write failed: " + path.string());
}

inline PlatformSample parse_sample(std::string_view line, std::size_t line_no) {
  const auto fields = detail::split_commas(line);
  const std::size_t expected = 16 + kSignalSlots + 1;
  auto fail = [line_no](const std::string& why) -> DataError {
    return DataError("dataset line " + std::to_string(line_no) + ": " + why);
  };
  if (fields.size() != expected)
    throw fail("expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()));

  PlatformSample s;
  std::size_t i = 0;
  auto next_int = [&](std::int64_t& dst) {
    if (!detail::parse_number(fields[i], dst)) throw fail("bad integer in column " + std::to_string(i + 1));
    ++i;
  };
  auto next_double = [&](double& dst) {
    if (!detail::parse_number(fields[i], dst)) throw fail("bad number in column " + std::to_string(i + 1));
    ++i;
  };
  next_int(s.platform_id);
  next_int(s.trace_id);
  next_double(s.t);
  next_double(s.p_true.lat);
  next_double(s.p_true.lon);
  next_double(s.p_gnss.lat);
  next_double(s.p_gnss.lon);
  next_double(s.p_net.lat);
  next_double(s.p_net.lon);
  next_double(s.v);
  for (double& v : s.a) next_double(v);
  for (double& v : s.omega) next_double(v);
  for (auto& slot : s.s.slots) {
    if (fields[i] == kMissingToken) {
      slot.reset();
      ++i;
    } else {
      double v = 0.0;
      next_double(v);
      slot = v;
    }
  }
  if (fields[i] == "1")
    s.attacked = true;
  else if (fields[i] == "0")
    s.attacked = false;
  else
    throw fail("attacked flag must be 0 or 1");
  for (const GeoPos* p : {&s.p_true, &s.p_gnss, &s.p_net})
    if (!p->valid()) throw fail("coordinate out of range");
  return s;
}

// Traces come back in order of first appearance, grouped by (platform_id, trace_id).
inline std::vector<Trace> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset is empty (missing header): " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != dataset_header()) throw DataError("dataset line 1: unexpected header in " + path.string());

  std::vector<Trace> traces;
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    PlatformSample s = parse_sample(line, line_no);
    const auto key = std::make_pair(s.platform_id, s.trace_id);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, traces.size()).first;
      traces.push_back(Trace{s.trace_id, s.platform_id, {}});
    }
    auto& tr = traces[it->second];
    if (!tr.samples.empty() && !(s.t > tr.samples.back().t))
      throw DataError("trace " + std::to_string(s.trace_id) + ": non-monotone timestamp at dataset line " +
                      std::to_string(line_no));
    tr.samples.push_back(std::move(s));
  }
  return traces;
}

}  // namespace gnssfl
