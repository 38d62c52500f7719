#pragma once

// Enumerates every server-receivable message type and checks its fields:
// allowed member types only (scalars, model parameters, predicted scores),
// and no field name carrying a position, feature or sensor token.

#include <set>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "gnssfl/fed.hpp"

namespace privacy {

struct AnyField {
  template <typename T>
  operator T() const;
};

template <typename T, typename... A>
constexpr std::size_t aggregate_arity() {
  if constexpr (requires { T{A{}..., AnyField{}}; })
    return aggregate_arity<T, A..., AnyField>();
  else
    return sizeof...(A);
}

template <typename T>
constexpr bool allowed_field_type() {
  using U = std::remove_cvref_t<T>;
  return std::is_same_v<U, std::size_t> || std::is_same_v<U, double> || std::is_same_v<U, bool> ||
         std::is_same_v<U, gnssfl::LstmModelParams> || std::is_same_v<U, std::vector<float>>;
}

template <typename Msg>
void collect_fields(std::vector<std::string>& names) {
  static_assert(std::is_aggregate_v<Msg>);
  static_assert(aggregate_arity<Msg>() == Msg::field_names.size(), "field_names must list every member");
  using Fields = decltype(std::declval<const Msg&>().fields());
  static_assert(std::tuple_size_v<Fields> == Msg::field_names.size());
  []<std::size_t... I>(std::index_sequence<I...>) {
    static_assert((allowed_field_type<std::tuple_element_t<I, Fields>>() && ...),
                  "server-receivable field of a disallowed type");
  }(std::make_index_sequence<std::tuple_size_v<Fields>>{});
  for (auto n : Msg::field_names) names.emplace_back(n);
}

template <typename T>
concept ServerAccepts = requires(gnssfl::Server s, T v) { s.receive(v); };

// Everything the server can be handed must be listed in ServerInbound; the
// raw-data types must be rejected at compile time.
static_assert(ServerAccepts<gnssfl::RoundUpdate> && ServerAccepts<gnssfl::QualityReport> &&
              ServerAccepts<gnssfl::ClientHello>);
static_assert(!ServerAccepts<gnssfl::Trace> && !ServerAccepts<gnssfl::PlatformSample> && !ServerAccepts<gnssfl::GeoPos>);
static_assert(!ServerAccepts<gnssfl::WindowSet> && !ServerAccepts<gnssfl::FeatureVector> &&
              !ServerAccepts<gnssfl::RawFeatureVector>);
static_assert(!ServerAccepts<gnssfl::LabelSeries> && !ServerAccepts<gnssfl::NormalizationState> &&
              !ServerAccepts<gnssfl::SignalProps>);
static_assert(!ServerAccepts<std::vector<gnssfl::FusedEstimate>> && !ServerAccepts<gnssfl::LstmModelParams>);

inline std::vector<std::string> inbound_field_names() {
  std::vector<std::string> names;
  [&]<typename... M>(std::tuple<M...>*) {
    (collect_fields<M>(names), ...);
  }(static_cast<gnssfl::ServerInbound*>(nullptr));
  return names;
}

inline const std::set<std::string>& forbidden_tokens() {
  static const std::set<std::string> t{
      "lat",     "lon",    "pos",   "position", "gnss",  "net",      "true",   "feature", "features", "signal",
      "agc",     "cn0",    "doppler", "acc",    "accel", "omega",    "speed",  "v",       "a",        "s",
      "trace",   "window", "windows", "sequence", "target", "targets", "truth", "attacked", "label",  "raw",
      "sigma",   "mu",     "fused"};
  return t;
}

// "<field>: <token>" for every field name containing a forbidden token.
inline std::vector<std::string> violations(const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& n : names) {
    std::size_t start = 0;
    while (start <= n.size()) {
      const auto end = std::min(n.find('_', start), n.size());
      const auto token = n.substr(start, end - start);
      if (forbidden_tokens().count(token)) out.push_back(n + ": " + token);
      start = end + 1;
    }
  }
  return out;
}

}  // namespace privacy
