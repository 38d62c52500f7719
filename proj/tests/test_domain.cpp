#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "gnssfl/dataset_io.hpp"
#include "gnssfl/simgen.hpp"

using namespace gnssfl;

namespace {

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

PlatformSample sample(std::int64_t trace, double t) {
  PlatformSample s;
  s.platform_id = 2;
  s.trace_id = trace;
  s.t = t;
  s.p_true = {69.1234567890123, 15.98765432101};
  s.p_gnss = {69.12346, 15.9876};
  s.p_net = {69.1235, -15.98};
  s.v = 12.5;
  s.a = {0.1, -0.2, 1e-17};
  s.omega = {0.0, -0.0, 3.141592653589793};
  s.s.at(Constellation::GpsL1, SignalProperty::Agc, Statistic::Mean) = 41.25;
  s.s.at(Constellation::GalileoE1, SignalProperty::Doppler, Statistic::Max) = -3210.123456789;
  s.attacked = t > 1.0;
  return s;
}

}  // namespace

TEST(Haversine, IdentityIsZero) {
  const GeoPos p{69.3, 16.1};
  EXPECT_EQ(haversine_m(p, p), 0.0);
}

TEST(Haversine, ThousandthDegreeOfLongitudeAtEquator) {
  // 6371000 m * 0.001 deg * pi / 180 = 111.19492664455875 m
  EXPECT_NEAR(haversine_m({0, 0}, {0, 0.001}), 111.19492664455875, 1e-6);
}

TEST(Haversine, MetricProperties) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> lat(-80, 80), lon(-179, 179);
  for (int i = 0; i < 1000; ++i) {
    const GeoPos a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)}, c{lat(rng), lon(rng)};
    const double ab = haversine_m(a, b), ba = haversine_m(b, a);
    EXPECT_GE(ab, 0.0);
    EXPECT_EQ(ab, ba);
    EXPECT_LE(ab, (haversine_m(a, c) + haversine_m(c, b)) * (1 + 1e-6));
  }
}

TEST(LocalFrame, RoundTripsAndAgreesWithHaversine) {
  const LocalFrame f({69.27, 15.96});
  const EnuOffset e{734.5, -1220.25};
  const GeoPos g = f.to_geo(e);
  const EnuOffset back = f.to_local(g);
  EXPECT_NEAR(back.east, e.east, 1e-9);
  EXPECT_NEAR(back.north, e.north, 1e-9);
  const GeoPos p{69.2705, 15.9612};
  const auto r = residual_m(p, f.anchor());
  EXPECT_NEAR(std::hypot(r.east, r.north), haversine_m(p, f.anchor()), 0.01);
}

TEST(Dataset, EmptyListWritesHeaderOnly) {
  const auto path = temp_file("gnssfl_empty.csv");
  write_dataset({}, path);
  std::ifstream in(path);
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, dataset_header());
  EXPECT_FALSE(std::getline(in, line));
  EXPECT_TRUE(read_dataset(path).empty());
}

TEST(Dataset, ThreeSampleRoundTrip) {
  Trace tr{7, 2, {sample(7, 0.0), sample(7, 1.0), sample(7, 2.5)}};
  tr.samples[1].s.at(Constellation::GpsL1, SignalProperty::Agc, Statistic::Mean).reset();
  const auto path = temp_file("gnssfl_three.csv");
  write_dataset({tr}, path);
  const auto back = read_dataset(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], tr);
}

TEST(Dataset, GeneratedCorpusRoundTrips) {
  SimConfig cfg;
  cfg.n_traces = 85;
  cfg.trace_duration_s = 30;
  cfg.rng_seed = 77;
  const auto traces = generate_dataset(cfg);
  const auto path = temp_file("gnssfl_corpus.csv");
  write_dataset(traces, path);
  const auto back = read_dataset(path);
  ASSERT_EQ(back.size(), 85u);
  EXPECT_EQ(back, traces);
  std::set<std::int64_t> platforms;
  for (const auto& t : back) platforms.insert(t.platform_id);
  EXPECT_EQ(platforms.size(), 6u);
}

TEST(Dataset, MissingSlotsUseSentinelToken) {
  auto s = sample(1, 0.0);
  const auto line = format_sample(s);
  EXPECT_NE(line.find(",NA,"), std::string::npos);
  EXPECT_EQ(line.find(",,"), std::string::npos);
}

TEST(Dataset, MalformedRecordNamesLine) {
  const auto path = temp_file("gnssfl_bad.csv");
  {
    std::ofstream out(path);
    out << dataset_header() << '\n' << format_sample(sample(1, 0.0)) << '\n' << "1,2,3\n";
  }
  try {
    read_dataset(path);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Dataset, NonMonotoneTimeNamesTrace) {
  const auto path = temp_file("gnssfl_nonmono.csv");
  {
    std::ofstream out(path);
    out << dataset_header() << '\n' << format_sample(sample(42, 5.0)) << '\n' << format_sample(sample(42, 4.0)) << '\n';
  }
  try {
    read_dataset(path);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("trace 42"), std::string::npos) << e.what();
  }
}

TEST(Dataset, UnwritablePathReportsPath) {
  try {
    write_dataset({}, "/nonexistent-dir/x/data.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/x/data.csv"), std::string::npos);
  }
}

TEST(Trace, ValidationCatchesBadTraces) {
  Trace empty{1, 1, {}};
  EXPECT_THROW(validate_trace(empty), DataError);
  Trace mixed{1, 2, {sample(1, 0.0), sample(2, 1.0)}};
  EXPECT_THROW(validate_trace(mixed), DataError);
  Trace ok{1, 2, {sample(1, 0.0), sample(1, 1.0)}};
  EXPECT_NO_THROW(validate_trace(ok));
}
