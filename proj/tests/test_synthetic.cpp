// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>

#include "m2g2/errors.hpp"
#include "m2g2/synthetic.hpp"
#include "oracles.hpp"

using namespace m2g2;

namespace {

std::vector<double> pollutant(const FeatureSeries& s, std::size_t node, std::size_t begin,
                              std::size_t end) {
  std::vector<double> x;
  for (std::size_t t = begin; t < end; ++t) x.push_back(s.value(t, node, 0));
  return x;
}

}  // namespace

TEST_CASE("single-period series repeats at its period") {
  SyntheticSpec spec;
  spec.segments = {{12, 2.0, 240}};
  spec.noise_sd = 0.0;
  const auto d = gen_multiperiod(spec);
  for (std::size_t n = 0; n < spec.stations; ++n) {
    const auto x = pollutant(d.series, n, 0, 240);
    CHECK(oracle::autocorrelation(x, 12) > 0.99);
    CHECK(oracle::autocorrelation(x, 6) < -0.9);
  }
}

TEST_CASE("zero amplitude leaves only noise") {
  SyntheticSpec spec;
  spec.segments = {{8, 0.0, 4000}};
  spec.noise_sd = 0.5;
  spec.offset = 3.0;
  spec.stations = 2;
  spec.cities = 1;
  const auto d = gen_multiperiod(spec);
  const auto x = pollutant(d.series, 0, 0, 4000);
  double mean = 0.0, sq = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double v : x) sq += (v - mean) * (v - mean);
  CHECK(mean == doctest::Approx(3.0).epsilon(0.02));
  CHECK(std::sqrt(sq / static_cast<double>(x.size())) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(std::abs(oracle::autocorrelation(x, 8)) < 0.1);
}

TEST_CASE("generation is deterministic in the seed") {
  SyntheticSpec spec;
  const auto a = gen_multiperiod(spec);
  const auto b = gen_multiperiod(spec);
  CHECK(a.series == b.series);
  spec.seed = 2;
  const auto c = gen_multiperiod(spec);
  CHECK_FALSE(a.series == c.series);
}

TEST_CASE("labels follow the segments and match the periodogram") {
  SyntheticSpec spec;
  spec.noise_sd = 0.2;
  const auto d = gen_multiperiod(spec);
  REQUIRE(d.dominant_period.size() == spec.length());
  CHECK(spec.length() == 350);
  std::size_t begin = 0;
  std::vector<std::size_t> candidates;
  for (const auto& seg : spec.segments) candidates.push_back(seg.period);
  for (const auto& seg : spec.segments) {
    for (std::size_t t = begin; t < begin + seg.span; ++t) CHECK(d.dominant_period[t] == seg.period);
    for (std::size_t n = 0; n < spec.stations; ++n) {
      const auto x = pollutant(d.series, n, begin, begin + seg.span);
      CHECK(oracle::dominant_period(x, candidates) == seg.period);
    }
    begin += seg.span;
  }
}

TEST_CASE("stations, cities and channels") {
  SyntheticSpec spec;
  spec.stations = 7;
  spec.cities = 3;
  spec.met_channels = 4;
  const auto d = gen_multiperiod(spec);
  REQUIRE(d.stations.size() == 7);
  std::set<std::string> cities, ids;
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(d.stations[i].city_id == "C" + std::to_string(i % 3 + 1));
    cities.insert(d.stations[i].city_id);
    ids.insert(d.stations[i].station_id);
    CHECK(d.series.node_ids()[i] == d.stations[i].station_id);
  }
  CHECK(cities.size() == 3);
  CHECK(ids.size() == 7);
  CHECK(d.series.channels() == 5);
  CHECK(d.series.missing_count() == 0);
  CHECK(d.series.timestamps()[1] - d.series.timestamps()[0] == spec.step_seconds);
}

TEST_CASE("shared city component correlates stations of a city") {
  SyntheticSpec spec;
  spec.segments = {{8, 0.0, 3000}};
  spec.noise_sd = 0.1;
  spec.city_signal = 1.0;
  spec.stations = 4;
  spec.cities = 2;
  const auto d = gen_multiperiod(spec);
  auto corr = [&](std::size_t a, std::size_t b) {
    const auto x = pollutant(d.series, a, 0, 3000), y = pollutant(d.series, b, 0, 3000);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mx += x[i];
      my += y[i];
    }
    mx /= 3000.0;
    my /= 3000.0;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
  };
  CHECK(corr(0, 2) > 0.8);
  CHECK(std::abs(corr(0, 1)) < 0.5);
}

TEST_CASE("invalid specs") {
  SyntheticSpec spec;
  spec.segments = {};
  CHECK_THROWS_AS(spec.validate(), InvalidParameter);
  spec = {};
  spec.stations = 1;
  spec.cities = 2;
  CHECK_THROWS_AS(spec.validate(), InvalidParameter);
  spec = {};
  spec.segments = {{0, 1.0, 10}};
  CHECK_THROWS_AS(spec.validate(), InvalidParameter);
  spec = {};
  spec.noise_sd = -1.0;
  CHECK_THROWS_AS(spec.validate(), InvalidParameter);
  spec = {};
  spec.met_ar = 1.0;
  CHECK_THROWS_AS(spec.validate(), InvalidParameter);
}
