// SPDX-License-Identifier: Apache-2.0
#include "m2g2/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "m2g2/errors.hpp"

namespace m2g2 {

std::size_t SyntheticSpec::length() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.span;
  return n;
}

void SyntheticSpec::validate() const {
  if (stations == 0) throw InvalidParameter("synthetic station count must be positive");
  if (cities == 0 || cities > stations) {
    throw InvalidParameter("synthetic city count must be in [1, stations]");
  }
  if (segments.empty()) throw InvalidParameter("at least one segment is required");
  for (const auto& s : segments) {
    if (s.period == 0) throw InvalidParameter("segment period must be positive");
    if (s.span == 0) throw InvalidParameter("segment span must be positive");
    if (!(s.amplitude >= 0.0) || !std::isfinite(s.amplitude)) {
      throw InvalidParameter("segment amplitude must be finite and non-negative");
    }
  }
  if (!(noise_sd >= 0.0) || !(phase_jitter >= 0.0) || !(city_signal >= 0.0)) {
    throw InvalidParameter("noise, jitter and city signal scales must be non-negative");
  }
  if (!(std::abs(city_signal_ar) < 1.0) || !(std::abs(met_ar) < 1.0)) {
    throw InvalidParameter("AR coefficients must lie in (-1, 1)");
  }
  if (step_seconds <= 0) throw InvalidParameter("step length must be positive");
}

SyntheticDataset gen_multiperiod(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const std::size_t S = spec.stations;
  const std::size_t C = spec.cities;
  const std::size_t L = spec.length();

  SyntheticDataset out;
  for (std::size_t j = 0; j < C; ++j) {
    const double clat = 30.0 + 1.4 * static_cast<double>(j);
    const double clon = 110.0 + 0.6 * static_cast<double>(j % 2);
    for (std::size_t i = j; i < S; i += C) {
      const double r = 0.25 * std::sqrt(uniform(rng));
      const double a = two_pi * uniform(rng);
      StationRecord st;
      st.station_id = "S" + std::to_string(i + 1);
      st.city_id = "C" + std::to_string(j + 1);
      st.latitude = clat + r * std::cos(a);
      st.longitude = clon + r * std::sin(a);
      st.elevation = 50.0 + 100.0 * uniform(rng);
      out.stations.push_back(st);
    }
  }
  std::sort(out.stations.begin(), out.stations.end(), [](const auto& x, const auto& y) {
    return std::stoul(x.station_id.substr(1)) < std::stoul(y.station_id.substr(1));
  });

  std::vector<std::string> ids;
  for (const auto& st : out.stations) ids.push_back(st.station_id);
  std::vector<std::string> channels{"pollutant"};
  for (std::size_t m = 0; m < spec.met_channels; ++m) channels.push_back("met" + std::to_string(m + 1));
  std::vector<UnixSeconds> stamps(L);
  for (std::size_t t = 0; t < L; ++t) {
    stamps[t] = spec.start + static_cast<UnixSeconds>(t) * spec.step_seconds;
  }
  out.series = FeatureSeries(ids, channels, stamps);

  // Per segment: one phase per city, jittered per station.
  std::vector<std::vector<double>> phase(spec.segments.size(), std::vector<double>(S));
  for (std::size_t k = 0; k < spec.segments.size(); ++k) {
    std::vector<double> city_phase(C);
    for (auto& p : city_phase) p = two_pi * uniform(rng);
    for (std::size_t i = 0; i < S; ++i) {
      phase[k][i] = city_phase[i % C] + spec.phase_jitter * normal(rng);
    }
  }

  const double innov_city = std::sqrt(1.0 - spec.city_signal_ar * spec.city_signal_ar);
  const double innov_met = std::sqrt(1.0 - spec.met_ar * spec.met_ar);
  std::vector<double> city_state(C);
  for (auto& c : city_state) c = normal(rng);
  std::vector<double> met_state(S * spec.met_channels);
  for (auto& m : met_state) m = normal(rng);

  std::size_t seg = 0, seg_begin = 0;
  out.dominant_period.resize(L);
  for (std::size_t t = 0; t < L; ++t) {
    if (t >= seg_begin + spec.segments[seg].span) {
      seg_begin += spec.segments[seg].span;
      ++seg;
    }
    const auto& sg = spec.segments[seg];
    out.dominant_period[t] = sg.period;
    for (auto& c : city_state) c = spec.city_signal_ar * c + innov_city * normal(rng);
    for (std::size_t i = 0; i < S; ++i) {
      const double wave =
          sg.amplitude *
          std::sin(two_pi * static_cast<double>(t) / static_cast<double>(sg.period) + phase[seg][i]);
      const double noise = spec.noise_sd * normal(rng);
      out.series.set(t, i, 0, spec.offset + wave + spec.city_signal * city_state[i % C] + noise);
      for (std::size_t m = 0; m < spec.met_channels; ++m) {
        double& st = met_state[i * spec.met_channels + m];
        st = spec.met_ar * st + innov_met * normal(rng);
        out.series.set(t, i, m + 1, st);
      }
    }
  }
  return out;
}

}  // namespace m2g2
