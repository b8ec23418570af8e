// SPDX-License-Identifier: Apache-2.0
#include "m2g2/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_map>

#include "m2g2/csv.hpp"
#include "m2g2/errors.hpp"

namespace m2g2 {

FeatureSeries::FeatureSeries(std::vector<std::string> node_ids,
                             std::vector<std::string> channel_names,
                             std::vector<UnixSeconds> timestamps)
    : node_ids_(std::move(node_ids)),
      channel_names_(std::move(channel_names)),
      timestamps_(std::move(timestamps)) {
  for (std::size_t t = 1; t < timestamps_.size(); ++t) {
    if (timestamps_[t] <= timestamps_[t - 1]) {
      throw InvalidInput("timestamps must be strictly increasing");
    }
  }
  const std::size_t n = timestamps_.size() * node_ids_.size() * channel_names_.size();
  values_.assign(n, 0.0);
  observed_.assign(n, 0);
}

void FeatureSeries::set(std::size_t t, std::size_t n, std::size_t c, double v) {
  if (!std::isfinite(v)) {
    throw DataError("non-finite value at step " + std::to_string(t) + ", node " + node_ids_.at(n));
  }
  const auto i = index(t, n, c);
  values_.at(i) = v;
  observed_[i] = 1;
}

void FeatureSeries::mark_missing(std::size_t t, std::size_t n, std::size_t c) {
  const auto i = index(t, n, c);
  values_.at(i) = 0.0;
  observed_[i] = 0;
}

std::size_t FeatureSeries::missing_count() const {
  return static_cast<std::size_t>(std::count(observed_.begin(), observed_.end(), 0));
}

double FeatureSeries::missing_rate(std::size_t node) const {
  const std::size_t cells = steps() * channels();
  if (cells == 0) return 0.0;
  std::size_t missing = 0;
  for (std::size_t t = 0; t < steps(); ++t)
    for (std::size_t c = 0; c < channels(); ++c) missing += observed(t, node, c) ? 0 : 1;
  return static_cast<double>(missing) / static_cast<double>(cells);
}

namespace {

std::vector<UnixSeconds> uniform_grid(const std::set<UnixSeconds>& stamps) {
  if (stamps.empty()) throw DataError("no timestamps found");
  std::vector<UnixSeconds> sorted(stamps.begin(), stamps.end());
  if (sorted.size() == 1) return sorted;
  UnixSeconds step = 0;
  for (std::size_t i = 1; i < sorted.size(); ++i) step = std::gcd(step, sorted[i] - sorted[i - 1]);
  std::vector<UnixSeconds> grid;
  for (UnixSeconds t = sorted.front(); t <= sorted.back(); t += step) grid.push_back(t);
  const UnixSeconds min_gap = [&] {
    UnixSeconds g = sorted[1] - sorted[0];
    for (std::size_t i = 2; i < sorted.size(); ++i) g = std::min(g, sorted[i] - sorted[i - 1]);
    return g;
  }();
  if (step != min_gap) {
    throw DataError("timestamps do not lie on a uniform grid (gcd " + std::to_string(step) +
                    " s, smallest gap " + std::to_string(min_gap) + " s)");
  }
  return grid;
}

std::size_t grid_index(const std::vector<UnixSeconds>& grid, UnixSeconds t) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), t);
  return static_cast<std::size_t>(it - grid.begin());
}

}  // namespace

FeatureSeries load_series(const std::filesystem::path& measurements,
                          const std::filesystem::path& meteorology, const std::string& pollutant,
                          const std::vector<std::string>& station_ids) {
  std::unordered_map<std::string, std::size_t> station_index;
  for (std::size_t i = 0; i < station_ids.size(); ++i) {
    if (!station_index.emplace(station_ids[i], i).second) {
      throw InvalidInput("duplicate station id '" + station_ids[i] + "'");
    }
  }

  const auto meas = csv::read(measurements);
  const auto c_ts = meas.column("timestamp");
  const auto c_st = meas.column("station_id");
  const auto c_pol = meas.column("pollutant");
  const auto c_val = meas.column("value");

  std::optional<csv::Table> met;
  std::vector<std::string> met_names;
  std::size_t m_ts = 0, m_st = 0;
  std::vector<std::size_t> met_cols;
  if (!meteorology.empty()) {
    met = csv::read(meteorology);
    m_ts = met->column("timestamp");
    m_st = met->column("station_id");
    for (std::size_t i = 0; i < met->header.size(); ++i) {
      if (i == m_ts || i == m_st) continue;
      met_names.push_back(met->header[i]);
      met_cols.push_back(i);
    }
  }

  std::set<UnixSeconds> stamps;
  for (const auto& row : meas.rows)
    if (row[c_pol] == pollutant && station_index.contains(row[c_st]))
      stamps.insert(parse_timestamp(row[c_ts]));
  if (met)
    for (const auto& row : met->rows)
      if (station_index.contains(row[m_st])) stamps.insert(parse_timestamp(row[m_ts]));
  if (stamps.empty()) {
    throw DataError(measurements.string() + ": no rows for pollutant '" + pollutant + "'");
  }

  std::vector<std::string> channels{pollutant};
  channels.insert(channels.end(), met_names.begin(), met_names.end());
  FeatureSeries series(station_ids, channels, uniform_grid(stamps));
  const auto& grid = series.timestamps();

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& row : meas.rows) {
    if (row[c_pol] != pollutant) continue;
    const auto st = station_index.find(row[c_st]);
    if (st == station_index.end()) continue;
    const auto t = grid_index(grid, parse_timestamp(row[c_ts]));
    if (!seen.emplace(t, st->second).second) {
      throw DataError(measurements.string() + ": duplicate reading for station '" + row[c_st] +
                      "' at " + row[c_ts]);
    }
    if (row[c_val].empty()) continue;
    series.set(t, st->second, 0, csv::to_double(row[c_val], measurements.string()));
  }
  if (met) {
    seen.clear();
    for (const auto& row : met->rows) {
      const auto st = station_index.find(row[m_st]);
      if (st == station_index.end()) continue;
      const auto t = grid_index(grid, parse_timestamp(row[m_ts]));
      if (!seen.emplace(t, st->second).second) {
        throw DataError(meteorology.string() + ": duplicate row for station '" + row[m_st] +
                        "' at " + row[m_ts]);
      }
      for (std::size_t k = 0; k < met_cols.size(); ++k) {
        const auto& field = row[met_cols[k]];
        if (field.empty()) continue;
        series.set(t, st->second, k + 1, csv::to_double(field, meteorology.string()));
      }
    }
  }
  return series;
}

void write_measurements_csv(const std::filesystem::path& path, const FeatureSeries& series,
                            const std::string& pollutant) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "timestamp,station_id,pollutant,value\n";
  for (std::size_t t = 0; t < series.steps(); ++t) {
    for (std::size_t n = 0; n < series.nodes(); ++n) {
      out << format_timestamp(series.timestamps()[t]) << ',' << series.node_ids()[n] << ','
          << pollutant << ',';
      if (series.observed(t, n, 0)) out << csv::format(series.value(t, n, 0));
      out << '\n';
    }
  }
}

void write_meteorology_csv(const std::filesystem::path& path, const FeatureSeries& series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "timestamp,station_id";
  for (std::size_t c = 1; c < series.channels(); ++c) out << ',' << series.channel_names()[c];
  out << '\n';
  for (std::size_t t = 0; t < series.steps(); ++t) {
    for (std::size_t n = 0; n < series.nodes(); ++n) {
      out << format_timestamp(series.timestamps()[t]) << ',' << series.node_ids()[n];
      for (std::size_t c = 1; c < series.channels(); ++c) {
        out << ',';
        if (series.observed(t, n, c)) out << csv::format(series.value(t, n, c));
      }
      out << '\n';
    }
  }
}

void check_missing_rates(const FeatureSeries& series, double max_rate) {
  for (std::size_t n = 0; n < series.nodes(); ++n) {
    const double rate = series.missing_rate(n);
    if (rate >= max_rate) {
      throw DataError("station '" + series.node_ids()[n] + "' has missing rate " +
                      std::to_string(rate) + ", ceiling is " + std::to_string(max_rate));
    }
  }
}

namespace {

struct Candidate {
  double cost;
  std::size_t abs_dt;
  const std::string* station;
  long signed_dt;
  double value;
};

bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  if (a.abs_dt != b.abs_dt) return a.abs_dt < b.abs_dt;
  if (*a.station != *b.station) return *a.station < *b.station;
  return a.signed_dt < b.signed_dt;
}

}  // namespace

ImputeResult knn_impute(const FeatureSeries& series, const Tensor& distances_km,
                        const KnnConfig& config) {
  if (config.k == 0) throw InvalidParameter("KNN neighbour count must be positive");
  if (!(config.w_time >= 0.0) || !(config.w_space >= 0.0)) {
    throw InvalidParameter("KNN weights must be non-negative");
  }
  if (distances_km.rows() != series.nodes() || distances_km.cols() != series.nodes()) {
    throw ShapeError("distance matrix " + distances_km.shape_str() + " does not match " +
                     std::to_string(series.nodes()) + " stations");
  }
  check_missing_rates(series, config.max_missing_rate);

  ImputeResult result{series, 0};
  std::vector<Candidate> pool;
  const auto& ids = series.node_ids();
  const long steps = static_cast<long>(series.steps());
  const long window = static_cast<long>(config.time_window);
  for (std::size_t t = 0; t < series.steps(); ++t) {
    for (std::size_t n = 0; n < series.nodes(); ++n) {
      for (std::size_t c = 0; c < series.channels(); ++c) {
        if (series.observed(t, n, c)) continue;
        pool.clear();
        for (long dt = -window; dt <= window; ++dt) {
          const long u = static_cast<long>(t) + dt;
          if (dt == 0 || u < 0 || u >= steps) continue;
          if (!series.observed(static_cast<std::size_t>(u), n, c)) continue;
          const auto adt = static_cast<std::size_t>(std::labs(dt));
          pool.push_back({config.w_time * static_cast<double>(adt), adt, &ids[n], dt,
                          series.value(static_cast<std::size_t>(u), n, c)});
        }
        for (std::size_t m = 0; m < series.nodes(); ++m) {
          if (m == n || !series.observed(t, m, c)) continue;
          pool.push_back({config.w_space * distances_km(n, m), 0, &ids[m], 0,
                          series.value(t, m, c)});
        }
        if (pool.empty()) {
          throw DataError("no imputation candidates for station '" + ids[n] + "', channel '" +
                          series.channel_names()[c] + "' at " +
                          format_timestamp(series.timestamps()[t]));
        }
        const std::size_t k = std::min(config.k, pool.size());
        std::partial_sort(pool.begin(), pool.begin() + static_cast<long>(k), pool.end(),
                          candidate_less);
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) sum += pool[i].value;
        result.series.set(t, n, c, sum / static_cast<double>(k));
        ++result.filled;
      }
    }
  }
  return result;
}

FeatureSeries resample_mean(const FeatureSeries& series, std::size_t factor) {
  if (factor == 0) throw InvalidParameter("resampling factor must be positive");
  const std::size_t groups = series.steps() / factor;
  std::vector<UnixSeconds> stamps;
  for (std::size_t g = 0; g < groups; ++g) stamps.push_back(series.timestamps()[g * factor]);
  FeatureSeries out(series.node_ids(), series.channel_names(), std::move(stamps));
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t n = 0; n < series.nodes(); ++n) {
      for (std::size_t c = 0; c < series.channels(); ++c) {
        double sum = 0.0;
        bool complete = true;
        for (std::size_t i = 0; i < factor; ++i) {
          const std::size_t t = g * factor + i;
          if (!series.observed(t, n, c)) {
            complete = false;
            break;
          }
          sum += series.value(t, n, c);
        }
        if (complete) out.set(g, n, c, sum / static_cast<double>(factor));
      }
    }
  }
  return out;
}

void SplitSpec::validate() const {
  if (!(train_end > 0 && train_end <= val_end && val_end <= total)) {
    throw InvalidParameter("split boundaries must satisfy 0 < train_end <= val_end <= total (got " +
                           std::to_string(train_end) + ", " + std::to_string(val_end) + ", " +
                           std::to_string(total) + ")");
  }
}

SplitSpec split_by_fraction(std::size_t total, double train_fraction, double val_fraction) {
  if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) ||
      !(train_fraction + val_fraction <= 1.0)) {
    throw InvalidParameter("split fractions must be positive and sum to at most 1");
  }
  SplitSpec s;
  s.total = total;
  s.train_end = static_cast<std::size_t>(std::floor(static_cast<double>(total) * train_fraction));
  s.val_end = static_cast<std::size_t>(
      std::floor(static_cast<double>(total) * (train_fraction + val_fraction)));
  s.val_end = std::min(s.val_end, total);
  s.validate();
  return s;
}

SplitSpec split_by_timestamps(const FeatureSeries& series, UnixSeconds val_start,
                              UnixSeconds test_start) {
  if (val_start > test_start) throw InvalidParameter("validation must start before test");
  SplitSpec s;
  s.total = series.steps();
  s.train_end = grid_index(series.timestamps(), val_start);
  s.val_end = grid_index(series.timestamps(), test_start);
  s.validate();
  return s;
}

NormStats fit_zscore(const FeatureSeries& series, const SplitSpec& split) {
  split.validate();
  if (split.total != series.steps()) {
    throw ShapeError("split covers " + std::to_string(split.total) + " steps, series has " +
                     std::to_string(series.steps()));
  }
  NormStats stats;
  for (std::size_t c = 0; c < series.channels(); ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < split.train_end; ++t)
      for (std::size_t n = 0; n < series.nodes(); ++n)
        if (series.observed(t, n, c)) {
          sum += series.value(t, n, c);
          ++count;
        }
    if (count == 0) {
      throw DataError("channel '" + series.channel_names()[c] + "' has no training values");
    }
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t t = 0; t < split.train_end; ++t)
      for (std::size_t n = 0; n < series.nodes(); ++n)
        if (series.observed(t, n, c)) {
          const double d = series.value(t, n, c) - mean;
          ss += d * d;
        }
    const double sd = std::sqrt(ss / static_cast<double>(count));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      throw DataError("channel '" + series.channel_names()[c] +
                      "' has zero variance on the training split");
    }
    stats.mean.push_back(mean);
    stats.stddev.push_back(sd);
  }
  return stats;
}

namespace {

template <typename F>
FeatureSeries map_observed(const FeatureSeries& series, const NormStats& stats, F f) {
  if (stats.mean.size() != series.channels() || stats.stddev.size() != series.channels()) {
    throw ShapeError("normalization stats have " + std::to_string(stats.mean.size()) +
                     " channels, series has " + std::to_string(series.channels()));
  }
  FeatureSeries out = series;
  for (std::size_t t = 0; t < series.steps(); ++t)
    for (std::size_t n = 0; n < series.nodes(); ++n)
      for (std::size_t c = 0; c < series.channels(); ++c)
        if (series.observed(t, n, c)) out.set(t, n, c, f(c, series.value(t, n, c)));
  return out;
}

}  // namespace

FeatureSeries apply_zscore(const FeatureSeries& series, const NormStats& stats) {
  return map_observed(series, stats,
                      [&](std::size_t c, double v) { return stats.normalize(c, v); });
}

FeatureSeries invert_zscore(const FeatureSeries& series, const NormStats& stats) {
  return map_observed(series, stats,
                      [&](std::size_t c, double v) { return stats.denormalize(c, v); });
}

void write_norm_stats(const std::filesystem::path& path, const NormStats& stats,
                      const std::vector<std::string>& channel_names) {
  if (channel_names.size() != stats.mean.size()) {
    throw ShapeError("channel name count does not match normalization stats");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "channel,mean,std\n";
  for (std::size_t c = 0; c < stats.mean.size(); ++c) {
    out << channel_names[c] << ',' << csv::format(stats.mean[c]) << ','
        << csv::format(stats.stddev[c]) << '\n';
  }
}

NormStats read_norm_stats(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto cm = table.column("mean");
  const auto cs = table.column("std");
  NormStats stats;
  for (const auto& row : table.rows) {
    stats.mean.push_back(csv::to_double(row[cm], path.string()));
    const double sd = csv::to_double(row[cs], path.string());
    if (!(sd > 0.0)) throw DataError(path.string() + ": non-positive standard deviation");
    stats.stddev.push_back(sd);
  }
  return stats;
}

std::vector<std::size_t> window_episodes(std::size_t begin, std::size_t end, std::size_t history,
                                         std::size_t horizon, std::size_t stride) {
  if (stride == 0) throw InvalidParameter("window stride must be positive");
  if (history == 0) throw InvalidParameter("history length must be positive");
  std::vector<std::size_t> starts;
  const std::size_t len = history + horizon;
  for (std::size_t s = begin; end >= len && s <= end - len; s += stride) starts.push_back(s);
  return starts;
}

std::vector<std::size_t> window_split(const SplitSpec& split, SplitPart part,
                                      std::size_t history, std::size_t horizon,
                                      std::size_t stride) {
  split.validate();
  switch (part) {
    case SplitPart::train:
      return window_episodes(0, split.train_end, history, horizon, stride);
    case SplitPart::validation:
      return window_episodes(split.train_end, split.val_end, history, horizon, stride);
    case SplitPart::test:
      return window_episodes(split.val_end, split.total, history, horizon, stride);
  }
  return {};
}

EpisodeBatch make_batch(const FeatureSeries& series, const AssignmentMatrix& gamma,
                        std::span<const std::size_t> starts, std::size_t history,
                        std::size_t horizon) {
  const std::size_t S = series.nodes();
  const std::size_t M = series.met_channels();
  if (gamma.stations() != S) {
    throw ShapeError("assignment has " + std::to_string(gamma.stations()) +
                     " stations, series has " + std::to_string(S));
  }
  if (starts.empty()) throw InvalidInput("cannot build an empty batch");
  const std::size_t B = starts.size();
  const std::size_t len = history + horizon;

  EpisodeBatch batch;
  batch.batch = B;
  batch.stations = S;
  batch.cities = gamma.cities();
  batch.history = history;
  batch.horizon = horizon;
  batch.met = M;

  auto column = [&](std::size_t offset, std::size_t channel) {
    Tensor out(B * S, 1);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t t = starts[b] + offset;
      for (std::size_t n = 0; n < S; ++n) {
        if (!series.observed(t, n, channel)) {
          throw DataError("missing value for station '" + series.node_ids()[n] + "' at " +
                          format_timestamp(series.timestamps()[t]) + "; impute first");
        }
        out(b * S + n, 0) = series.value(t, n, channel);
      }
    }
    return out;
  };
  auto met_block = [&](std::size_t offset) {
    Tensor out(B * S, M);
    for (std::size_t c = 0; c < M; ++c) {
      const Tensor col = column(offset, c + 1);
      for (std::size_t r = 0; r < B * S; ++r) out(r, c) = col(r, 0);
    }
    return out;
  };

  for (const auto s : starts) {
    if (s + len > series.steps()) {
      throw InvalidInput("window starting at " + std::to_string(s) + " runs past the series end");
    }
  }
  const Tensor city_mean = gamma.mean_operator();
  for (std::size_t k = 0; k < history; ++k) {
    batch.air_s.push_back(column(k, 0));
    batch.air_c.push_back(block_left_mul(city_mean, batch.air_s.back()));
  }
  for (std::size_t k = 0; k < len; ++k) {
    batch.met_s.push_back(met_block(k));
    batch.met_c.push_back(block_left_mul(city_mean, batch.met_s.back()));
  }
  for (std::size_t k = history; k < len; ++k) {
    batch.target_s.push_back(column(k, 0));
    batch.target_c.push_back(block_left_mul(city_mean, batch.target_s.back()));
  }
  batch.validate();
  return batch;
}

}  // namespace m2g2
