// SPDX-License-Identifier: Apache-2.0
#include "m2g2/experiments.hpp"

#include <algorithm>
#include <map>
#include <memory>

#include "m2g2/csv.hpp"
#include "m2g2/elevation.hpp"
#include "m2g2/errors.hpp"
#include "m2g2/synthetic.hpp"
#include "m2g2/timestamp.hpp"

namespace m2g2 {

void build_graphs(PreparedData& data, const ExperimentConfig& config) {
  validate_stations(data.stations);
  data.cities = city_centroids(data.stations);
  std::unique_ptr<ElevationProfile> terrain;
  if (config.data.elevation_raster.empty()) {
    terrain = std::make_unique<FlatElevation>();
  } else {
    terrain = std::make_unique<RasterElevation>(RasterElevation::load(config.data.elevation_raster));
  }
  data.station_graph = build_scale_graph(to_graph_nodes(data.stations), config.graph, *terrain);
  data.city_graph = build_scale_graph(to_graph_nodes(data.cities), config.city_graph, *terrain);
  data.graph = MultiScaleGraph::from(data.station_graph, data.city_graph,
                                     build_assignment(data.stations, data.cities));
}

PreparedData prepare_series(const ExperimentConfig& config, std::vector<StationRecord> stations,
                            FeatureSeries raw, std::vector<std::size_t> labels) {
  PreparedData data;
  data.stations = std::move(stations);
  data.labels = std::move(labels);
  if (raw.nodes() != data.stations.size()) {
    throw ShapeError("series has " + std::to_string(raw.nodes()) + " stations, station list has " +
                     std::to_string(data.stations.size()));
  }
  for (std::size_t i = 0; i < raw.nodes(); ++i) {
    if (raw.node_ids()[i] != data.stations[i].station_id) {
      throw InvalidInput("series station order does not match the station list at '" +
                         raw.node_ids()[i] + "'");
    }
  }
  build_graphs(data, config);
  if (config.split.val_start.empty()) {
    data.split = split_by_fraction(raw.steps(), config.split.train_fraction,
                                   config.split.val_fraction);
  } else {
    data.split = split_by_timestamps(raw, parse_timestamp(config.split.val_start),
                                     parse_timestamp(config.split.test_start));
  }
  data.stats = fit_zscore(raw, data.split);
  data.series = apply_zscore(raw, data.stats);
  return data;
}

PreparedData prepare_dataset(const ExperimentConfig& config) {
  if (config.data.stations_csv.empty() || config.data.measurements_csv.empty()) {
    throw ConfigError("data.stations and data.measurements must be set");
  }
  auto stations = read_stations_csv(config.data.stations_csv);
  validate_stations(stations);
  std::vector<std::string> ids;
  for (const auto& s : stations) ids.push_back(s.station_id);
  const auto raw = load_series(config.data.measurements_csv, config.data.meteorology_csv,
                               config.data.pollutant, ids);
  const auto imputed = knn_impute(raw, distance_matrix(to_graph_nodes(stations)), config.knn);
  return prepare_series(config, std::move(stations),
                        resample_mean(imputed.series, config.data.resample_factor));
}

PreparedData prepare_synthetic(const ExperimentConfig& config) {
  auto gen = gen_multiperiod(config.synth);
  return prepare_series(config, std::move(gen.stations), std::move(gen.series),
                        std::move(gen.dominant_period));
}

Forecaster make_forecaster(const ExperimentConfig& config, const PreparedData& data) {
  ModelConfig model = config.model;
  model.met_channels = data.series.met_channels();
  return Forecaster(model, data.graph);
}

WindowSet split_windows(const ExperimentConfig& config, const PreparedData& data, SplitPart part) {
  WindowSet w;
  w.series = &data.series;
  w.gamma = &data.graph.gamma;
  w.history = config.history;
  w.horizon = config.horizon;
  const std::size_t stride =
      part == SplitPart::train ? config.train.train_stride : config.eval_stride();
  w.starts = window_split(data.split, part, config.history, config.horizon, stride);
  return w;
}

ForecastTable predict(const Forecaster& model, ParamStore& params, const WindowSet& windows,
                      const NormStats& stats, std::size_t batch_size) {
  if (windows.starts.empty()) throw DataError("no episodes to forecast");
  ForecastTable table;
  table.episodes = windows.starts.size();
  table.horizon = windows.horizon;
  table.stations = windows.series->nodes();
  table.predicted.resize(table.episodes * table.horizon * table.stations);
  table.actual.resize(table.predicted.size());
  const std::size_t S = table.stations;
  for (std::size_t i = 0; i < windows.starts.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, windows.starts.size() - i);
    const auto batch = windows.batch(std::span(windows.starts).subspan(i, n));
    Tape tape(GradMode::disabled);
    const auto out = model.forward(tape, params, batch);
    for (std::size_t k = 0; k < table.horizon; ++k) {
      const Tensor& pred = out.station[k].value();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t s = 0; s < S; ++s) {
          const auto idx = table.index(i + b, k, s);
          table.predicted[idx] = stats.denormalize(0, pred(b * S + s, 0));
          table.actual[idx] = stats.denormalize(0, batch.target_s[k](b * S + s, 0));
        }
    }
  }
  return table;
}

RunResult run_seed(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed,
                   const EpochCallback& on_epoch) {
  const Forecaster model = make_forecaster(config, data);
  ParamStore params;
  model.init_params(params, seed);
  RunResult run;
  run.seed = seed;
  run.training = train(model, std::move(params), split_windows(config, data, SplitPart::train),
                       split_windows(config, data, SplitPart::validation), config.train, seed,
                       on_epoch);
  const auto table = predict(model, run.training.best, split_windows(config, data, SplitPart::test),
                             data.stats, config.train.batch_size);
  run.test_metrics =
      segment_metrics(table, horizon_segments(config.horizon, config.metric_segments));
  return run;
}

SweepResult seed_sweep(const ExperimentConfig& config, const PreparedData& data,
                       const EpochCallback& on_epoch) {
  config.validate();
  SweepResult out;
  out.report.segments = horizon_segments(config.horizon, config.metric_segments);
  for (const auto seed : config.train.seeds) {
    out.runs.push_back(run_seed(config, data, seed, on_epoch));
    out.report.add_run(seed, out.runs.back().test_metrics);
  }
  out.report.check_invariants();
  return out;
}

MetricReport evaluate_checkpoint(const ExperimentConfig& config, const PreparedData& data,
                                 ParamStore& params, std::uint64_t seed) {
  const Forecaster model = make_forecaster(config, data);
  const auto table = predict(model, params, split_windows(config, data, SplitPart::test),
                             data.stats, config.train.batch_size);
  MetricReport report;
  report.segments = horizon_segments(config.horizon, config.metric_segments);
  report.add_run(seed, segment_metrics(table, report.segments));
  report.check_invariants();
  return report;
}

std::string forecast_csv(const ForecastTable& table, const std::vector<std::string>& station_ids) {
  table.validate();
  if (station_ids.size() != table.stations) throw ShapeError("station id count mismatch");
  std::string out = "episode,station_id,horizon_step,predicted,actual\n";
  for (std::size_t e = 0; e < table.episodes; ++e)
    for (std::size_t s = 0; s < table.stations; ++s)
      for (std::size_t k = 0; k < table.horizon; ++k) {
        const auto i = table.index(e, k, s);
        out += std::to_string(e + 1) + ',' + station_ids[s] + ',' + std::to_string(k + 1) + ',' +
               csv::format(table.predicted[i]) + ',' + csv::format(table.actual[i]) + '\n';
      }
  return out;
}

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "no_city_scale") return Variant::no_city_scale;
  if (name == "no_station_to_city") return Variant::no_station_to_city;
  if (name == "plain_gru") return Variant::plain_gru;
  if (name == "fixed_scale_weights") return Variant::fixed_scale_weights;
  throw ConfigError("unknown ablation variant '" + name +
                    "' (expected no_city_scale, no_station_to_city, plain_gru or "
                    "fixed_scale_weights)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_city_scale: return "no_city_scale";
    case Variant::no_station_to_city: return "no_station_to_city";
    case Variant::plain_gru: return "plain_gru";
    case Variant::fixed_scale_weights: return "fixed_scale_weights";
  }
  return "unknown";
}

ModelConfig apply_variant(ModelConfig model, Variant v) {
  switch (v) {
    case Variant::full:
      break;
    case Variant::no_city_scale:
      model.use_city_scale = false;
      break;
    case Variant::no_station_to_city:
      model.station_to_city = false;
      break;
    case Variant::plain_gru:
      model.periods = {1};
      model.bypass_scale_weights = true;
      break;
    case Variant::fixed_scale_weights:
      model.bypass_scale_weights = true;
      break;
  }
  return model;
}

AblationResult ablate(const ExperimentConfig& config, const PreparedData& data, Variant variant) {
  AblationResult out;
  out.full = seed_sweep(config, data).report;
  ExperimentConfig alt = config;
  alt.model = apply_variant(config.model, variant);
  out.variant = seed_sweep(alt, data).report;
  return out;
}

GridResult grid_search_periods(const ExperimentConfig& config, const PreparedData& data,
                               const std::vector<std::vector<std::size_t>>& candidates) {
  GridResult grid;
  for (const auto& periods : candidates) {
    ExperimentConfig c = config;
    c.model.periods = periods;
    try {
      c.model.validate();
    } catch (const std::invalid_argument& e) {
      grid.warnings.push_back("skipping P=[" + format_size_list(periods) + "]: " + e.what());
      continue;
    }
    grid.rows.push_back({periods, seed_sweep(c, data).report});
  }
  std::stable_sort(grid.rows.begin(), grid.rows.end(), [](const GridRow& a, const GridRow& b) {
    const double ma = a.report.overall_mae(), mb = b.report.overall_mae();
    if (ma != mb) return ma < mb;
    return a.report.overall_rmse() < b.report.overall_rmse();
  });
  return grid;
}

std::string grid_csv(const GridResult& grid) {
  std::string out = "rank,periods";
  if (!grid.rows.empty()) {
    for (const auto& seg : grid.rows.front().report.segments) {
      const auto tag = "steps_" + std::to_string(seg.begin + 1) + "_" + std::to_string(seg.end);
      out += "," + tag + "_mae," + tag + "_rmse";
    }
  }
  out += ",mean_mae,mean_rmse\n";
  for (std::size_t r = 0; r < grid.rows.size(); ++r) {
    const auto& row = grid.rows[r];
    out += std::to_string(r + 1) + ",\"[" + format_size_list(row.periods) + "]\"";
    for (const auto& m : row.report.mean()) out += ',' + csv::format(m.mae) + ',' + csv::format(m.rmse);
    out += ',' + csv::format(row.report.overall_mae()) + ',' +
           csv::format(row.report.overall_rmse()) + '\n';
  }
  return out;
}

std::vector<std::size_t> label_ranks(const std::vector<std::size_t>& labels, std::size_t parts) {
  if (parts == 0) throw InvalidParameter("part count must be positive");
  std::vector<std::size_t> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto l : labels) {
    const auto rank =
        static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), l) -
                                 distinct.begin());
    if (distinct.size() == parts || distinct.size() == 1) {
      out.push_back(std::min(rank, parts - 1));
    } else {
      const double scaled = static_cast<double>(rank) * static_cast<double>(parts - 1) /
                            static_cast<double>(distinct.size() - 1);
      out.push_back(static_cast<std::size_t>(std::lround(scaled)));
    }
  }
  return out;
}

DiagnosticResult weight_diagnostic(const Forecaster& model, ParamStore& params,
                                   const PreparedData& data, std::size_t history,
                                   std::size_t batch_size) {
  if (data.labels.size() != data.series.steps()) {
    throw InvalidInput("weight diagnostic needs one period label per step");
  }
  const std::size_t V = model.config().periods.size();
  const std::size_t S = data.series.nodes();
  WindowSet windows;
  windows.series = &data.series;
  windows.gamma = &data.graph.gamma;
  windows.history = history;
  windows.horizon = 0;
  windows.starts = window_episodes(0, data.series.steps(), history, 0, 1);

  DiagnosticResult out;
  for (std::size_t i = 0; i < windows.starts.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, windows.starts.size() - i);
    const auto batch = windows.batch(std::span(windows.starts).subspan(i, n));
    Tape tape(GradMode::disabled);
    const auto fwd = model.forward(tape, params, batch, true);
    for (std::size_t b = 0; b < n; ++b) {
      std::vector<double> mean(V, 1.0);
      if (!fwd.station_scale_weights.empty()) {
        const Tensor& w = fwd.station_scale_weights.back().value();
        std::fill(mean.begin(), mean.end(), 0.0);
        for (std::size_t s = 0; s < S; ++s)
          for (std::size_t v = 0; v < V; ++v) mean[v] += w(b * S + s, v);
        for (auto& m : mean) m /= static_cast<double>(S);
      }
      const std::size_t step = windows.starts[i + b] + history - 1;
      out.steps.push_back(step);
      out.argmax.push_back(static_cast<std::size_t>(
          std::max_element(mean.begin(), mean.end()) - mean.begin()));
      out.weights.push_back(std::move(mean));
      out.labels.push_back(data.labels[step]);
    }
  }
  const auto ranks = label_ranks(out.labels, V);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) hits += ranks[i] == out.argmax[i] ? 1 : 0;
  out.agreement = ranks.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(ranks.size());
  return out;
}

double random_agreement_baseline(const Forecaster& model, const PreparedData& data,
                                 std::size_t history, std::size_t trials,
                                 std::uint64_t base_seed) {
  if (trials == 0) throw InvalidParameter("baseline needs at least one trial");
  double total = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    ParamStore params;
    model.init_params(params, base_seed + i);
    total += weight_diagnostic(model, params, data, history).agreement;
  }
  return total / static_cast<double>(trials);
}

std::string diagnostic_csv(const DiagnosticResult& result, const FeatureSeries& series) {
  std::string out = "step,timestamp,label_period";
  const std::size_t V = result.weights.empty() ? 0 : result.weights.front().size();
  for (std::size_t v = 0; v < V; ++v) out += ",weight_" + std::to_string(v + 1);
  out += ",argmax_part\n";
  for (std::size_t i = 0; i < result.steps.size(); ++i) {
    out += std::to_string(result.steps[i]) + ',' +
           format_timestamp(series.timestamps()[result.steps[i]]) + ',' +
           std::to_string(result.labels[i]);
    for (const double w : result.weights[i]) out += ',' + csv::format(w);
    out += ',' + std::to_string(result.argmax[i] + 1) + '\n';
  }
  return out;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides) {
  ExperimentConfig config;
  if (file) apply_config(config, read_config_file(*file));
  std::map<std::string, std::string> values;
  for (const auto& o : overrides) {
    auto [k, v] = parse_override(o);
    values[k] = v;
  }
  apply_config(config, values);
  config.validate();
  return config;
}

}  // namespace m2g2
