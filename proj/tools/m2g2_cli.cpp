// SPDX-License-Identifier: Apache-2.0
// Command-line front end: graph building, imputation, synthetic data,
// training, evaluation, ablations, period grid search and weight diagnostics.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "m2g2/config.hpp"
#include "m2g2/csv.hpp"
#include "m2g2/data_pipeline.hpp"
#include "m2g2/errors.hpp"
#include "m2g2/experiments.hpp"
#include "m2g2/synthetic.hpp"
#include "m2g2/timestamp.hpp"
#include "m2g2/trainer.hpp"

namespace fs = std::filesystem;
using namespace m2g2;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool synthetic = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool data_source) {
  cmd->add_option("--config", c.config_file, "flat key = value configuration file");
  cmd->add_option("--set", c.overrides, "override one key, e.g. --set train.lr=1e-3")
      ->allow_extra_args(false);
  cmd->add_option("--seed", c.seed, "run seed (replaces train.seeds)");
  cmd->add_option("--out-dir", c.out_dir, "output directory");
  cmd->add_flag("--quiet", c.quiet, "suppress progress output");
  if (data_source) {
    cmd->add_flag("--synthetic", c.synthetic,
                  "use the synth.* generator instead of the data.* CSV files");
  }
}

ExperimentConfig resolve(const Common& c) {
  std::optional<fs::path> file;
  if (!c.config_file.empty()) file = c.config_file;
  auto config = load_config(file, c.overrides);
  if (c.seed) config.train.seeds = {*c.seed};
  return config;
}

fs::path out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
}

PreparedData load_data(const Common& c, const ExperimentConfig& config) {
  return c.synthetic ? prepare_synthetic(config) : prepare_dataset(config);
}

EpochCallback progress(const Common& c, std::uint64_t seed) {
  if (c.quiet) return {};
  return [seed](const EpochRecord& r) {
    std::cerr << "seed " << seed << " epoch " << r.epoch << "  train " << r.train_loss
              << "  val " << r.val_loss << '\n';
  };
}

std::vector<std::vector<std::size_t>> parse_candidates(const std::string& text) {
  std::vector<std::vector<std::size_t>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';'))
    if (item.find_first_not_of(" ") != std::string::npos) out.push_back(parse_size_list(item));
  if (out.empty()) throw ConfigError("no period candidates given");
  return out;
}

int cmd_build_graph(const Common& c) {
  const auto config = resolve(c);
  if (config.data.stations_csv.empty()) throw ConfigError("data.stations must be set");
  PreparedData data;
  data.stations = read_stations_csv(config.data.stations_csv);
  build_graphs(data, config);
  auto dump = [&](const std::string& prefix, const ScaleGraph& g) {
    csv::write_matrix(out_path(c, prefix + "_distance_weights.csv"), g.dist_weights, g.node_ids);
    csv::write_matrix(out_path(c, prefix + "_adjacency.csv"), g.adjacency, g.node_ids);
    csv::write_matrix(out_path(c, prefix + "_propagation.csv"), g.propagation, g.node_ids);
  };
  dump("station", data.station_graph);
  dump("city", data.city_graph);
  std::vector<std::string> ids;
  for (const auto& s : data.stations) ids.push_back(s.station_id);
  csv::write_matrix(out_path(c, "assignment.csv"), data.graph.gamma.entries, ids);
  std::string cities = "city_id,latitude,longitude,elevation\n";
  for (const auto& city : data.cities) {
    cities += city.city_id + ',' + csv::format(city.latitude) + ',' + csv::format(city.longitude) +
              ',' + csv::format(city.elevation) + '\n';
  }
  write_text(out_path(c, "cities.csv"), cities);
  std::cout << "stations " << data.stations.size() << ", cities " << data.cities.size()
            << ", graphs written to " << c.out_dir << '\n';
  return 0;
}

int cmd_impute(const Common& c) {
  const auto config = resolve(c);
  if (config.data.stations_csv.empty() || config.data.measurements_csv.empty()) {
    throw ConfigError("data.stations and data.measurements must be set");
  }
  const auto stations = read_stations_csv(config.data.stations_csv);
  validate_stations(stations);
  std::vector<std::string> ids;
  for (const auto& s : stations) ids.push_back(s.station_id);
  const auto raw = load_series(config.data.measurements_csv, config.data.meteorology_csv,
                               config.data.pollutant, ids);
  const auto result = knn_impute(raw, distance_matrix(to_graph_nodes(stations)), config.knn);
  write_measurements_csv(out_path(c, "measurements_imputed.csv"), result.series,
                         config.data.pollutant);
  if (result.series.met_channels() > 0) {
    write_meteorology_csv(out_path(c, "meteorology_imputed.csv"), result.series);
  }
  std::cout << "filled " << result.filled << " of "
            << raw.steps() * raw.nodes() * raw.channels() << " cells\n";
  return 0;
}

int cmd_synth(const Common& c) {
  auto config = resolve(c);
  if (c.seed) config.synth.seed = *c.seed;
  const auto gen = gen_multiperiod(config.synth);
  write_stations_csv(out_path(c, "stations.csv"), gen.stations);
  write_measurements_csv(out_path(c, "measurements.csv"), gen.series, config.data.pollutant);
  if (gen.series.met_channels() > 0) write_meteorology_csv(out_path(c, "meteorology.csv"), gen.series);
  std::string labels = "step,timestamp,dominant_period\n";
  for (std::size_t t = 0; t < gen.dominant_period.size(); ++t) {
    labels += std::to_string(t) + ',' + format_timestamp(gen.series.timestamps()[t]) + ',' +
              std::to_string(gen.dominant_period[t]) + '\n';
  }
  write_text(out_path(c, "labels.csv"), labels);
  std::cout << "generated " << gen.series.steps() << " steps for " << gen.series.nodes()
            << " stations in " << c.out_dir << '\n';
  return 0;
}

int cmd_train(const Common& c) {
  const auto config = resolve(c);
  const auto data = load_data(c, config);
  const auto seed = config.train.seeds.front();
  const auto run = run_seed(config, data, seed, progress(c, seed));
  run.training.best.save_file(out_path(c, "checkpoint.txt"));
  write_training_log(out_path(c, "training_log.csv"), run.training.log);
  write_norm_stats(out_path(c, "norm_stats.csv"), data.stats, data.series.channel_names());
  write_text(out_path(c, "config.txt"), dump_config(config));
  MetricReport report;
  report.segments = horizon_segments(config.horizon, config.metric_segments);
  report.add_run(seed, run.test_metrics);
  write_text(out_path(c, "metrics.csv"), report_csv(report, "test"));
  std::cout << "best epoch " << run.training.best_epoch << " of " << run.training.stopped_epoch
            << ", validation loss " << run.training.best_val_loss << '\n'
            << report_text(report, "test");
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, bool dump_forecast) {
  const auto config = resolve(c);
  const auto data = load_data(c, config);
  auto params = ParamStore::load_file(checkpoint);
  if (dump_forecast) {
    const auto model = make_forecaster(config, data);
    const auto table = predict(model, params, split_windows(config, data, SplitPart::test),
                               data.stats, config.train.batch_size);
    write_text(out_path(c, "forecast.csv"), forecast_csv(table, data.series.node_ids()));
    std::cout << "wrote " << table.episodes << " test episodes to "
              << out_path(c, "forecast.csv").string() << '\n';
    return 0;
  }
  const auto report = evaluate_checkpoint(config, data, params);
  write_text(out_path(c, "metrics.csv"), report_csv(report, "test"));
  std::cout << report_text(report, "test");
  return 0;
}

int cmd_ablate(const Common& c, const std::string& variant_name) {
  const auto config = resolve(c);
  const auto variant = parse_variant(variant_name);
  const auto data = load_data(c, config);
  const auto result = ablate(config, data, variant);
  write_text(out_path(c, "ablation.csv"),
             report_csv(result.full, "full") + report_csv(result.variant, variant_name, false));
  std::cout << report_text(result.full, "full") << report_text(result.variant, variant_name);
  return 0;
}

int cmd_grid(const Common& c, const std::string& candidates) {
  const auto config = resolve(c);
  const auto data = load_data(c, config);
  const auto grid = grid_search_periods(config, data, parse_candidates(candidates));
  for (const auto& w : grid.warnings) std::cerr << "warning: " << w << '\n';
  const auto table = grid_csv(grid);
  write_text(out_path(c, "grid_p.csv"), table);
  std::cout << table;
  return 0;
}

int cmd_diagnose(const Common& c, const std::string& checkpoint) {
  const auto config = resolve(c);
  const auto data = prepare_synthetic(config);
  const auto model = make_forecaster(config, data);
  ParamStore params;
  if (checkpoint.empty()) {
    const auto seed = config.train.seeds.front();
    params = run_seed(config, data, seed, progress(c, seed)).training.best;
    params.save_file(out_path(c, "checkpoint.txt"));
  } else {
    params = ParamStore::load_file(checkpoint);
  }
  const auto result = weight_diagnostic(model, params, data, config.history);
  const double baseline =
      random_agreement_baseline(model, data, config.history, config.diagnostic_trials, 1000);
  write_text(out_path(c, "weight_diagnostic.csv"), diagnostic_csv(result, data.series));
  std::cout << "agreement " << result.agreement << " over " << result.steps.size()
            << " steps, untrained baseline " << baseline << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-scale graph forecaster for station air quality"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "list every subcommand's options");

  Common common;
  std::string checkpoint;
  std::string variant;
  std::string candidates = "1,2;1,4;1,8;1,2,4;1,2,8;1,4,8;1,2,4,8";

  auto* build_graph = app.add_subcommand("build-graph", "build station and city graphs");
  add_common(build_graph, common, false);
  auto* impute = app.add_subcommand("impute", "fill missing cells by spatio-temporal KNN");
  add_common(impute, common, false);
  auto* synth = app.add_subcommand("synth", "write a labeled multi-period synthetic data set");
  add_common(synth, common, false);
  auto* train_cmd = app.add_subcommand("train", "train one model and score it on the test split");
  add_common(train_cmd, common, true);
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  add_common(evaluate, common, true);
  evaluate->add_option("--checkpoint", checkpoint, "parameter file")->required();
  auto* forecast = app.add_subcommand("forecast", "dump test-split forecasts of a checkpoint");
  add_common(forecast, common, true);
  forecast->add_option("--checkpoint", checkpoint, "parameter file")->required();
  auto* ablate_cmd = app.add_subcommand("ablate", "compare the full model with a variant");
  add_common(ablate_cmd, common, true);
  ablate_cmd->add_option("--variant", variant,
                         "no_city_scale, no_station_to_city, plain_gru or fixed_scale_weights")
      ->required();
  auto* grid = app.add_subcommand("grid-p", "grid search over update-period vectors");
  add_common(grid, common, true);
  grid->add_option("--candidates", candidates, "semicolon-separated period lists");
  auto* diagnose = app.add_subcommand("diagnose-weights",
                                      "per-step dominant scale weight on synthetic data");
  add_common(diagnose, common, false);
  diagnose->add_option("--checkpoint", checkpoint, "trained parameters (trains if omitted)");
  app.add_subcommand("keys", "list every configuration key with its default")
      ->callback([] { std::cout << dump_config(ExperimentConfig{}); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*build_graph) return cmd_build_graph(common);
    if (*impute) return cmd_impute(common);
    if (*synth) return cmd_synth(common);
    if (*train_cmd) return cmd_train(common);
    if (*evaluate) return cmd_evaluate(common, checkpoint, false);
    if (*forecast) return cmd_evaluate(common, checkpoint, true);
    if (*ablate_cmd) return cmd_ablate(common, variant);
    if (*grid) return cmd_grid(common, candidates);
    if (*diagnose) return cmd_diagnose(common, checkpoint);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
