// SPDX-License-Identifier: Apache-2.0
#include "m2g2/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "m2g2/csv.hpp"
#include "m2g2/errors.hpp"
#include "m2g2/timestamp.hpp"

namespace m2g2 {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    return csv::to_double(v, "config key '" + key + "'");
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Entry {
  ConfigKey key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename Acc>
Entry size_entry(std::string name, std::string desc, Acc acc) {
  return {{name, std::move(desc)},
          [acc](const ExperimentConfig& c) { return std::to_string(acc(c)); },
          [acc, name](ExperimentConfig& c, const std::string& v) {
            acc(c) = static_cast<std::size_t>(parse_u64(name, v));
          }};
}

template <typename Acc>
Entry real_entry(std::string name, std::string desc, Acc acc) {
  return {{name, std::move(desc)}, [acc](const ExperimentConfig& c) { return csv::format(acc(c)); },
          [acc, name](ExperimentConfig& c, const std::string& v) { acc(c) = parse_real(name, v); }};
}

template <typename Acc>
Entry bool_entry(std::string name, std::string desc, Acc acc) {
  return {{name, std::move(desc)},
          [acc](const ExperimentConfig& c) { return std::string(acc(c) ? "true" : "false"); },
          [acc, name](ExperimentConfig& c, const std::string& v) { acc(c) = parse_bool(name, v); }};
}

template <typename Acc>
Entry string_entry(std::string name, std::string desc, Acc acc) {
  return {{name, std::move(desc)}, [acc](const ExperimentConfig& c) { return acc(c); },
          [acc](ExperimentConfig& c, const std::string& v) { acc(c) = v; }};
}

std::string format_segments(const std::vector<Segment>& segs) {
  std::string out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(segs[i].period) + ':' + csv::format(segs[i].amplitude) + ':' +
           std::to_string(segs[i].span);
  }
  return out;
}

std::vector<Segment> parse_segments(const std::string& key, const std::string& text) {
  std::vector<Segment> out;
  for (const auto& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 3) {
      throw ConfigError("config key '" + key + "': segments are period:amplitude:span, got '" +
                        item + "'");
    }
    out.push_back({static_cast<std::size_t>(parse_u64(key, parts[0])), parse_real(key, parts[1]),
                   static_cast<std::size_t>(parse_u64(key, parts[2]))});
  }
  return out;
}

#define M2G2_ACC(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(string_entry("data.stations", "stations CSV path", M2G2_ACC(data.stations_csv)));
    t.push_back(string_entry("data.measurements", "measurements CSV path",
                             M2G2_ACC(data.measurements_csv)));
    t.push_back(string_entry("data.meteorology", "meteorology CSV path (optional)",
                             M2G2_ACC(data.meteorology_csv)));
    t.push_back(string_entry("data.elevation", "elevation raster path (optional, flat if empty)",
                             M2G2_ACC(data.elevation_raster)));
    t.push_back(string_entry("data.pollutant", "pollutant to model", M2G2_ACC(data.pollutant)));
    t.push_back(size_entry("data.resample_factor", "raw steps per model step",
                           M2G2_ACC(data.resample_factor)));

    t.push_back(real_entry("graph.sigma_sq", "distance kernel bandwidth, km^2",
                           M2G2_ACC(graph.sigma_sq)));
    t.push_back(real_entry("graph.epsilon", "kernel threshold", M2G2_ACC(graph.epsilon)));
    t.push_back(real_entry("graph.max_rise_m", "elevation screen height, m",
                           M2G2_ACC(graph.max_rise_m)));
    t.push_back(size_entry("graph.samples", "elevation samples per segment",
                           M2G2_ACC(graph.samples)));

    t.push_back(real_entry("city_graph.sigma_sq", "city kernel bandwidth, km^2",
                           M2G2_ACC(city_graph.sigma_sq)));
    t.push_back(real_entry("city_graph.epsilon", "city kernel threshold",
                           M2G2_ACC(city_graph.epsilon)));
    t.push_back(real_entry("city_graph.max_rise_m", "city elevation screen height, m",
                           M2G2_ACC(city_graph.max_rise_m)));
    t.push_back(size_entry("city_graph.samples", "city elevation samples per segment",
                           M2G2_ACC(city_graph.samples)));

    t.push_back(size_entry("knn.k", "imputation neighbour count", M2G2_ACC(knn.k)));
    t.push_back(real_entry("knn.w_time", "cost per step of temporal offset", M2G2_ACC(knn.w_time)));
    t.push_back(real_entry("knn.w_space", "cost per km", M2G2_ACC(knn.w_space)));
    t.push_back(size_entry("knn.window", "temporal search window, steps",
                           M2G2_ACC(knn.time_window)));
    t.push_back(real_entry("knn.max_missing_rate", "per-station missing-rate ceiling",
                           M2G2_ACC(knn.max_missing_rate)));

    t.push_back(real_entry("split.train_fraction", "training share of steps",
                           M2G2_ACC(split.train_fraction)));
    t.push_back(real_entry("split.val_fraction", "validation share of steps",
                           M2G2_ACC(split.val_fraction)));
    t.push_back(string_entry("split.val_start", "validation start timestamp (optional)",
                             M2G2_ACC(split.val_start)));
    t.push_back(string_entry("split.test_start", "test start timestamp (optional)",
                             M2G2_ACC(split.test_start)));

    t.push_back(size_entry("model.history", "history steps T", M2G2_ACC(history)));
    t.push_back(size_entry("model.horizon", "forecast steps tau", M2G2_ACC(horizon)));
    t.push_back(size_entry("model.gcn_width", "graph convolution width",
                           M2G2_ACC(model.gcn_width)));
    t.push_back(size_entry("model.fuse_width", "cross-scale fusion width",
                           M2G2_ACC(model.fuse_width)));
    t.push_back(size_entry("model.gcn_depth", "stacked convolutions per scale",
                           M2G2_ACC(model.gcn_depth)));
    t.push_back({{"model.gcn_activation", "identity, relu, sigmoid or tanh"},
                 [](const ExperimentConfig& c) {
                   return std::string(to_string(c.model.gcn_activation));
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   try {
                     c.model.gcn_activation = parse_activation(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string("config key 'model.gcn_activation': ") +
                                       e.what());
                   }
                 }});
    t.push_back(size_entry("model.hidden", "recurrent hidden width C_h", M2G2_ACC(model.hidden)));
    t.push_back({{"model.periods", "comma-separated update periods P"},
                 [](const ExperimentConfig& c) { return format_size_list(c.model.periods); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.model.periods = parse_size_list(v);
                 }});
    t.push_back(bool_entry("model.bypass_scale_weights", "fix all scale weights to 1",
                           M2G2_ACC(model.bypass_scale_weights)));
    t.push_back(bool_entry("model.use_city_scale", "enable the city graph",
                           M2G2_ACC(model.use_city_scale)));
    t.push_back(bool_entry("model.station_to_city", "transfer station features to cities",
                           M2G2_ACC(model.station_to_city)));
    t.push_back({{"model.city_feedback", "own_prediction or aggregate_stations"},
                 [](const ExperimentConfig& c) {
                   return std::string(c.model.city_feedback == CityFeedback::own_prediction
                                          ? "own_prediction"
                                          : "aggregate_stations");
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "own_prediction") {
                     c.model.city_feedback = CityFeedback::own_prediction;
                   } else if (v == "aggregate_stations") {
                     c.model.city_feedback = CityFeedback::aggregate_stations;
                   } else {
                     throw ConfigError("config key 'model.city_feedback': unknown value '" + v +
                                       "'");
                   }
                 }});
    t.push_back(bool_entry("model.loss_includes_warmup", "add warm-up steps to the loss",
                           M2G2_ACC(model.loss_includes_warmup)));

    t.push_back(real_entry("train.lr", "Adam learning rate", M2G2_ACC(train.adam.lr)));
    t.push_back(real_entry("train.clip_norm", "gradient norm ceiling, 0 disables",
                           M2G2_ACC(train.adam.clip_norm)));
    t.push_back(size_entry("train.batch_size", "episodes per update",
                           M2G2_ACC(train.batch_size)));
    t.push_back(size_entry("train.epochs", "maximum epochs", M2G2_ACC(train.epochs)));
    t.push_back(size_entry("train.patience", "early-stopping patience, epochs",
                           M2G2_ACC(train.patience)));
    t.push_back({{"train.seeds", "comma-separated run seeds"},
                 [](const ExperimentConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.train.seeds.size(); ++i) {
                     if (i) out += ',';
                     out += std::to_string(c.train.seeds[i]);
                   }
                   return out;
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.seeds.clear();
                   for (const auto& s : split(v, ',')) c.train.seeds.push_back(parse_u64("train.seeds", s));
                 }});
    t.push_back(size_entry("train.stride", "training window stride",
                           M2G2_ACC(train.train_stride)));
    t.push_back(size_entry("eval.stride", "evaluation window stride, 0 = horizon",
                           M2G2_ACC(train.eval_stride)));
    t.push_back(size_entry("eval.segments", "equal horizon segments in reports",
                           M2G2_ACC(metric_segments)));
    t.push_back(size_entry("diagnostic.trials", "untrained models in the random baseline",
                           M2G2_ACC(diagnostic_trials)));

    t.push_back(size_entry("synth.stations", "synthetic station count", M2G2_ACC(synth.stations)));
    t.push_back(size_entry("synth.cities", "synthetic city count", M2G2_ACC(synth.cities)));
    t.push_back({{"synth.segments", "period:amplitude:span list"},
                 [](const ExperimentConfig& c) { return format_segments(c.synth.segments); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.synth.segments = parse_segments("synth.segments", v);
                 }});
    t.push_back(real_entry("synth.noise_sd", "observation noise", M2G2_ACC(synth.noise_sd)));
    t.push_back(real_entry("synth.phase_jitter", "station phase spread, rad",
                           M2G2_ACC(synth.phase_jitter)));
    t.push_back(real_entry("synth.city_signal", "shared city component amplitude",
                           M2G2_ACC(synth.city_signal)));
    t.push_back(real_entry("synth.city_signal_ar", "city component AR coefficient",
                           M2G2_ACC(synth.city_signal_ar)));
    t.push_back(size_entry("synth.met_channels", "meteorology channels",
                           M2G2_ACC(synth.met_channels)));
    t.push_back(real_entry("synth.met_ar", "meteorology AR coefficient", M2G2_ACC(synth.met_ar)));
    t.push_back(real_entry("synth.offset", "pollutant baseline", M2G2_ACC(synth.offset)));
    t.push_back({{"synth.seed", "generator seed"},
                 [](const ExperimentConfig& c) { return std::to_string(c.synth.seed); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.synth.seed = parse_u64("synth.seed", v);
                 }});
    return t;
  }();
  return table;
}

#undef M2G2_ACC

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries())
    if (e.key.name == key) return e;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  if (patience == 0) throw ConfigError("train.patience must be at least 1");
  if (epochs == 0) throw ConfigError("train.epochs must be at least 1");
  if (seeds.empty()) throw ConfigError("train.seeds must list at least one seed");
  if (train_stride == 0) throw ConfigError("train.stride must be at least 1");
  if (!(adam.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(adam.clip_norm >= 0.0)) throw ConfigError("train.clip_norm must be non-negative");
}

void ExperimentConfig::validate() const {
  model.validate();
  train.validate();
  if (history == 0) throw ConfigError("model.history must be at least 1");
  if (horizon == 0) throw ConfigError("model.horizon must be at least 1");
  if (metric_segments == 0 || metric_segments > horizon) {
    throw ConfigError("eval.segments must be in [1, horizon]");
  }
  if (data.resample_factor == 0) throw ConfigError("data.resample_factor must be at least 1");
  if (split.val_start.empty() != split.test_start.empty()) {
    throw ConfigError("split.val_start and split.test_start must be set together");
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& context) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(context + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = trim(std::string_view(body).substr(0, eq));
    find_entry(key);
    out[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

void apply_config(ExperimentConfig& config, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) find_entry(key).set(config, value);
}

std::pair<std::string, std::string> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + text + "' is not key=value");
  auto key = trim(std::string_view(text).substr(0, eq));
  find_entry(key);
  return {key, trim(std::string_view(text).substr(eq + 1))};
}

std::string config_value(const ExperimentConfig& config, const std::string& key) {
  return find_entry(key).get(config);
}

std::string dump_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& e : entries()) {
    out += "# " + e.key.description + "\n" + e.key.name + " = " + e.get(config) + "\n";
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::string cleaned;
  for (char ch : text)
    if (ch != '[' && ch != ']') cleaned.push_back(ch);
  for (const auto& item : split(cleaned, ',')) {
    out.push_back(static_cast<std::size_t>(parse_u64("list", item)));
  }
  if (out.empty()) throw ConfigError("expected a non-empty comma-separated list, got '" + text + "'");
  return out;
}

std::string format_size_list(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace m2g2
