// SPDX-License-Identifier: Apache-2.0
#include "m2g2/forecaster.hpp"

#include "m2g2/errors.hpp"
#include "m2g2/init.hpp"

namespace m2g2 {
namespace {

constexpr const char* kStationGru = "mt_gru_s";
constexpr const char* kCityGru = "mt_gru_c";

void check_rows(const std::vector<Tensor>& v, std::size_t count, std::size_t rows,
                std::size_t cols, const char* what) {
  if (v.size() != count) {
    throw ShapeError(std::string("EpisodeBatch: ") + what + " has " + std::to_string(v.size()) +
                     " steps, expected " + std::to_string(count));
  }
  for (const auto& t : v) {
    if (t.rows() != rows || t.cols() != cols) {
      throw ShapeError(std::string("EpisodeBatch: ") + what + " step " + t.shape_str() +
                       ", expected " + shape_str(rows, cols));
    }
  }
}

}  // namespace

void EpisodeBatch::validate() const {
  const std::size_t rs = batch * stations, rc = batch * cities;
  check_rows(air_s, history, rs, 1, "air_s");
  check_rows(met_s, history + horizon, rs, met, "met_s");
  check_rows(target_s, horizon, rs, 1, "target_s");
  check_rows(air_c, history, rc, 1, "air_c");
  check_rows(met_c, history + horizon, rc, met, "met_c");
  check_rows(target_c, horizon, rc, 1, "target_c");
}

MsGcnConfig ModelConfig::ms_gcn() const {
  MsGcnConfig c;
  c.met_channels = met_channels;
  c.gcn_width = gcn_width;
  c.fuse_width = fuse_width;
  c.depth = gcn_depth;
  c.activation = gcn_activation;
  c.use_city_scale = use_city_scale;
  c.station_to_city = station_to_city;
  return c;
}

MtGruConfig ModelConfig::mt_gru() const {
  MtGruConfig c;
  c.input_width = fuse_width + met_channels + 1;
  c.hidden = hidden;
  c.periods = periods;
  c.bypass_scale_weights = bypass_scale_weights;
  return c;
}

void ModelConfig::validate() const {
  ms_gcn().validate();
  mt_gru().validate();
}

Forecaster::Forecaster(ModelConfig config, MultiScaleGraph graph)
    : config_(std::move(config)), graph_(std::move(graph)) {
  config_.validate();
}

void Forecaster::init_params(ParamStore& store, std::uint64_t seed) const {
  register_ms_gcn_params(store, config_.ms_gcn(), seed);
  const MtGruConfig gru = config_.mt_gru();
  register_mt_gru_params(store, kStationGru, gru, seed);
  if (config_.use_city_scale) register_mt_gru_params(store, kCityGru, gru, seed);
  auto head = [&](const std::string& w, const std::string& b) {
    store.add(w, seeded_init(config_.hidden, 1, seed, InitScheme::glorot_uniform, stream_id(w)));
    store.add(b, Tensor(1, 1));
  };
  head("head.W_s", "head.b_s");
  if (config_.use_city_scale) head("head.W_c", "head.b_c");
}

ForecastOutput Forecaster::forward(Tape& tape, ParamStore& store, const EpisodeBatch& batch,
                                   bool record_scale_weights) const {
  batch.validate();
  if (batch.stations != graph_.stations() || batch.cities != graph_.cities()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.stations) + " stations / " +
                     std::to_string(batch.cities) + " cities, graph has " +
                     std::to_string(graph_.stations()) + " / " + std::to_string(graph_.cities()));
  }
  if (batch.met != config_.met_channels) {
    throw ShapeError("forward: batch has " + std::to_string(batch.met) +
                     " meteorological channels, model expects " +
                     std::to_string(config_.met_channels));
  }
  const bool city = config_.use_city_scale;
  const MsGcnConfig gcn_cfg = config_.ms_gcn();
  const MtGruConfig gru_cfg = config_.mt_gru();
  const MsGcnWeights gcn_w = MsGcnWeights::bind(tape, store, gcn_cfg);
  const MtGruWeights gru_s = MtGruWeights::bind(tape, store, kStationGru, gru_cfg);
  MtGruWeights gru_c;
  if (city) gru_c = MtGruWeights::bind(tape, store, kCityGru, gru_cfg);
  const Var head_ws = tape.param(store, "head.W_s");
  const Var head_bs = tape.param(store, "head.b_s");
  Var head_wc, head_bc;
  if (city) {
    head_wc = tape.param(store, "head.W_c");
    head_bc = tape.param(store, "head.b_c");
  }

  const std::size_t rs = batch.batch * batch.stations;
  const std::size_t rc = batch.batch * batch.cities;
  Var h_s = tape.constant(Tensor(rs, config_.hidden));
  Var h_c = city ? tape.constant(Tensor(rc, config_.hidden)) : Var();
  Var prev_s = tape.constant(Tensor(rs, 1));
  Var prev_c = tape.constant(Tensor(rc, 1));

  ForecastOutput out;
  const std::size_t T = batch.history;
  for (std::size_t t = 1; t <= batch.steps(); ++t) {
    if (t >= 2 && t - 1 <= T) {
      prev_s = tape.constant(batch.air_s[t - 2]);
      prev_c = tape.constant(batch.air_c[t - 2]);
    } else if (t - 1 > T) {
      prev_s = out.station.back();
      if (city && config_.city_feedback == CityFeedback::own_prediction) {
        prev_c = out.city.back();
      } else {
        prev_c = block_left_mul(graph_.city_mean, prev_s);
      }
    }
    Var xs = concat_cols({prev_s, tape.constant(batch.met_s[t - 1])});
    Var xc = concat_cols({prev_c, tape.constant(batch.met_c[t - 1])});
    const FusedFeatures fused = ms_gcn_step(xs, xc, graph_, gcn_w, gcn_cfg);

    const std::int64_t counter = config_.step_origin + static_cast<std::int64_t>(t) - 1;
    const MtGruStep step_s = mt_gru_step(fused.station, h_s, counter, gru_cfg, gru_s);
    h_s = step_s.hidden;
    if (record_scale_weights && step_s.scale_weights.valid()) {
      out.station_scale_weights.push_back(step_s.scale_weights);
    }
    if (city) h_c = mt_gru_step(fused.city, h_c, counter, gru_cfg, gru_c).hidden;

    const bool forecast = t > T;
    if (!forecast && !config_.loss_includes_warmup) continue;
    Var yhat_s = add_row(matmul(h_s, head_ws), head_bs);
    Var yhat_c = city ? add_row(matmul(h_c, head_wc), head_bc) : Var();
    if (forecast) {
      out.station.push_back(yhat_s);
      if (city) out.city.push_back(yhat_c);
    } else {
      out.warmup_station.push_back(yhat_s);
      if (city) out.warmup_city.push_back(yhat_c);
    }
  }
  return out;
}

Var Forecaster::loss(Tape& tape, const ForecastOutput& out, const EpisodeBatch& batch) const {
  std::vector<Var> ps(out.station.begin(), out.station.end());
  std::vector<Var> pc(out.city.begin(), out.city.end());
  std::vector<Tensor> ts(batch.target_s.begin(), batch.target_s.end());
  std::vector<Tensor> tc(batch.target_c.begin(), batch.target_c.end());
  if (config_.loss_includes_warmup) {
    ps.insert(ps.begin(), out.warmup_station.begin(), out.warmup_station.end());
    pc.insert(pc.begin(), out.warmup_city.begin(), out.warmup_city.end());
    ts.insert(ts.begin(), batch.air_s.begin(), batch.air_s.end());
    tc.insert(tc.begin(), batch.air_c.begin(), batch.air_c.end());
  }
  if (!config_.use_city_scale) tc.clear();
  return two_scale_mse(tape, ps, pc, ts, tc);
}

Var two_scale_mse(Tape& tape, std::span<const Var> pred_s, std::span<const Var> pred_c,
                  std::span<const Tensor> target_s, std::span<const Tensor> target_c) {
  if (pred_s.size() != target_s.size() || pred_c.size() != target_c.size()) {
    throw ShapeError("two_scale_mse: prediction/target step counts differ");
  }
  auto term = [&](std::span<const Var> pred, std::span<const Tensor> target) -> Var {
    Var acc;
    for (std::size_t t = 0; t < pred.size(); ++t) {
      if (!pred[t].value().same_shape(target[t])) {
        throw ShapeError("two_scale_mse: prediction " + pred[t].value().shape_str() +
                         " vs target " + target[t].shape_str());
      }
      Var sq = sum_squares(sub(pred[t], tape.constant(target[t])));
      acc = acc.valid() ? add(acc, sq) : sq;
    }
    const double denom = static_cast<double>(pred.front().rows() * pred.size());
    return scale(acc, 1.0 / denom);
  };
  Var total;
  if (!pred_s.empty()) total = term(pred_s, target_s);
  if (!pred_c.empty()) {
    Var c = term(pred_c, target_c);
    total = total.valid() ? add(total, c) : c;
  }
  return total.valid() ? total : tape.constant(Tensor(1, 1));
}

}  // namespace m2g2
