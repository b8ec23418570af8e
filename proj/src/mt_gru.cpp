// SPDX-License-Identifier: Apache-2.0
#include "m2g2/mt_gru.hpp"

#include "m2g2/errors.hpp"
#include "m2g2/init.hpp"

namespace m2g2 {
namespace {

Var affine(Var x, Var w_x, Var h, Var w_h, Var b) {
  return add_row(add(matmul(x, w_x), matmul(h, w_h)), b);
}

}  // namespace

void MtGruConfig::validate() const {
  if (periods.empty()) throw ConfigError("mt_gru: temporal scale vector is empty");
  for (std::size_t v = 0; v < periods.size(); ++v) {
    if (periods[v] < 1) throw ConfigError("mt_gru: periods must be >= 1");
    if (v > 0 && periods[v] <= periods[v - 1]) {
      throw ConfigError("mt_gru: periods must be strictly increasing");
    }
  }
  if (hidden == 0 || hidden % periods.size() != 0) {
    throw ConfigError("mt_gru: hidden width " + std::to_string(hidden) +
                      " is not divisible by " + std::to_string(periods.size()) + " parts");
  }
  if (input_width == 0) throw ConfigError("mt_gru: input width must be > 0");
}

void register_mt_gru_params(ParamStore& store, const std::string& prefix,
                            const MtGruConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t f = config.input_width, h = config.hidden, v = config.parts();
  auto glorot = [&](const std::string& name, std::size_t r, std::size_t c) {
    const std::string full = prefix + "." + name;
    store.add(full, seeded_init(r, c, seed, InitScheme::glorot_uniform, stream_id(full)));
  };
  auto zeros = [&](const std::string& name, std::size_t c) {
    store.add(prefix + "." + name, Tensor(1, c));
  };
  if (!config.bypass_scale_weights) {
    glorot("W_xp", f, v);
    glorot("W_hp", h, v);
    zeros("b_p", v);
  }
  glorot("W_xr", f, h);
  glorot("W_xz", f, h);
  glorot("W_xh", f, h);
  glorot("W_hr", h, h);
  glorot("W_hz", h, h);
  glorot("W_hh", h, h);
  zeros("b_r", h);
  zeros("b_z", h);
  zeros("b_h", h);
}

MtGruWeights MtGruWeights::bind(Tape& tape, ParamStore& store, const std::string& prefix,
                                const MtGruConfig& config) {
  auto p = [&](const char* name) { return tape.param(store, prefix + "." + name); };
  MtGruWeights w;
  if (!config.bypass_scale_weights) {
    w.w_xp = p("W_xp");
    w.w_hp = p("W_hp");
    w.b_p = p("b_p");
  }
  w.w_xr = p("W_xr");
  w.w_xz = p("W_xz");
  w.w_xh = p("W_xh");
  w.w_hr = p("W_hr");
  w.w_hz = p("W_hz");
  w.w_hh = p("W_hh");
  w.b_r = p("b_r");
  w.b_z = p("b_z");
  w.b_h = p("b_h");
  return w;
}

Var dynamic_scale_weights(Var x, Var h_prev, const MtGruWeights& weights) {
  return sigmoid(affine(x, weights.w_xp, h_prev, weights.w_hp, weights.b_p));
}

Var apply_scale_weights(Var h_prev, Var scale_weights) {
  const std::size_t parts = scale_weights.cols();
  if (parts == 0 || h_prev.cols() % parts != 0) {
    throw ConfigError("apply_scale_weights: hidden width " + std::to_string(h_prev.cols()) +
                      " is not divisible by " + std::to_string(parts) + " parts");
  }
  if (scale_weights.rows() != h_prev.rows()) {
    throw ShapeError("apply_scale_weights: weights " + scale_weights.value().shape_str() +
                     " vs hidden " + h_prev.value().shape_str());
  }
  return mul(repeat_cols(scale_weights, h_prev.cols() / parts), h_prev);
}

std::vector<std::size_t> eligible_parts(std::int64_t t, std::span<const std::size_t> periods) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < periods.size(); ++v) {
    if (t % static_cast<std::int64_t>(periods[v]) == 0) out.push_back(v);
  }
  return out;
}

MtGruStep mt_gru_step(Var x, Var h_prev, std::int64_t t, const MtGruConfig& config,
                      const MtGruWeights& weights) {
  if (h_prev.cols() != config.hidden || x.rows() != h_prev.rows() ||
      x.cols() != config.input_width) {
    throw ShapeError("mt_gru_step: input " + x.value().shape_str() + " / hidden " +
                     h_prev.value().shape_str() + " inconsistent with configured widths " +
                     std::to_string(config.input_width) + "/" + std::to_string(config.hidden));
  }
  MtGruStep step;
  if (config.bypass_scale_weights) {
    step.weighted_prev = h_prev;
  } else {
    step.scale_weights = dynamic_scale_weights(x, h_prev, weights);
    step.weighted_prev = apply_scale_weights(h_prev, step.scale_weights);
  }
  const Var hp = step.weighted_prev;

  const auto eligible = eligible_parts(t, config.periods);
  if (eligible.empty()) {
    step.hidden = hp;
    return step;
  }

  Var r = sigmoid(affine(x, weights.w_xr, hp, weights.w_hr, weights.b_r));
  Var z = sigmoid(affine(x, weights.w_xz, hp, weights.w_hz, weights.b_z));
  Var candidate = tanh(affine(x, weights.w_xh, mul(r, hp), weights.w_hh, weights.b_h));
  Var updated = add(mul(z, hp), mul(one_minus(z), candidate));

  if (eligible.size() == config.parts()) {
    step.hidden = updated;
    return step;
  }
  const std::size_t width = config.part_width();
  std::vector<Var> pieces;
  pieces.reserve(config.parts());
  std::size_t next = 0;
  for (std::size_t v = 0; v < config.parts(); ++v) {
    const bool update = next < eligible.size() && eligible[next] == v;
    if (update) ++next;
    pieces.push_back(slice_cols(update ? updated : hp, v * width, (v + 1) * width));
  }
  step.hidden = concat_cols(pieces);
  return step;
}

}  // namespace m2g2
