// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "m2g2/errors.hpp"
#include "m2g2/forecaster.hpp"
#include "m2g2/grad_check.hpp"
#include "oracles.hpp"

using namespace m2g2;
using testing_support::max_diff;
using testing_support::multi_graph;
using testing_support::to_mat;
using testing_support::to_tensor;

namespace {

struct Setup {
  oracle::Mat adj_s, adj_c;
  std::vector<std::size_t> city_of;
  std::size_t cities = 0;
};

Setup small_setup() {
  Setup s;
  s.city_of = {0, 0, 1, 1};
  s.cities = 2;
  s.adj_s = {{0, 1, 0, 0}, {1, 0, 1, 0}, {0, 1, 0, 1}, {0, 0, 1, 0}};
  s.adj_c = {{0, 1}, {1, 0}};
  return s;
}

/// Per-city means of the rows of every episode block.
Tensor city_means(const Tensor& station, const std::vector<std::size_t>& city_of,
                  std::size_t cities) {
  const std::size_t S = city_of.size(), B = station.rows() / S;
  Tensor out(B * cities, station.cols());
  std::vector<double> members(cities, 0.0);
  for (auto c : city_of) members[c] += 1.0;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t f = 0; f < station.cols(); ++f)
        out(b * cities + city_of[i], f) += station(b * S + i, f) / members[city_of[i]];
  return out;
}

EpisodeBatch random_batch(const Setup& s, std::size_t B, std::size_t T, std::size_t tau,
                          std::size_t M, std::mt19937_64& rng) {
  EpisodeBatch e;
  e.batch = B;
  e.stations = s.city_of.size();
  e.cities = s.cities;
  e.history = T;
  e.horizon = tau;
  e.met = M;
  const std::size_t rows = B * e.stations;
  for (std::size_t t = 0; t < T; ++t) e.air_s.push_back(to_tensor(oracle::random_mat(rows, 1, rng)));
  for (std::size_t t = 0; t < T + tau; ++t)
    e.met_s.push_back(to_tensor(oracle::random_mat(rows, M, rng)));
  for (std::size_t t = 0; t < tau; ++t)
    e.target_s.push_back(to_tensor(oracle::random_mat(rows, 1, rng)));
  for (const auto& a : e.air_s) e.air_c.push_back(city_means(a, s.city_of, s.cities));
  for (const auto& m : e.met_s) e.met_c.push_back(city_means(m, s.city_of, s.cities));
  for (const auto& y : e.target_s) e.target_c.push_back(city_means(y, s.city_of, s.cities));
  return e;
}

ModelConfig small_model(std::size_t M) {
  ModelConfig m;
  m.met_channels = M;
  m.gcn_width = 3;
  m.fuse_width = 4;
  m.hidden = 6;
  m.periods = {1, 2, 4};
  return m;
}

oracle::Mat value(const ParamStore& p, const std::string& name) { return to_mat(p.value(name)); }

oracle::MtGru cell_from(const ParamStore& p, const std::string& prefix, const ModelConfig& m) {
  oracle::MtGru c;
  c.periods = m.periods;
  c.bypass = m.bypass_scale_weights;
  if (!c.bypass) {
    c.w_xp = value(p, prefix + ".W_xp");
    c.w_hp = value(p, prefix + ".W_hp");
    c.b_p = value(p, prefix + ".b_p")[0];
  }
  c.gru.w_xr = value(p, prefix + ".W_xr");
  c.gru.w_xz = value(p, prefix + ".W_xz");
  c.gru.w_xh = value(p, prefix + ".W_xh");
  c.gru.w_hr = value(p, prefix + ".W_hr");
  c.gru.w_hz = value(p, prefix + ".W_hz");
  c.gru.w_hh = value(p, prefix + ".W_hh");
  c.gru.b_r = value(p, prefix + ".b_r")[0];
  c.gru.b_z = value(p, prefix + ".b_z")[0];
  c.gru.b_h = value(p, prefix + ".b_h")[0];
  return c;
}

oracle::Mat rows_of(const Tensor& t, std::size_t begin, std::size_t count) {
  oracle::Mat m;
  for (std::size_t i = begin; i < begin + count; ++i) {
    m.emplace_back();
    for (std::size_t j = 0; j < t.cols(); ++j) m.back().push_back(t(i, j));
  }
  return m;
}

struct Rollout {
  std::vector<oracle::Mat> station, city;
};

/// Unrolls one episode with the reference building blocks.
Rollout reference_rollout(const Setup& s, const ParamStore& p, const ModelConfig& m,
                          const EpisodeBatch& e, std::size_t b, bool aggregate_feedback) {
  const std::size_t S = s.city_of.size(), C = s.cities, T = e.history;
  oracle::Mat gamma = oracle::zeros(S, C);
  for (std::size_t i = 0; i < S; ++i) gamma[i][s.city_of[i]] = 1.0;
  const auto cell_s = cell_from(p, "mt_gru_s", m);
  const auto cell_c = cell_from(p, "mt_gru_c", m);
  oracle::Mat h_s = oracle::zeros(S, m.hidden), h_c = oracle::zeros(C, m.hidden);
  oracle::Mat prev_s = oracle::zeros(S, 1), prev_c = oracle::zeros(C, 1);
  auto head = [&](const oracle::Mat& h, const std::string& w, const std::string& bias) {
    oracle::Mat y = oracle::mul(h, value(p, w));
    for (auto& row : y) row[0] += value(p, bias)[0][0];
    return y;
  };
  Rollout r;
  for (std::size_t t = 1; t <= e.steps(); ++t) {
    if (t >= 2 && t <= T + 1) {
      prev_s = rows_of(e.air_s[t - 2], b * S, S);
      prev_c = rows_of(e.air_c[t - 2], b * C, C);
    } else if (t > T + 1) {
      prev_s = r.station.back();
      if (aggregate_feedback) {
        prev_c = oracle::zeros(C, 1);
        std::vector<double> n(C, 0.0);
        for (std::size_t i = 0; i < S; ++i) n[s.city_of[i]] += 1.0;
        for (std::size_t i = 0; i < S; ++i) prev_c[s.city_of[i]][0] += prev_s[i][0] / n[s.city_of[i]];
      } else {
        prev_c = r.city.back();
      }
    }
    const auto xs = oracle::hcat(prev_s, rows_of(e.met_s[t - 1], b * S, S));
    const auto xc = oracle::hcat(prev_c, rows_of(e.met_c[t - 1], b * C, C));
    const auto fused = oracle::ms_gcn(xs, xc, s.adj_s, s.adj_c, gamma, value(p, "ms_gcn.W_s_gcn.0"),
                                      value(p, "ms_gcn.W_c_gcn.0"), value(p, "ms_gcn.W_s_f"),
                                      value(p, "ms_gcn.W_c_f"));
    h_s = oracle::mt_gru_step(fused.station, h_s, static_cast<long>(t), cell_s);
    h_c = oracle::mt_gru_step(fused.city, h_c, static_cast<long>(t), cell_c);
    if (t > T) {
      r.station.push_back(head(h_s, "head.W_s", "head.b_s"));
      r.city.push_back(head(h_c, "head.W_c", "head.b_c"));
    }
  }
  return r;
}

}  // namespace

TEST_CASE("forward pass matches a hand-unrolled reference") {
  std::mt19937_64 rng(41);
  const Setup s = small_setup();
  for (const auto feedback : {CityFeedback::own_prediction, CityFeedback::aggregate_stations}) {
    for (const bool bypass : {false, true}) {
      ModelConfig m = small_model(2);
      m.city_feedback = feedback;
      m.bypass_scale_weights = bypass;
      const Forecaster model(m, multi_graph(s.adj_s, s.adj_c, s.city_of));
      ParamStore p;
      model.init_params(p, 5);
      for (auto& e : p.entries())
        for (double& v : e.value.values()) v += 0.05;
      const EpisodeBatch batch = random_batch(s, 3, 5, 4, 2, rng);
      Tape tape(GradMode::disabled);
      const auto out = model.forward(tape, p, batch);
      REQUIRE(out.station.size() == 4);
      REQUIRE(out.city.size() == 4);
      double worst = 0.0;
      for (std::size_t b = 0; b < 3; ++b) {
        const auto ref = reference_rollout(s, p, m, batch, b,
                                           feedback == CityFeedback::aggregate_stations);
        for (std::size_t k = 0; k < 4; ++k) {
          worst = std::max(worst, max_diff(rows_of(out.station[k].value(), b * 4, 4), ref.station[k]));
          worst = std::max(worst, max_diff(rows_of(out.city[k].value(), b * 2, 2), ref.city[k]));
        }
      }
      CHECK(worst < 1e-12);
    }
  }
}

TEST_CASE("minimal unrolled example with two stations and one city") {
  Setup s;
  s.city_of = {0, 0};
  s.cities = 1;
  s.adj_s = {{0, 1}, {1, 0}};
  s.adj_c = {{0}};
  ModelConfig m = small_model(1);
  m.periods = {1};
  m.hidden = 2;
  const Forecaster model(m, multi_graph(s.adj_s, s.adj_c, s.city_of));
  ParamStore p;
  model.init_params(p, 9);
  std::mt19937_64 rng(2);
  const EpisodeBatch batch = random_batch(s, 1, 2, 1, 1, rng);
  Tape tape(GradMode::disabled);
  const auto out = model.forward(tape, p, batch);
  const auto ref = reference_rollout(s, p, m, batch, 0, false);
  CHECK(max_diff(to_mat(out.station[0].value()), ref.station[0]) < 1e-12);
  CHECK(max_diff(to_mat(out.city[0].value()), ref.city[0]) < 1e-12);
}

TEST_CASE("empty horizon") {
  std::mt19937_64 rng(3);
  const Setup s = small_setup();
  const Forecaster model(small_model(1), multi_graph(s.adj_s, s.adj_c, s.city_of));
  ParamStore p;
  model.init_params(p, 1);
  const EpisodeBatch batch = random_batch(s, 2, 4, 0, 1, rng);
  Tape tape;
  const auto out = model.forward(tape, p, batch);
  CHECK(out.station.empty());
  CHECK(out.city.empty());
  CHECK(model.loss(tape, out, batch).value()(0, 0) == 0.0);
}

TEST_CASE("zero weights predict the head bias") {
  std::mt19937_64 rng(4);
  const Setup s = small_setup();
  const Forecaster model(small_model(2), multi_graph(s.adj_s, s.adj_c, s.city_of));
  ParamStore p;
  model.init_params(p, 1);
  for (auto& e : p.entries()) e.value.fill(0.0);
  p.value("head.b_s").fill(0.3);
  p.value("head.b_c").fill(-0.2);
  const EpisodeBatch batch = random_batch(s, 2, 3, 3, 2, rng);
  Tape tape;
  const auto out = model.forward(tape, p, batch);
  for (const auto& y : out.station)
    for (double v : y.value().values()) CHECK(v == 0.3);
  for (const auto& y : out.city)
    for (double v : y.value().values()) CHECK(v == -0.2);
}

TEST_CASE("two-scale loss worked example") {
  Tape tape;
  const std::vector<Var> ps{tape.constant(Tensor::from_rows({{1.0}, {3.0}})),
                            tape.constant(Tensor::from_rows({{0.0}, {2.0}}))};
  const std::vector<Var> pc{tape.constant(Tensor::from_rows({{4.0}})),
                            tape.constant(Tensor::from_rows({{1.0}}))};
  const std::vector<Tensor> ts{Tensor(2, 1), Tensor(2, 1)};
  const std::vector<Tensor> tc{Tensor(1, 1), Tensor(1, 1)};
  // station: (1 + 9 + 0 + 4) / 4 = 3.5; city: (16 + 1) / 2 = 8.5
  CHECK(two_scale_mse(tape, ps, pc, ts, tc).value()(0, 0) == doctest::Approx(12.0).epsilon(1e-15));
  const std::vector<Var> none;
  const std::vector<Tensor> no_targets;
  CHECK(two_scale_mse(tape, ps, none, ts, no_targets).value()(0, 0) == doctest::Approx(3.5));
  CHECK(two_scale_mse(tape, none, none, no_targets, no_targets).value()(0, 0) == 0.0);
  CHECK_THROWS_AS(two_scale_mse(tape, ps, pc, ts, no_targets), ShapeError);
}

TEST_CASE("loss is invariant to relabelling stations") {
  std::mt19937_64 rng(6);
  const Setup s = small_setup();
  const ModelConfig m = small_model(1);
  const EpisodeBatch batch = random_batch(s, 2, 4, 3, 1, rng);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  Setup ps = s;
  for (std::size_t i = 0; i < 4; ++i) {
    ps.city_of[i] = s.city_of[perm[i]];
    for (std::size_t j = 0; j < 4; ++j) ps.adj_s[i][j] = s.adj_s[perm[i]][perm[j]];
  }
  auto permute = [&](const Tensor& t) {
    Tensor out(t.rows(), t.cols());
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t f = 0; f < t.cols(); ++f) out(b * 4 + i, f) = t(b * 4 + perm[i], f);
    return out;
  };
  EpisodeBatch pb = batch;
  for (auto* v : {&pb.air_s, &pb.met_s, &pb.target_s})
    for (auto& t : *v) t = permute(t);
  auto loss_of = [&](const Setup& setup, const EpisodeBatch& eb) {
    const Forecaster model(m, multi_graph(setup.adj_s, setup.adj_c, setup.city_of));
    ParamStore p;
    model.init_params(p, 3);
    Tape tape;
    return model.loss(tape, model.forward(tape, p, eb), eb).value()(0, 0);
  };
  CHECK(loss_of(s, batch) == doctest::Approx(loss_of(ps, pb)).epsilon(1e-12));
}

TEST_CASE("forecast inputs never read the targets") {
  std::mt19937_64 rng(7);
  const Setup s = small_setup();
  const Forecaster model(small_model(1), multi_graph(s.adj_s, s.adj_c, s.city_of));
  ParamStore p;
  model.init_params(p, 2);
  const EpisodeBatch batch = random_batch(s, 1, 4, 5, 1, rng);
  EpisodeBatch altered = batch;
  for (auto& t : altered.target_s) t.fill(100.0);
  for (auto& t : altered.target_c) t.fill(-100.0);
  Tape a(GradMode::disabled), b(GradMode::disabled);
  const auto oa = model.forward(a, p, batch);
  const auto ob = model.forward(b, p, altered);
  for (std::size_t k = 0; k < oa.station.size(); ++k) {
    CHECK(oa.station[k].value() == ob.station[k].value());
    CHECK(oa.city[k].value() == ob.city[k].value());
  }
}

TEST_CASE("batched episodes are independent") {
  std::mt19937_64 rng(8);
  const Setup s = small_setup();
  const Forecaster model(small_model(2), multi_graph(s.adj_s, s.adj_c, s.city_of));
  ParamStore p;
  model.init_params(p, 2);
  const EpisodeBatch batch = random_batch(s, 2, 3, 2, 2, rng);
  EpisodeBatch altered = batch;
  for (auto* v : {&altered.air_s, &altered.met_s})
    for (auto& t : *v)
      for (std::size_t i = 4; i < 8; ++i)
        for (std::size_t f = 0; f < t.cols(); ++f) t(i, f) += 1.0;
  altered.air_c.clear();
  altered.met_c.clear();
  for (const auto& a : altered.air_s) altered.air_c.push_back(city_means(a, s.city_of, 2));
  for (const auto& m : altered.met_s) altered.met_c.push_back(city_means(m, s.city_of, 2));
  Tape ta(GradMode::disabled), tb(GradMode::disabled);
  const auto oa = model.forward(ta, p, batch);
  const auto ob = model.forward(tb, p, altered);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(max_diff(rows_of(oa.station[k].value(), 0, 4), rows_of(ob.station[k].value(), 0, 4)) == 0.0);
    CHECK(max_diff(rows_of(oa.station[k].value(), 4, 4), rows_of(ob.station[k].value(), 4, 4)) > 0.0);
  }
}

TEST_CASE("every parameter receives gradient") {
  std::mt19937_64 rng(9);
  const Setup s = small_setup();
  const Forecaster model(small_model(2), multi_graph(s.adj_s, s.adj_c, s.city_of));
  ParamStore p;
  model.init_params(p, 4);
  const EpisodeBatch batch = random_batch(s, 2, 8, 3, 2, rng);
  Tape tape;
  tape.backward(model.loss(tape, model.forward(tape, p, batch), batch));
  for (const auto& e : p.entries()) {
    INFO(e.name);
    CHECK(frobenius_norm(e.grad) > 0.0);
  }
}

TEST_CASE("reverse-mode gradients agree with finite differences") {
  std::mt19937_64 rng(10);
  const Setup s = small_setup();
  for (const bool warmup : {false, true}) {
    ModelConfig m = small_model(2);
    m.loss_includes_warmup = warmup;
    const Forecaster model(m, multi_graph(s.adj_s, s.adj_c, s.city_of));
    ParamStore p;
    model.init_params(p, 12);
    const EpisodeBatch batch = random_batch(s, 1, 4, 2, 2, rng);
    const auto report = check_gradients(
        p, [&](Tape& tape, ParamStore& store) {
          return model.loss(tape, model.forward(tape, store, batch), batch);
        },
        1e-5);
    CHECK(report.worst_relative_error() < 1e-6);
  }
}

TEST_CASE("ablated configurations") {
  std::mt19937_64 rng(11);
  const Setup s = small_setup();
  const EpisodeBatch batch = random_batch(s, 1, 4, 2, 1, rng);
  SUBCASE("station-only model") {
    ModelConfig m = small_model(1);
    m.use_city_scale = false;
    const Forecaster model(m, multi_graph(s.adj_s, s.adj_c, s.city_of));
    ParamStore p;
    model.init_params(p, 1);
    CHECK_FALSE(p.contains("mt_gru_c.W_xr"));
    CHECK_FALSE(p.contains("head.W_c"));
    Tape tape;
    const auto out = model.forward(tape, p, batch);
    CHECK(out.city.empty());
    CHECK(out.station.size() == 2);
    CHECK(std::isfinite(model.loss(tape, out, batch).value()(0, 0)));
  }
  SUBCASE("scale weights recorded per step") {
    const Forecaster model(small_model(1), multi_graph(s.adj_s, s.adj_c, s.city_of));
    ParamStore p;
    model.init_params(p, 1);
    Tape tape;
    const auto out = model.forward(tape, p, batch, true);
    CHECK(out.station_scale_weights.size() == 6);
    CHECK(out.station_scale_weights[0].cols() == 3);
  }
  SUBCASE("mismatched meteorology width") {
    const Forecaster model(small_model(2), multi_graph(s.adj_s, s.adj_c, s.city_of));
    ParamStore p;
    model.init_params(p, 1);
    Tape tape;
    CHECK_THROWS_AS(model.forward(tape, p, batch), ShapeError);
  }
}
