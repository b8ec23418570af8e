// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "m2g2/data_pipeline.hpp"
#include "m2g2/experiments.hpp"
#include "m2g2/forecaster.hpp"
#include "m2g2/grad_check.hpp"
#include "m2g2/metrics.hpp"
#include "m2g2/mt_gru.hpp"
#include "oracles.hpp"

using namespace m2g2;
using testing_support::max_diff;
using testing_support::multi_graph;
using testing_support::random_adjacency;
using testing_support::to_mat;
using testing_support::to_tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> random_row(std::size_t n, std::mt19937_64& rng) {
  return oracle::random_mat(1, n, rng, 0.5)[0];
}

// Episode batch with city tensors computed as per-city means.
EpisodeBatch random_batch(const std::vector<std::size_t>& city_of, std::size_t cities,
                          std::size_t T, std::size_t tau, std::size_t M, std::mt19937_64& rng) {
  const std::size_t S = city_of.size();
  std::vector<double> members(cities, 0.0);
  for (auto c : city_of) members[c] += 1.0;
  auto to_city = [&](const Tensor& s) {
    Tensor c(cities, s.cols());
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t f = 0; f < s.cols(); ++f) c(city_of[i], f) += s(i, f) / members[city_of[i]];
    return c;
  };
  EpisodeBatch e;
  e.batch = 1;
  e.stations = S;
  e.cities = cities;
  e.history = T;
  e.horizon = tau;
  e.met = M;
  for (std::size_t t = 0; t < T; ++t) e.air_s.push_back(to_tensor(oracle::random_mat(S, 1, rng)));
  for (std::size_t t = 0; t < T + tau; ++t) e.met_s.push_back(to_tensor(oracle::random_mat(S, M, rng)));
  for (std::size_t t = 0; t < tau; ++t) e.target_s.push_back(to_tensor(oracle::random_mat(S, 1, rng)));
  for (const auto& x : e.air_s) e.air_c.push_back(to_city(x));
  for (const auto& x : e.met_s) e.met_c.push_back(to_city(x));
  for (const auto& x : e.target_s) e.target_c.push_back(to_city(x));
  return e;
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  const std::vector<std::size_t> city_of{0, 0, 1, 1};
  const oracle::Mat adj_s{{0, 1, 1, 0}, {1, 0, 0, 1}, {1, 0, 0, 1}, {0, 1, 1, 0}};
  const oracle::Mat adj_c{{0, 1}, {1, 0}};
  ModelConfig m;
  m.met_channels = 2;
  m.gcn_width = 4;
  m.fuse_width = 4;
  m.hidden = 6;
  m.periods = {1, 2, 4};
  const Forecaster model(m, multi_graph(adj_s, adj_c, city_of));
  ParamStore params;
  model.init_params(params, 7);
  // Non-zero biases so every bias gradient path is exercised away from zero.
  for (auto& e : params.entries())
    if (e.value.rows() == 1)
      for (double& v : e.value.values()) v = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  const EpisodeBatch batch = random_batch(city_of, 2, 4, 2, 2, rng);
  const auto report = check_gradients(
      params,
      [&](Tape& tape, ParamStore& store) {
        return model.loss(tape, model.forward(tape, store, batch), batch);
      },
      1e-4);
  const double worst = report.worst_relative_error();
  const double secs = seconds_since(start);
  return {worst < 1e-3 && secs < 60.0 && report.entries.size() == params.size(),
          fmt("%zu parameters, worst relative error %.3g (< 1e-3), %.2f s (< 60 s)",
              report.entries.size(), worst, secs)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(202);
  // Classic GRU through the multi-period cell with one part and no scale weights.
  const std::size_t in = 4, hidden = 5, n = 3;
  oracle::Gru g{oracle::random_mat(in, hidden, rng),     oracle::random_mat(in, hidden, rng),
                oracle::random_mat(in, hidden, rng),     oracle::random_mat(hidden, hidden, rng, 0.5),
                oracle::random_mat(hidden, hidden, rng, 0.5), oracle::random_mat(hidden, hidden, rng, 0.5),
                random_row(hidden, rng),                 random_row(hidden, rng),
                random_row(hidden, rng)};
  ParamStore store;
  auto row = [](const std::vector<double>& v) { return to_tensor(oracle::Mat{v}); };
  store.add("g.W_xr", to_tensor(g.w_xr));
  store.add("g.W_xz", to_tensor(g.w_xz));
  store.add("g.W_xh", to_tensor(g.w_xh));
  store.add("g.W_hr", to_tensor(g.w_hr));
  store.add("g.W_hz", to_tensor(g.w_hz));
  store.add("g.W_hh", to_tensor(g.w_hh));
  store.add("g.b_r", row(g.b_r));
  store.add("g.b_z", row(g.b_z));
  store.add("g.b_h", row(g.b_h));
  MtGruConfig cfg;
  cfg.input_width = in;
  cfg.hidden = hidden;
  cfg.periods = {1};
  cfg.bypass_scale_weights = true;
  oracle::Mat h_lib = oracle::zeros(n, hidden), h_ref = h_lib;
  double gru_err = 0.0;
  for (std::int64_t t = 1; t <= 100; ++t) {
    const oracle::Mat x = oracle::random_mat(n, in, rng, 2.0);
    Tape tape(GradMode::disabled);
    const auto w = MtGruWeights::bind(tape, store, "g", cfg);
    h_lib = to_mat(mt_gru_step(tape.constant(to_tensor(x)), tape.constant(to_tensor(h_lib)), t,
                               cfg, w).hidden.value());
    h_ref = oracle::gru_step(x, h_ref, g);
    gru_err = std::max(gru_err, max_diff(h_lib, h_ref));
  }

  double gcn_err = 0.0;
  std::uniform_int_distribution<std::size_t> cities_d(1, 4), extra_d(0, 5), width_d(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t C = cities_d(rng), S = C + extra_d(rng);
    std::vector<std::size_t> city_of(S);
    for (std::size_t i = 0; i < S; ++i) city_of[i] = i < C ? i : rng() % C;
    std::shuffle(city_of.begin(), city_of.end(), rng);
    oracle::Mat gamma = oracle::zeros(S, C);
    for (std::size_t i = 0; i < S; ++i) gamma[i][city_of[i]] = 1.0;
    const auto adj_s = random_adjacency(S, rng), adj_c = random_adjacency(C, rng);
    const std::size_t F = width_d(rng), G = width_d(rng), H = width_d(rng);
    const auto xs = oracle::random_mat(S, F, rng, 2.0), xc = oracle::random_mat(C, F, rng, 2.0);
    const auto wsg = oracle::random_mat(F, G, rng), wcg = oracle::random_mat(F, G, rng);
    const auto wsf = oracle::random_mat(G, H, rng), wcf = oracle::random_mat(G, H, rng);
    const auto graph = multi_graph(adj_s, adj_c, city_of);
    Tape tape(GradMode::disabled);
    MsGcnWeights w;
    w.station_gcn = {tape.constant(to_tensor(wsg))};
    w.city_gcn = {tape.constant(to_tensor(wcg))};
    w.station_fuse = tape.constant(to_tensor(wsf));
    w.city_fuse = tape.constant(to_tensor(wcf));
    const auto got = ms_gcn_step(tape.constant(to_tensor(xs)), tape.constant(to_tensor(xc)), graph,
                                 w, MsGcnConfig{});
    const auto ref = oracle::ms_gcn(xs, xc, adj_s, adj_c, gamma, wsg, wcg, wsf, wcf);
    gcn_err = std::max({gcn_err, max_diff(to_mat(got.station.value()), ref.station),
                        max_diff(to_mat(got.city.value()), ref.city)});
  }
  return {gru_err < 1e-12 && gcn_err < 1e-10,
          fmt("GRU max abs error %.3g over 100 steps (< 1e-12), two-scale step %.3g over 50 "
              "instances (< 1e-10)",
              gru_err, gcn_err)};
}

Outcome schedule_exactness() {
  std::mt19937_64 rng(303);
  const std::size_t in = 3, hidden = 6, n = 4;
  MtGruConfig cfg;
  cfg.input_width = in;
  cfg.hidden = hidden;
  cfg.periods = {1, 2, 4};
  ParamStore store;
  register_mt_gru_params(store, "g", cfg, 5);
  oracle::Mat h = oracle::random_mat(n, hidden, rng);
  std::size_t violations = 0, updates = 0;
  for (std::int64_t t = 1; t <= 1000; ++t) {
    Tape tape(GradMode::disabled);
    const auto w = MtGruWeights::bind(tape, store, "g", cfg);
    const auto step = mt_gru_step(tape.constant(to_tensor(oracle::random_mat(n, in, rng))),
                                  tape.constant(to_tensor(h)), t, cfg, w);
    const Tensor& next = step.hidden.value();
    const Tensor& carried = step.weighted_prev.value();
    for (std::size_t v = 0; v < 3; ++v) {
      bool deviates = false;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 2 * v; c < 2 * v + 2; ++c) deviates = deviates || next(i, c) != carried(i, c);
      const bool due = t % static_cast<std::int64_t>(cfg.periods[v]) == 0;
      if (deviates != due) ++violations;
      if (deviates) ++updates;
    }
    h = to_mat(next);
  }
  return {violations == 0 && updates == 1000 + 500 + 250,
          fmt("%zu schedule violations, %zu part updates (expected 1750)", violations, updates)};
}

Outcome graph_construction() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<std::size_t> size_d(1, 8);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  double worst_excess = 0.0, worst_asym = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = size_d(rng);
    const auto adj = random_adjacency(n, rng, density(rng));
    const oracle::Mat p = to_mat(normalize_propagation(to_tensor(adj)));
    worst_asym = std::max(worst_asym, max_diff(p, oracle::transpose(p)));
    for (double ev : oracle::jacobi_eigenvalues(p)) worst_excess = std::max(worst_excess, std::abs(ev) - 1.0);
  }
  const bool exact = normalize_propagation(Tensor::from_rows({{0, 1}, {1, 0}})) ==
                     Tensor::from_rows({{0.5, 0.5}, {0.5, 0.5}});
  return {worst_excess <= 1e-9 && worst_asym == 0.0 && exact,
          fmt("max |lambda| - 1 = %.3g over 200 graphs (tol 1e-9), max asymmetry %.3g, "
              "two-node example %s",
              worst_excess, worst_asym, exact ? "exact" : "inexact")};
}

// 8 stations, 2 cities, the three-regime shape repeated so that every split
// sees every regime.
ExperimentConfig synthetic_config() {
  ExperimentConfig c;
  c.synth.stations = 8;
  c.synth.cities = 2;
  c.synth.segments.clear();
  for (int r = 0; r < 3; ++r) c.synth.segments.insert(c.synth.segments.end(), {{16, 1.0, 100}, {48, 1.0, 160}, {6, 1.0, 90}});
  c.synth.met_channels = 1;
  c.history = 24;
  c.horizon = 8;
  c.metric_segments = 2;
  c.model.gcn_width = 8;
  c.model.fuse_width = 8;
  c.model.hidden = 24;
  c.model.periods = {1, 2, 4};
  c.train.batch_size = 16;
  c.train.epochs = 40;
  c.train.patience = 10;
  c.train.adam.lr = 3e-3;
  c.train.adam.clip_norm = 1.0;
  c.train.seeds = {1, 2, 3, 4, 5};
  return c;
}

struct TrainedSynthetic {
  ExperimentConfig config;
  PreparedData data;
  RunResult run;
};

Outcome synthetic_learning(TrainedSynthetic& out) {
  const auto start = Clock::now();
  out.config = synthetic_config();
  out.data = prepare_synthetic(out.config);
  out.run = run_seed(out.config, out.data, 1);
  const auto& log = out.run.training.log;
  const double first = log.front().val_loss, best = out.run.training.best_val_loss;
  const double reduction = 1.0 - best / first;
  const double secs = seconds_since(start);
  return {reduction >= 0.5 && log.size() <= 50 && secs < 600.0,
          fmt("validation MSE %.4f (epoch 1) -> %.4f (epoch %zu of %zu), reduction %.1f%% "
              "(>= 50%%), %.1f s (< 600 s)",
              first, best, out.run.training.best_epoch, log.size(), 100.0 * reduction, secs)};
}

Outcome weight_agreement(TrainedSynthetic& trained) {
  const Forecaster model = make_forecaster(trained.config, trained.data);
  ParamStore params = trained.run.training.best;
  const auto diag = weight_diagnostic(model, params, trained.data, trained.config.history);
  const double baseline = random_agreement_baseline(model, trained.data, trained.config.history,
                                                    trained.config.diagnostic_trials, 1000);
  return {diag.agreement > 0.6,
          fmt("agreement %.3f over %zu steps (> 0.6), untrained Monte-Carlo baseline %.3f",
              diag.agreement, diag.steps.size(), baseline)};
}

Outcome ablation_direction(std::vector<MetricReport>& reports) {
  const auto start = Clock::now();
  ExperimentConfig c = synthetic_config();
  const auto data = prepare_synthetic(c);
  const auto gru = ablate(c, data, Variant::plain_gru);
  ExperimentConfig cc = c;
  cc.synth.city_signal = 1.0;
  const auto city_data = prepare_synthetic(cc);
  const auto city = ablate(cc, city_data, Variant::no_city_scale);
  reports.insert(reports.end(), {gru.full, gru.variant, city.full, city.variant});
  const double a = gru.full.overall_mae(), b = gru.variant.overall_mae();
  const double d = city.full.overall_mae(), e = city.variant.overall_mae();
  return {a <= b && d <= e,
          fmt("seeds 1-5 mean MAE: full %.4f vs plain_gru %.4f; with city signal full %.4f vs "
              "no_city_scale %.4f; %.0f s",
              a, b, d, e, seconds_since(start))};
}

Outcome metrics_conformance(const std::vector<MetricReport>& reports) {
  ForecastTable t;
  t.episodes = 1;
  t.horizon = 4;
  t.stations = 1;
  t.actual = {0.0, 0.0, 0.0, 0.0};
  t.predicted = {1.0, -1.0, 2.0, -2.0};
  const auto m = segment_metrics(t, horizon_segments(4, 1));
  const bool example = std::abs(m[0].mae - 1.5) < 1e-15 && std::abs(m[0].rmse - std::sqrt(2.5)) < 1e-15;
  std::size_t checked = 0;
  bool invariants = true;
  for (const auto& r : reports) {
    try {
      r.check_invariants();
    } catch (const std::exception&) {
      invariants = false;
    }
    for (const auto& seed : r.per_seed)
      for (const auto& s : seed) {
        invariants = invariants && s.rmse >= s.mae;
        ++checked;
      }
  }
  return {example && invariants && checked > 0,
          fmt("MAE %.17g, RMSE %.17g (sqrt 2.5 = %.17g); RMSE >= MAE on %zu report cells", m[0].mae,
              m[0].rmse, std::sqrt(2.5), checked)};
}

Outcome determinism() {
  ExperimentConfig c;
  c.synth.stations = 6;
  c.synth.cities = 2;
  c.synth.segments = {{8, 1.0, 120}, {4, 1.0, 120}};
  c.synth.met_channels = 2;
  c.history = 12;
  c.horizon = 6;
  c.metric_segments = 3;
  c.model.gcn_width = 6;
  c.model.fuse_width = 6;
  c.model.hidden = 12;
  c.train.batch_size = 16;
  c.train.epochs = 5;
  c.train.adam.lr = 3e-3;
  c.train.seeds = {4};
  auto run = [&] {
    const auto data = prepare_synthetic(c);
    return seed_sweep(c, data);
  };
  const auto a = run();
  const auto b = run();
  const bool same_report = a.report == b.report;
  const bool same_log = a.runs[0].training.log == b.runs[0].training.log;
  bool same_params = a.runs[0].training.best.size() == b.runs[0].training.best.size();
  for (std::size_t i = 0; same_params && i < a.runs[0].training.best.size(); ++i)
    same_params = a.runs[0].training.best.entries()[i].value == b.runs[0].training.best.entries()[i].value;
  return {same_report && same_log && same_params,
          fmt("metric reports %s, training logs %s, parameters %s",
              same_report ? "identical" : "differ", same_log ? "identical" : "differ",
              same_params ? "identical" : "differ")};
}

Outcome pipeline_guards() {
  std::mt19937_64 rng(505);
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) ids.push_back("S" + std::to_string(i));
  std::vector<UnixSeconds> stamps(200);
  for (std::size_t t = 0; t < stamps.size(); ++t) stamps[t] = 1577836800 + static_cast<UnixSeconds>(t) * 3600;
  FeatureSeries s(ids, {"PM2.5", "temp", "wind"}, stamps);
  std::normal_distribution<double> z(40.0, 15.0);
  for (std::size_t t = 0; t < s.steps(); ++t)
    for (std::size_t n = 0; n < s.nodes(); ++n)
      for (std::size_t c = 0; c < s.channels(); ++c) s.set(t, n, c, z(rng));

  const SplitSpec split = split_by_fraction(s.steps(), 0.6, 0.2);
  const NormStats stats = fit_zscore(s, split);
  const auto back = invert_zscore(apply_zscore(s, stats), stats);
  double round_trip = 0.0;
  for (std::size_t t = 0; t < s.steps(); ++t)
    for (std::size_t n = 0; n < s.nodes(); ++n)
      for (std::size_t c = 0; c < s.channels(); ++c)
        round_trip = std::max(round_trip, std::abs(back.value(t, n, c) - s.value(t, n, c)));

  std::size_t altered = 0, masked = 0;
  Tensor dist(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) dist(i, j) = 25.0 * std::abs(double(i) - double(j));
  for (int trial = 0; trial < 20; ++trial) {
    FeatureSeries holes = s;
    std::bernoulli_distribution drop(0.1);
    for (std::size_t t = 0; t < s.steps(); ++t)
      for (std::size_t n = 0; n < s.nodes(); ++n)
        for (std::size_t c = 0; c < s.channels(); ++c)
          if (drop(rng)) {
            holes.mark_missing(t, n, c);
            ++masked;
          }
    KnnConfig cfg;
    cfg.max_missing_rate = 0.2;
    const auto filled = knn_impute(holes, dist, cfg).series;
    for (std::size_t t = 0; t < s.steps(); ++t)
      for (std::size_t n = 0; n < s.nodes(); ++n)
        for (std::size_t c = 0; c < s.channels(); ++c)
          if (holes.observed(t, n, c) && filled.value(t, n, c) != holes.value(t, n, c)) ++altered;
  }

  std::size_t window_errors = 0, windows = 0;
  for (std::size_t total = 5; total <= 60; ++total)
    for (std::size_t T = 1; T <= 6; ++T)
      for (std::size_t tau = 0; tau <= 4; ++tau)
        for (std::size_t stride = 1; stride <= 3; ++stride) {
          const SplitSpec sp = split_by_fraction(total, 0.6, 0.2);
          const std::size_t lo[3] = {0, sp.train_end, sp.val_end};
          const std::size_t hi[3] = {sp.train_end, sp.val_end, sp.total};
          const SplitPart parts[3] = {SplitPart::train, SplitPart::validation, SplitPart::test};
          for (int k = 0; k < 3; ++k) {
            std::vector<std::size_t> expected;
            for (std::size_t start = 0; start < total; ++start) {
              if (start < lo[k] || start + T + tau > hi[k]) continue;
              if ((start - lo[k]) % stride == 0) expected.push_back(start);
            }
            const auto got = window_split(sp, parts[k], T, tau, stride);
            if (got != expected) ++window_errors;
            windows += got.size();
          }
        }
  return {round_trip <= 1e-12 && altered == 0 && window_errors == 0,
          fmt("z-score round trip %.3g (<= 1e-12); %zu observed cells altered over %zu masked; "
              "%zu window mismatches over %zu windows",
              round_trip, altered, masked, window_errors, windows)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };
  TrainedSynthetic trained;
  std::vector<MetricReport> reports;
  report(1, "gradient correctness", gradient_correctness);
  report(2, "oracle equivalence", oracle_equivalence);
  report(3, "schedule exactness", schedule_exactness);
  report(4, "graph construction", graph_construction);
  report(5, "synthetic learning", [&] { return synthetic_learning(trained); });
  report(6, "dynamic-weight diagnostic", [&] {
    if (trained.run.training.log.empty()) return Outcome{false, "no trained model"};
    return weight_agreement(trained);
  });
  report(7, "ablation direction", [&] { return ablation_direction(reports); });
  report(8, "metrics conformance", [&] { return metrics_conformance(reports); });
  report(9, "determinism", determinism);
  report(10, "pipeline guards", pipeline_guards);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
