// SPDX-License-Identifier: Apache-2.0
#include "m2g2/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "m2g2/csv.hpp"
#include "m2g2/errors.hpp"

namespace m2g2 {

std::vector<HorizonSegment> horizon_segments(std::size_t horizon, std::size_t count) {
  if (count == 0 || count > horizon) {
    throw InvalidParameter("segment count must be in [1, horizon]");
  }
  std::vector<HorizonSegment> out;
  const std::size_t base = horizon / count;
  const std::size_t extra = horizon % count;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    out.push_back({begin, begin + len});
    begin += len;
  }
  return out;
}

void ForecastTable::validate() const {
  const std::size_t n = episodes * horizon * stations;
  if (predicted.size() != n || actual.size() != n) {
    throw ShapeError("forecast table expects " + std::to_string(n) + " values, got " +
                     std::to_string(predicted.size()) + " predicted and " +
                     std::to_string(actual.size()) + " actual");
  }
}

std::vector<SegmentMetrics> segment_metrics(const ForecastTable& table,
                                            const std::vector<HorizonSegment>& segments) {
  table.validate();
  std::vector<SegmentMetrics> out;
  for (const auto& seg : segments) {
    if (seg.begin >= seg.end || seg.end > table.horizon) {
      throw ShapeError("segment [" + std::to_string(seg.begin) + ", " + std::to_string(seg.end) +
                       ") outside horizon " + std::to_string(table.horizon));
    }
    double abs_sum = 0.0, sq_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t e = 0; e < table.episodes; ++e)
      for (std::size_t k = seg.begin; k < seg.end; ++k)
        for (std::size_t s = 0; s < table.stations; ++s) {
          const double d = table.predicted[table.index(e, k, s)] - table.actual[table.index(e, k, s)];
          abs_sum += std::abs(d);
          sq_sum += d * d;
          ++count;
        }
    if (count == 0) throw ShapeError("no forecasts to score");
    const double n = static_cast<double>(count);
    out.push_back({abs_sum / n, std::sqrt(sq_sum / n)});
  }
  return out;
}

void MetricReport::add_run(std::uint64_t seed, std::vector<SegmentMetrics> metrics) {
  if (metrics.size() != segments.size()) {
    throw ShapeError("run has " + std::to_string(metrics.size()) + " segments, report has " +
                     std::to_string(segments.size()));
  }
  seeds.push_back(seed);
  per_seed.push_back(std::move(metrics));
}

std::vector<SegmentMetrics> MetricReport::mean() const {
  std::vector<SegmentMetrics> out(segments.size());
  if (per_seed.empty()) return out;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    for (const auto& run : per_seed) {
      out[j].mae += run[j].mae;
      out[j].rmse += run[j].rmse;
    }
    out[j].mae /= static_cast<double>(per_seed.size());
    out[j].rmse /= static_cast<double>(per_seed.size());
  }
  return out;
}

std::vector<SegmentMetrics> MetricReport::stddev() const {
  std::vector<SegmentMetrics> out(segments.size());
  if (per_seed.size() < 2) return out;
  const auto m = mean();
  for (std::size_t j = 0; j < segments.size(); ++j) {
    for (const auto& run : per_seed) {
      out[j].mae += (run[j].mae - m[j].mae) * (run[j].mae - m[j].mae);
      out[j].rmse += (run[j].rmse - m[j].rmse) * (run[j].rmse - m[j].rmse);
    }
    const double dof = static_cast<double>(per_seed.size() - 1);
    out[j].mae = std::sqrt(out[j].mae / dof);
    out[j].rmse = std::sqrt(out[j].rmse / dof);
  }
  return out;
}

double MetricReport::overall_mae() const {
  const auto m = mean();
  double s = 0.0;
  for (const auto& x : m) s += x.mae;
  return m.empty() ? 0.0 : s / static_cast<double>(m.size());
}

double MetricReport::overall_rmse() const {
  const auto m = mean();
  double s = 0.0;
  for (const auto& x : m) s += x.rmse;
  return m.empty() ? 0.0 : s / static_cast<double>(m.size());
}

void MetricReport::check_invariants() const {
  for (std::size_t i = 0; i < per_seed.size(); ++i) {
    for (std::size_t j = 0; j < per_seed[i].size(); ++j) {
      const auto& m = per_seed[i][j];
      if (!(m.mae >= 0.0) || !(m.rmse >= 0.0)) {
        throw ContractError("negative or NaN metric for seed " + std::to_string(seeds[i]));
      }
      // Power-mean inequality, with room for the last ulp of rounding.
      if (m.rmse < m.mae * (1.0 - 1e-15)) {
        throw ContractError("RMSE below MAE for seed " + std::to_string(seeds[i]) +
                            ", segment " + std::to_string(j));
      }
    }
  }
}

std::string report_csv(const MetricReport& report, const std::string& label, bool include_header) {
  std::string out;
  if (include_header) out += "label,seed,segment,first_step,last_step,mae,rmse\n";
  auto row = [&](const std::string& seed, const std::vector<SegmentMetrics>& ms) {
    for (std::size_t j = 0; j < ms.size(); ++j) {
      out += label + ',' + seed + ',' + std::to_string(j + 1) + ',' +
             std::to_string(report.segments[j].begin + 1) + ',' +
             std::to_string(report.segments[j].end) + ',' + csv::format(ms[j].mae) + ',' +
             csv::format(ms[j].rmse) + '\n';
    }
  };
  for (std::size_t i = 0; i < report.per_seed.size(); ++i) {
    row(std::to_string(report.seeds[i]), report.per_seed[i]);
  }
  row("mean", report.mean());
  row("std", report.stddev());
  return out;
}

std::string report_text(const MetricReport& report, const std::string& title) {
  std::string out = title + " (" + std::to_string(report.seeds.size()) + " seeds)\n";
  const auto m = report.mean();
  const auto s = report.stddev();
  char buf[160];
  for (std::size_t j = 0; j < m.size(); ++j) {
    std::snprintf(buf, sizeof buf, "  steps %2zu-%-2zu  MAE %.4f +- %.4f  RMSE %.4f +- %.4f\n",
                  report.segments[j].begin + 1, report.segments[j].end, m[j].mae, s[j].mae,
                  m[j].rmse, s[j].rmse);
    out += buf;
  }
  return out;
}

}  // namespace m2g2
