#include "tiva/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tiva {

namespace {

// First time after which BIS stays inside [lo, hi] until the end of the run.
std::optional<double> settling_time_min(const RunTrace& trace, double lo, double hi) {
  const auto& rows = trace.rows;
  std::size_t first_settled = rows.size();
  for (std::size_t i = rows.size(); i-- > 0;) {
    if (rows[i].bis_true < lo || rows[i].bis_true > hi) {
      break;
    }
    first_settled = i;
  }
  if (first_settled == rows.size()) {
    return std::nullopt;
  }
  return rows[first_settled].t_s / 60.0;
}

MetricStats stats_over(const std::vector<double>& values, bool extreme_is_min,
                       int absent, double cap) {
  MetricStats s;
  s.defined = static_cast<int>(values.size());
  s.absent = absent;
  if (values.empty()) {
    s.extreme = absent > 0 ? cap : 0.0;
    return s;
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  s.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) {
    var += (v - s.mean) * (v - s.mean);
  }
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  if (extreme_is_min) {
    s.extreme = *std::min_element(values.begin(), values.end());
  } else {
    s.extreme = *std::max_element(values.begin(), values.end());
    // non-settling runs are reported at the experiment bound
    if (absent > 0) {
      s.extreme = cap;
    }
  }
  return s;
}

}  // namespace

MetricsRecord compute_metrics(const RunTrace& trace, TargetBand band,
                              double bis_target) {
  if (trace.rows.empty()) {
    throw std::invalid_argument("cannot compute metrics on an empty trace");
  }

  MetricsRecord m;
  double nadir = trace.rows.front().bis_true;
  for (const TraceRow& row : trace.rows) {
    nadir = std::min(nadir, row.bis_true);
    if (!m.tt_min && row.bis_true >= band.lo && row.bis_true <= band.hi) {
      m.tt_min = row.t_s / 60.0;
    }
  }
  m.bis_nadir = nadir;
  m.us = std::max(0.0, band.lo - nadir);
  m.st10_min = settling_time_min(trace, bis_target * 0.9, bis_target * 1.1);
  m.st20_min = settling_time_min(trace, bis_target * 0.8, bis_target * 1.2);
  return m;
}

CohortSummary summarize_metrics(const std::string& controller,
                                const std::vector<MetricsRecord>& records,
                                double duration_min, int failed_runs) {
  CohortSummary summary;
  summary.controller = controller;
  summary.runs = static_cast<int>(records.size());
  summary.failed_runs = failed_runs;

  std::vector<double> tt, nadir, st10, st20, us;
  int tt_absent = 0;
  int st10_absent = 0;
  int st20_absent = 0;
  for (const MetricsRecord& r : records) {
    if (r.tt_min) {
      tt.push_back(*r.tt_min);
    } else {
      ++tt_absent;
    }
    if (r.st10_min) {
      st10.push_back(*r.st10_min);
    } else {
      ++st10_absent;
    }
    if (r.st20_min) {
      st20.push_back(*r.st20_min);
    } else {
      ++st20_absent;
    }
    nadir.push_back(r.bis_nadir);
    us.push_back(r.us);
  }

  summary.tt = stats_over(tt, false, tt_absent, duration_min);
  summary.st10 = stats_over(st10, false, st10_absent, duration_min);
  summary.st20 = stats_over(st20, false, st20_absent, duration_min);
  summary.nadir = stats_over(nadir, true, 0, duration_min);
  summary.us = stats_over(us, false, 0, duration_min);
  return summary;
}

}  // namespace tiva
