#pragma once

#include "tiva/pkpd.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tiva {

struct TraceRow {
  double t_s = 0.0;
  Vec8 state = Vec8::Zero();  // true patient state
  double bis_true = 0.0;
  double bis_measured = 0.0;
  double y_ref = 0.0;
  double u_p_mg_s = 0.0;
  double u_r_ug_s = 0.0;
  int model_index = 0;         // -1 when no model bank runs (PID)
  double solve_ms = 0.0;       // 0 between controller ticks
  int solve_iterations = 0;    // solver stats of the tick that set this input
  double solve_grad_norm = 0.0;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  int patient_id = 0;
  int solver_failures = 0;  // MPC iterations that hit the cap unconverged
};

// Induction-phase metrics of one run. Events that never occur stay empty
// rather than collapsing to 0.
struct MetricsRecord {
  std::optional<double> tt_min;    // first entry into the target band
  double bis_nadir = 0.0;          // minimum BIS over the run
  std::optional<double> st10_min;  // settles into target +-10% for good
  std::optional<double> st20_min;  // settles into target +-20% for good
  double us = 0.0;                 // undershoot below BIS 45
};

struct TargetBand {
  double lo = 45.0;
  double hi = 55.0;
};

MetricsRecord compute_metrics(const RunTrace& trace, TargetBand band = {},
                              double bis_target = 50.0);

// One column block of the cohort table: mean/std over runs where the event
// occurred; the extreme column falls back to the run duration when some runs
// never produced the event.
struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
  double extreme = 0.0;  // max, or min for the nadir
  int defined = 0;
  int absent = 0;
};

struct CohortSummary {
  std::string controller;
  int runs = 0;
  int failed_runs = 0;
  MetricStats tt;
  MetricStats nadir;
  MetricStats st10;
  MetricStats st20;
  MetricStats us;
};

CohortSummary summarize_metrics(const std::string& controller,
                                const std::vector<MetricsRecord>& records,
                                double duration_min, int failed_runs = 0);

}  // namespace tiva
