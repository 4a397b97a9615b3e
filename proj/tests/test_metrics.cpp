#include <doctest.h>

#include "tiva/metrics.hpp"

#include <cmath>

using namespace tiva;

namespace {

// 1 Hz synthetic trace from a list of BIS values starting at t = 0
RunTrace trace_of(std::initializer_list<double> bis) {
  RunTrace trace;
  double t = 0.0;
  for (double b : bis) {
    TraceRow row;
    row.t_s = t;
    row.bis_true = b;
    row.bis_measured = b;
    trace.rows.push_back(row);
    t += 1.0;
  }
  return trace;
}

RunTrace ramp_then_hold(double start, double hold, int cross_at_s, int total_s) {
  RunTrace trace;
  for (int t = 0; t < total_s; ++t) {
    TraceRow row;
    row.t_s = t;
    row.bis_true = t < cross_at_s
                       ? start + (hold - start) * t / cross_at_s
                       : hold;
    trace.rows.push_back(row);
  }
  return trace;
}

}  // namespace

TEST_CASE("time to target from a hand-built crossing") {
  // sits above the band, enters [45,55] exactly at t = 90 s and stays
  RunTrace step;
  for (int t = 0; t < 300; ++t) {
    TraceRow row;
    row.t_s = t;
    row.bis_true = t < 90 ? 62.0 : 50.0;
    step.rows.push_back(row);
  }
  const MetricsRecord hand = compute_metrics(step);
  REQUIRE(hand.tt_min.has_value());
  CHECK(*hand.tt_min == doctest::Approx(1.5).epsilon(1e-12));

  // descending ramp: crossing time follows from the line equation
  RunTrace trace = ramp_then_hold(97.4, 50.0, 95, 300);
  // first sample at or below 55: 97.4 + (50-97.4)*t/95 <= 55  =>  t >= 85
  const MetricsRecord m = compute_metrics(trace);
  REQUIRE(m.tt_min.has_value());
  CHECK(*m.tt_min == doctest::Approx(85.0 / 60.0).epsilon(1e-12));
  REQUIRE(m.st10_min.has_value());
  CHECK(*m.st10_min == *m.tt_min);  // monotone descent: entry == settling
  CHECK(m.us == 0.0);
}

TEST_CASE("undershoot and nadir from the definition") {
  RunTrace trace = trace_of({97.4, 80.0, 60.0, 48.0, 40.0, 44.0, 50.0, 50.0});
  const MetricsRecord m = compute_metrics(trace);
  CHECK(m.bis_nadir == 40.0);
  CHECK(m.us == 5.0);
  REQUIRE(m.tt_min.has_value());
  CHECK(*m.tt_min == doctest::Approx(3.0 / 60.0));
}

TEST_CASE("no undershoot when the trace never dips below 45") {
  RunTrace trace = trace_of({97.4, 70.0, 55.0, 50.0, 49.0, 50.0});
  const MetricsRecord m = compute_metrics(trace);
  CHECK(m.us == 0.0);
  CHECK(m.bis_nadir == 49.0);
}

TEST_CASE("wider settling band settles no later than the narrow one") {
  // enters [40,60] at t=2, [45,55] at t=4, stays put
  RunTrace trace = trace_of({97.4, 70.0, 58.0, 56.0, 54.0, 52.0, 50.0, 50.0});
  const MetricsRecord m = compute_metrics(trace);
  REQUIRE(m.st10_min.has_value());
  REQUIRE(m.st20_min.has_value());
  CHECK(*m.st20_min == doctest::Approx(2.0 / 60.0));
  CHECK(*m.st10_min == doctest::Approx(4.0 / 60.0));
  CHECK(*m.st20_min <= *m.st10_min);
  CHECK(*m.tt_min <= *m.st10_min);
}

TEST_CASE("late excursions void the settling time") {
  RunTrace trace = trace_of({97.4, 60.0, 50.0, 50.0, 50.0, 65.0, 50.0});
  const MetricsRecord m = compute_metrics(trace);
  REQUIRE(m.st10_min.has_value());
  CHECK(*m.st10_min == doctest::Approx(6.0 / 60.0));  // only the tail counts

  RunTrace never = trace_of({97.4, 60.0, 50.0, 50.0, 65.0});
  const MetricsRecord m2 = compute_metrics(never);
  CHECK_FALSE(m2.st10_min.has_value());  // ends out of band
}

TEST_CASE("absent target entry leaves the events empty, not zero") {
  RunTrace trace = trace_of({97.4, 90.0, 85.0, 80.0});
  const MetricsRecord m = compute_metrics(trace);
  CHECK_FALSE(m.tt_min.has_value());
  CHECK_FALSE(m.st10_min.has_value());
  CHECK(m.us == 0.0);
  CHECK(m.bis_nadir == 80.0);
}

TEST_CASE("nadir below 45 exactly when undershoot is positive") {
  for (double floor : {38.0, 43.0, 44.9, 45.0, 45.1, 52.0}) {
    RunTrace trace = trace_of({97.4, 70.0, floor, 50.0, 50.0});
    const MetricsRecord m = compute_metrics(trace);
    CHECK((m.bis_nadir < 45.0) == (m.us > 0.0));
    if (m.us > 0.0) {
      CHECK(m.us == doctest::Approx(45.0 - m.bis_nadir));
    }
  }
}

TEST_CASE("summary of a single record collapses to that record") {
  RunTrace trace = trace_of({97.4, 60.0, 50.0, 50.0, 50.0});
  const MetricsRecord m = compute_metrics(trace);
  const CohortSummary s = summarize_metrics("pid", {m}, 10.0);
  CHECK(s.runs == 1);
  CHECK(s.tt.mean == *m.tt_min);
  CHECK(s.tt.stddev == 0.0);
  CHECK(s.nadir.extreme == m.bis_nadir);
  CHECK(s.us.mean == m.us);
}

TEST_CASE("non-settling runs report the duration bound in the max column") {
  RunTrace settles = trace_of({97.4, 60.0, 50.0, 50.0, 50.0});
  RunTrace never = trace_of({97.4, 90.0, 85.0, 80.0, 80.0});
  const std::vector<MetricsRecord> records{compute_metrics(settles),
                                           compute_metrics(never)};
  const CohortSummary s = summarize_metrics("nmpc", records, 10.0);
  CHECK(s.tt.defined == 1);
  CHECK(s.tt.absent == 1);
  CHECK(s.tt.extreme == 10.0);  // capped at the run duration
  // mean/std computed over the defined run only
  CHECK(s.tt.mean == doctest::Approx(2.0 / 60.0));
  CHECK(s.tt.stddev == 0.0);
}

TEST_CASE("empty traces are rejected") {
  RunTrace empty;
  CHECK_THROWS_AS(compute_metrics(empty), std::invalid_argument);
}
