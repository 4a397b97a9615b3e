// Acceptance suite for the anesthesia control laboratory. Each criterion
// prints exactly one PASS/FAIL line; the process exits nonzero when any
// criterion fails. Runs on the shipped default configuration.

#include "tiva/config.hpp"
#include "tiva/model_bank.hpp"
#include "tiva/rng.hpp"
#include "tiva/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

using namespace tiva;

namespace {

int g_failures = 0;

void report(int index, bool pass, const std::string& what,
            const std::string& detail) {
  std::printf("[%s] C%d %s (%s)\n", pass ? "PASS" : "FAIL", index, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) {
    ++g_failures;
  }
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// C1: response-surface identities at the Table-2 nominals
void criterion_pd_identities() {
  const PdParams pd{theta_nominal(), 97.4};
  bool pass = bis_output(Vec8::Zero(), pd) == 97.4;

  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    PdParams p = pd;
    p.theta.gamma = 0.3 + 4.0 * rng.next_double();
    worst = std::max(worst, std::abs(bis_from_u(1.0, p) - 48.7));
  }
  pass = pass && worst <= 1e-9;
  report(1, pass, "PD identities: baseline 97.4 and half effect 48.7 at U=1",
         fmt("worst |BIS(U=1)-48.7| = %.3g", worst));
}

// C2: analytic output gradient vs central finite differences
void criterion_jacobian() {
  const auto t_begin = std::chrono::steady_clock::now();
  Rng rng(202);
  const double h = 1e-6;
  double worst_rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    PdParams pd{theta_nominal(), 97.4};
    pd.theta.c50p *= 0.5 + rng.next_double();
    pd.theta.c50r *= 0.5 + rng.next_double();
    pd.theta.gamma = 0.8 + 2.0 * rng.next_double();
    Vec8 x;
    for (int i = 0; i < 8; ++i) {
      x(i) = 0.05 + 6.0 * rng.next_double();
    }
    const RowVec8 grad = bis_jacobian(x, pd);
    for (int i : {3, 7}) {
      Vec8 hi = x;
      Vec8 lo = x;
      hi(i) += h;
      lo(i) -= h;
      const double fd = (bis_output(hi, pd) - bis_output(lo, pd)) / (2.0 * h);
      worst_rel = std::max(worst_rel,
                           std::abs(grad(i) - fd) / std::max(1e-12, std::abs(fd)));
    }
  }
  const double elapsed_s = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - t_begin)
                               .count();
  const bool pass = worst_rel <= 1e-6 && elapsed_s < 1.0;
  report(2, pass, "analytic BIS gradient matches central differences",
         fmt("worst rel err %.3g in %.2f s", worst_rel, elapsed_s));
}

// C3: state positivity under bounded inputs; max-norm decay once inputs stop
void criterion_positivity_stability() {
  const UncertaintySpec spec = UncertaintySpec::defaults();
  Rng rng(303);
  double min_component = 1e300;
  bool decay_ok = true;

  const int n_patients = 100;
  const int sequences_per_patient = 100;
  for (int p = 0; p < n_patients; ++p) {
    const SampledPatient patient =
        sample_patient(spec, derive_seed(31337, static_cast<std::uint64_t>(p)));
    for (int s = 0; s < sequences_per_patient; ++s) {
      PatientModel model = make_patient_model(patient.pk_p, patient.pk_r,
                                              patient.pd, 1.0);
      for (int k = 0; k < 40; ++k) {
        patient_step(model, kMaxPropofolRateMgS * rng.next_double(),
                     kMaxRemifentanilRateUgS * rng.next_double());
        min_component = std::min(min_component, model.state.minCoeff());
      }
      if (s == 0) {
        // inputs stop: the largest concentration must shrink monotonically
        double prev = model.state.cwiseAbs().maxCoeff();
        for (int k = 0; k < 120; ++k) {
          patient_step(model, 0.0, 0.0);
          const double now = model.state.cwiseAbs().maxCoeff();
          if (now > prev) {
            decay_ok = false;
          }
          prev = now;
        }
      }
    }
  }
  const bool pass = min_component >= 0.0 && decay_ok;
  report(3, pass, "positivity over 10^4 bounded sequences; zero-input decay",
         fmt("min state %.3g, max-norm decay %s", min_component,
             decay_ok ? "monotone" : "violated"));
}

// C4: discounted-criterion oracle (constant unit error over a full window)
void criterion_matching_oracle() {
  const DiscreteDynamics dyn = nominal_dynamics(2.0);
  const PdParams pd{theta_nominal(), 97.4};
  SelectorConfig config;  // N_c=30, alpha=0, beta=1, lambda=0.05

  std::vector<Vec2> inputs(30, Vec2::Zero());
  std::vector<double> meas(31, 96.4);
  const double j =
      model_match_criterion(Vec8::Zero(), inputs, meas, pd, dyn, config);
  const bool pass = std::abs(j - 16.15) <= 0.01;
  report(4, pass, "criterion equals the discounted geometric sum 16.15",
         fmt("J = %.4f", j));
}

// C5: on-grid identification within 2 min at delta=30, stable afterward
void criterion_identification() {
  const LabConfig lab;
  const double period = lab.mpc.sample_period_s;
  const DiscreteDynamics dyn = nominal_dynamics(period);
  const ModelGrid grid = build_grid(lab.uncertainty.pd, lab.grid);
  const int start = nearest_candidate(grid, theta_nominal());

  int successes = 0;
  const int n_runs = 50;
  for (int run = 0; run < n_runs; ++run) {
    const int true_index = (run * 7 + run / 9) % static_cast<int>(grid.candidates.size());
    const ThetaVector truth = grid.candidates[static_cast<std::size_t>(true_index)];

    // noiseless on-grid patient: nominal PK, true theta on the grid
    SampledPatient patient;
    patient.pk_p = propofol_nominal();
    patient.pk_r = remifentanil_nominal();
    patient.pd = {truth, 97.4};
    patient.id = run;
    patient.seed = derive_seed(505, static_cast<std::uint64_t>(run));

    ScenarioConfig scenario = lab.scenario;
    scenario.controller = ControllerKind::kMmpc;
    scenario.duration_s = 360.0;

    const RunTrace trace = run_closed_loop(patient, scenario, lab, patient.seed);

    // the trace records the selected index at every base step
    double last_switch_s = 0.0;
    int current = trace.rows.front().model_index;
    for (const TraceRow& row : trace.rows) {
      if (row.model_index != current) {
        current = row.model_index;
        last_switch_s = row.t_s;
      }
    }
    if (current == true_index && last_switch_s <= 120.0) {
      ++successes;
    }
  }
  const bool pass = successes >= 45;
  report(5, pass, "selector locks the true on-grid theta within 2 min (>=90%)",
         fmt("%d/%d locked and stayed", successes, n_runs));
}

struct TableThree {
  MonteCarloResult mc;
};

// C6/C7/C8 share one desk-scale Monte-Carlo batch (100 patients, 3 controllers)
TableThree run_table_three() {
  LabConfig lab;
  MonteCarloRequest request;
  request.n_patients = 100;
  request.master_seed = 20240901;
  request.parallelism = 2;
  request.keep_traces = true;
  TableThree t;
  t.mc = run_monte_carlo(request, lab);
  return t;
}

void criterion_constraints(const TableThree& t) {
  double worst_p = 0.0;
  double worst_r = 0.0;
  long violations = 0;
  long decisions = 0;
  for (const ControllerBatch& batch : t.mc.batches) {
    for (const RunTrace& trace : batch.traces) {
      for (const TraceRow& row : trace.rows) {
        ++decisions;
        worst_p = std::max(worst_p, row.u_p_mg_s);
        worst_r = std::max(worst_r, row.u_r_ug_s);
        if (row.u_p_mg_s < 0.0 || row.u_p_mg_s > kMaxPropofolRateMgS ||
            row.u_r_ug_s < 0.0 || row.u_r_ug_s > kMaxRemifentanilRateUgS) {
          ++violations;
        }
      }
    }
  }
  report(6, violations == 0, "all logged rates inside [0,6.67]x[0,16.67]",
         fmt("%ld decisions, %ld violations, peaks %.4f / %.4f", decisions,
             violations, worst_p, worst_r));
}

void criterion_solver_budget(const TableThree& t) {
  std::vector<double> times;
  for (const ControllerBatch& batch : t.mc.batches) {
    times.insert(times.end(), batch.solve_times_ms.begin(),
                 batch.solve_times_ms.end());
  }
  if (times.empty()) {
    report(7, false, "MPC wall time budget", "no solves recorded");
    return;
  }
  std::sort(times.begin(), times.end());
  const double max_ms = times.back();
  const double median_ms = times[times.size() / 2];
  const bool pass = max_ms <= 500.0;
  report(7, pass, "per-step MPC wall time <= 0.5 s (median 0.15 s target)",
         fmt("max %.2f ms, median %.2f ms over %zu solves", max_ms, median_ms,
             times.size()));
}

void criterion_table_three(const TableThree& t) {
  const CohortSummary* pid = nullptr;
  const CohortSummary* nmpc = nullptr;
  const CohortSummary* mmpc = nullptr;
  for (const ControllerBatch& batch : t.mc.batches) {
    if (batch.kind == ControllerKind::kPid) {
      pid = &batch.summary;
    } else if (batch.kind == ControllerKind::kNmpc) {
      nmpc = &batch.summary;
    } else {
      mmpc = &batch.summary;
    }
  }

  const bool us_mean_order =
      mmpc->us.mean < nmpc->us.mean && nmpc->us.mean < pid->us.mean;
  const bool us_max_order =
      mmpc->us.extreme < nmpc->us.extreme && nmpc->us.extreme < pid->us.extreme;
  const bool tt_window = mmpc->tt.mean >= 1.2 && mmpc->tt.mean <= 3.5;
  const bool nadir_order = mmpc->nadir.extreme >= nmpc->nadir.extreme;
  const bool st20_bound = pid->st20.mean <= 3.0 && nmpc->st20.mean <= 3.0 &&
                          mmpc->st20.mean <= 3.0;

  const bool pass =
      us_mean_order && us_max_order && tt_window && nadir_order && st20_bound;
  report(8, pass, "desk-scale induction study reproduces the orderings",
         fmt("US mean %.3f/%.3f/%.3f max %.2f/%.2f/%.2f | MMPC TT %.2f | "
             "nadir min %.2f vs %.2f | ST20 %.2f/%.2f/%.2f",
             mmpc->us.mean, nmpc->us.mean, pid->us.mean, mmpc->us.extreme,
             nmpc->us.extreme, pid->us.extreme, mmpc->tt.mean,
             mmpc->nadir.extreme, nmpc->nadir.extreme, pid->st20.mean,
             nmpc->st20.mean, mmpc->st20.mean));
}

// C9: metrics CSV is byte-identical across parallelism degrees
void criterion_determinism() {
  LabConfig lab;
  MonteCarloRequest request;
  request.n_patients = 4;
  request.master_seed = 777;
  request.parallelism = 1;
  const std::string serial = metrics_to_csv(run_monte_carlo(request, lab));
  request.parallelism = 5;
  const std::string parallel = metrics_to_csv(run_monte_carlo(request, lab));
  report(9, serial == parallel && !serial.empty(),
         "byte-identical metrics CSV across parallelism",
         fmt("%zu bytes compared", serial.size()));
}

}  // namespace

int main() {
  std::printf("acceptance: closed-loop anesthesia lab, default configuration\n");
  criterion_pd_identities();
  criterion_jacobian();
  criterion_positivity_stability();
  criterion_matching_oracle();
  criterion_identification();
  const TableThree t = run_table_three();
  criterion_constraints(t);
  criterion_solver_budget(t);
  criterion_table_three(t);
  criterion_determinism();

  if (g_failures == 0) {
    std::printf("acceptance: all 9 criteria passed\n");
  } else {
    std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
