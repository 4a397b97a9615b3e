#include "tiva/sim.hpp"

#include "tiva/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace tiva {

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kPid:
      return "pid";
    case ControllerKind::kNmpc:
      return "nmpc";
    case ControllerKind::kMmpc:
      return "mmpc";
  }
  return "unknown";
}

ControllerKind controller_from_string(const std::string& name) {
  if (name == "pid") {
    return ControllerKind::kPid;
  }
  if (name == "nmpc") {
    return ControllerKind::kNmpc;
  }
  if (name == "mmpc") {
    return ControllerKind::kMmpc;
  }
  throw std::invalid_argument("unknown controller '" + name + "'");
}

namespace {

double effective_controller_period(const ScenarioConfig& scenario,
                                   const LabConfig& lab) {
  if (scenario.controller_period_s > 0.0) {
    return scenario.controller_period_s;
  }
  return scenario.controller == ControllerKind::kPid
             ? lab.pid.sample_period_s
             : lab.mpc.sample_period_s;
}

int checked_ratio(double outer, double inner, const char* what) {
  const double ratio = outer / inner;
  const double rounded = std::round(ratio);
  if (!(ratio > 0.0) || std::abs(ratio - rounded) > 1e-9 || rounded < 1.0) {
    throw std::invalid_argument(std::string(what) + " must be an integer multiple");
  }
  return static_cast<int>(rounded);
}

ThetaVector nominal_theta_of(const UncertaintySpec& spec) {
  return {spec.pd.c50p.nominal, spec.pd.c50r.nominal, spec.pd.gamma.nominal};
}

}  // namespace

RunTrace run_closed_loop(const SampledPatient& patient,
                         const ScenarioConfig& scenario, const LabConfig& lab,
                         std::uint64_t seed) {
  const double base = scenario.base_period_s;
  const double period = effective_controller_period(scenario, lab);
  const int tick_every = checked_ratio(period, base, "controller period / base period");
  const int n_steps = checked_ratio(scenario.duration_s, base, "duration / base period");

  PatientModel model =
      make_patient_model(patient.pk_p, patient.pk_r, patient.pd, base);

  Rng noise_rng(derive_seed(seed, 0x6e6f6973ull));

  const bool is_pid = scenario.controller == ControllerKind::kPid;
  const double e0 = lab.uncertainty.pd.e0.nominal;
  const ThetaVector nominal = nominal_theta_of(lab.uncertainty);

  // estimator/controller side always runs on the nominal PK model
  DiscreteDynamics dyn;
  std::unique_ptr<ModelBank> bank;
  ReferenceGovernor governor = lab.governor;
  governor.bis_target = scenario.bis_target;
  governor.y_ref = scenario.bis_target;
  MpcConfig mpc = lab.mpc;
  mpc.sample_period_s = period;
  std::vector<Vec2> warm;

  PidState pid_state;

  if (!is_pid) {
    dyn = nominal_dynamics(period);
    ModelGrid grid;
    if (scenario.controller == ControllerKind::kMmpc) {
      grid = build_grid(lab.uncertainty.pd, lab.grid);
    } else {
      grid.candidates = {nominal};
    }
    const int start = nearest_candidate(grid, nominal);
    bank = std::make_unique<ModelBank>(std::move(grid), lab.ekf, dyn,
                                       lab.selector, e0, start);
  }

  RunTrace trace;
  trace.patient_id = patient.id;
  trace.rows.reserve(static_cast<std::size_t>(n_steps) + 1);

  ControlDecision held;
  double y_ref = scenario.bis_target;
  int model_index = is_pid ? -1 : bank->selected_index();

  for (int i = 0; i <= n_steps; ++i) {
    const double t = static_cast<double>(i) * base;
    const double bis_true = bis_output(model.state, patient.pd);
    const double w = scenario.noise.enabled
                         ? scenario.noise.std_dev * noise_rng.next_gaussian()
                         : 0.0;
    const double bis_measured = bis_true + w;

    double solve_ms = 0.0;
    int solve_iterations = 0;
    double solve_grad_norm = 0.0;
    const bool is_tick = (i % tick_every == 0) && i < n_steps;
    if (is_tick) {
      if (is_pid) {
        held = pid_step(pid_state, bis_measured, scenario.bis_target, lab.pid);
      } else {
        const ModelBank::StepResult est = bank->step(bis_measured, held.as_vec());
        model_index = est.selected;
        y_ref = governor_step(governor, bis_measured, t);
        const MpcResult sol =
            mpc_solve(est.x_hat, {est.theta, e0}, y_ref, mpc, dyn, &warm);
        warm = shift_plan(sol.plan);
        held = sol.u;
        solve_ms = sol.solve_ms;
        solve_iterations = sol.iterations;
        solve_grad_norm = sol.grad_norm;
        if (!sol.converged) {
          ++trace.solver_failures;
        }
      }
    }

    TraceRow row;
    row.t_s = t;
    row.state = model.state;
    row.bis_true = bis_true;
    row.bis_measured = bis_measured;
    row.y_ref = y_ref;
    row.u_p_mg_s = held.u_p_mg_s;
    row.u_r_ug_s = held.u_r_ug_s;
    row.model_index = model_index;
    row.solve_ms = solve_ms;
    row.solve_iterations = solve_iterations;
    row.solve_grad_norm = solve_grad_norm;
    trace.rows.push_back(row);

    if (i < n_steps) {
      patient_step(model, held.u_p_mg_s, held.u_r_ug_s);
    }
  }
  return trace;
}

double pid_induction_objective(const std::vector<SampledPatient>& cohort,
                               const PidConfig& pid, const LabConfig& lab,
                               const PidObjectiveConfig& weights) {
  if (cohort.empty()) {
    throw std::invalid_argument("objective needs a nonempty cohort");
  }
  LabConfig tuned = lab;
  tuned.pid = pid;
  ScenarioConfig scenario = lab.scenario;
  scenario.controller = ControllerKind::kPid;

  double total = 0.0;
  double worst_us = 0.0;
  for (const SampledPatient& patient : cohort) {
    const RunTrace trace = run_closed_loop(patient, scenario, tuned, patient.seed);
    const MetricsRecord m = compute_metrics(trace, {}, scenario.bis_target);
    double iae_min = 0.0;  // BIS * minutes
    for (const TraceRow& row : trace.rows) {
      iae_min += std::abs(row.bis_true - scenario.bis_target) *
                 scenario.base_period_s / 60.0;
    }
    total += iae_min + weights.undershoot_weight * m.us;
    worst_us = std::max(worst_us, m.us);
  }
  return total / static_cast<double>(cohort.size()) +
         weights.worst_case_weight * worst_us;
}

MonteCarloResult run_monte_carlo(const MonteCarloRequest& request,
                                 const LabConfig& lab) {
  if (request.n_patients < 1) {
    throw std::invalid_argument("need at least one patient");
  }
  if (request.controllers.empty()) {
    throw std::invalid_argument("need at least one controller");
  }

  MonteCarloResult result;
  result.cohort =
      sample_cohort(request.n_patients, lab.uncertainty, request.master_seed);
  result.duration_min = lab.scenario.duration_s / 60.0;

  struct Slot {
    bool ok = false;
    MetricsRecord metrics;
    std::vector<double> solve_ms;
    RunTrace trace;
  };

  for (ControllerKind kind : request.controllers) {
    ScenarioConfig scenario = lab.scenario;
    scenario.controller = kind;

    std::vector<Slot> slots(result.cohort.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= result.cohort.size()) {
          return;
        }
        Slot& slot = slots[i];
        try {
          RunTrace trace = run_closed_loop(result.cohort[i], scenario, lab,
                                           result.cohort[i].seed);
          slot.metrics = compute_metrics(trace, {}, scenario.bis_target);
          for (const TraceRow& row : trace.rows) {
            if (row.solve_ms > 0.0) {
              slot.solve_ms.push_back(row.solve_ms);
            }
          }
          if (request.keep_traces) {
            slot.trace = std::move(trace);
          }
          slot.ok = true;
        } catch (const std::exception&) {
          slot.ok = false;
        }
      }
    };

    const int n_workers = std::max(1, std::min<int>(request.parallelism,
                                                    request.n_patients));
    if (n_workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(n_workers));
      for (int w = 0; w < n_workers; ++w) {
        pool.emplace_back(worker);
      }
      for (std::thread& th : pool) {
        th.join();
      }
    }

    ControllerBatch batch;
    batch.kind = kind;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      Slot& slot = slots[i];
      if (!slot.ok) {
        batch.failed_ids.push_back(static_cast<int>(i));
        continue;
      }
      batch.records.push_back(slot.metrics);
      batch.patient_ids.push_back(static_cast<int>(i));
      batch.solve_times_ms.insert(batch.solve_times_ms.end(),
                                  slot.solve_ms.begin(), slot.solve_ms.end());
      if (request.keep_traces) {
        batch.traces.push_back(std::move(slot.trace));
      }
    }
    batch.summary = summarize_metrics(to_string(kind), batch.records,
                                      result.duration_min,
                                      static_cast<int>(batch.failed_ids.size()));
    result.batches.push_back(std::move(batch));
  }
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string{};
}

}  // namespace

std::string trace_to_csv(const RunTrace& trace) {
  std::ostringstream out;
  out << "t_s,bis_true,bis_measured,y_ref,u_p_mg_s,u_r_ug_s,model_index,solve_ms\n";
  for (const TraceRow& row : trace.rows) {
    out << fmt(row.t_s) << ',' << fmt(row.bis_true) << ','
        << fmt(row.bis_measured) << ',' << fmt(row.y_ref) << ','
        << fmt(row.u_p_mg_s) << ',' << fmt(row.u_r_ug_s) << ','
        << row.model_index << ',' << fmt(row.solve_ms) << '\n';
  }
  return out.str();
}

std::string metrics_to_csv(const MonteCarloResult& result) {
  std::ostringstream out;
  out << "patient_id,controller,tt_min,nadir,st10_min,st20_min,us\n";
  for (const ControllerBatch& batch : result.batches) {
    for (std::size_t i = 0; i < batch.records.size(); ++i) {
      const MetricsRecord& m = batch.records[i];
      out << batch.patient_ids[i] << ',' << to_string(batch.kind) << ','
          << fmt_opt(m.tt_min) << ',' << fmt(m.bis_nadir) << ','
          << fmt_opt(m.st10_min) << ',' << fmt_opt(m.st20_min) << ','
          << fmt(m.us) << '\n';
    }
  }
  return out.str();
}

std::string summary_table(const MonteCarloResult& result) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-6s %-18s %-18s %-18s %-18s %-18s\n",
                "ctrl", "TT (min)", "BIS_NADIR", "ST10 (min)", "ST20 (min)", "US");
  out << line;
  for (const ControllerBatch& batch : result.batches) {
    const CohortSummary& s = batch.summary;
    auto cell = [](const MetricStats& m) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f+-%.2f/%.2f", m.mean, m.stddev,
                    m.extreme);
      return std::string(buf);
    };
    std::snprintf(line, sizeof(line), "%-6s %-18s %-18s %-18s %-18s %-18s\n",
                  s.controller.c_str(), cell(s.tt).c_str(), cell(s.nadir).c_str(),
                  cell(s.st10).c_str(), cell(s.st20).c_str(), cell(s.us).c_str());
    out << line;
    if (s.failed_runs > 0) {
      out << "  (" << s.failed_runs << " failed runs excluded)\n";
    }
  }
  out << "cells: mean+-std/extreme (max; min for BIS_NADIR), " << "n="
      << (result.batches.empty() ? 0 : result.batches.front().summary.runs)
      << " runs\n";
  return out.str();
}

std::string summary_json(const MonteCarloResult& result) {
  nlohmann::json root;
  root["n_patients"] = result.cohort.size();
  root["duration_min"] = result.duration_min;
  nlohmann::json controllers = nlohmann::json::array();
  for (const ControllerBatch& batch : result.batches) {
    const CohortSummary& s = batch.summary;
    auto block = [](const MetricStats& m) {
      return nlohmann::json{{"mean", m.mean},
                            {"std", m.stddev},
                            {"extreme", m.extreme},
                            {"defined", m.defined},
                            {"absent", m.absent}};
    };
    nlohmann::json entry;
    entry["controller"] = s.controller;
    entry["runs"] = s.runs;
    entry["failed_runs"] = s.failed_runs;
    entry["tt_min"] = block(s.tt);
    entry["bis_nadir"] = block(s.nadir);
    entry["st10_min"] = block(s.st10);
    entry["st20_min"] = block(s.st20);
    entry["us"] = block(s.us);
    if (!batch.solve_times_ms.empty()) {
      std::vector<double> times = batch.solve_times_ms;
      std::sort(times.begin(), times.end());
      entry["solve_ms_max"] = times.back();
      entry["solve_ms_median"] = times[times.size() / 2];
    }
    controllers.push_back(entry);
  }
  root["controllers"] = controllers;
  return root.dump(2);
}

}  // namespace tiva
