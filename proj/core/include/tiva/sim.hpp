#pragma once

#include "tiva/controllers.hpp"
#include "tiva/ekf.hpp"
#include "tiva/metrics.hpp"
#include "tiva/model_bank.hpp"
#include "tiva/population.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tiva {

enum class ControllerKind { kPid, kNmpc, kMmpc };

std::string to_string(ControllerKind kind);
ControllerKind controller_from_string(const std::string& name);

struct NoiseSpec {
  bool enabled = false;
  double std_dev = 1.0;  // BIS units
};

struct ScenarioConfig {
  double duration_s = 600.0;
  ControllerKind controller = ControllerKind::kMmpc;
  // 0 = take the period from the controller's own config (1 s PID, 2 s MPC)
  double controller_period_s = 0.0;
  NoiseSpec noise;
  double bis_target = 50.0;
  double base_period_s = 1.0;  // patient integration step
};

// Every tuning constant of the stack in one place; what the config file
// loads into.
struct LabConfig {
  UncertaintySpec uncertainty = UncertaintySpec::defaults();
  EkfConfig ekf = EkfConfig::defaults();
  GridSpec grid;
  SelectorConfig selector;
  MpcConfig mpc = MpcConfig::defaults();
  ReferenceGovernor governor;  // k_i / activation; targets set per scenario
  PidConfig pid = PidConfig::defaults();
  ScenarioConfig scenario;

  static LabConfig defaults() { return {}; }
};

// Simulates one induction: the true sampled patient integrates at the base
// rate, the chosen controller runs at its own period with decisions held
// zero-order in between. Deterministic for a given (patient, scenario, seed).
RunTrace run_closed_loop(const SampledPatient& patient,
                         const ScenarioConfig& scenario, const LabConfig& lab,
                         std::uint64_t seed);

// Undershoot-penalized induction objective used to tune the PID: mean of
// (IAE + w_us * US) over the cohort plus a worst-case undershoot term.
struct PidObjectiveConfig {
  double undershoot_weight = 10.0;
  double worst_case_weight = 0.5;
};

double pid_induction_objective(const std::vector<SampledPatient>& cohort,
                               const PidConfig& pid, const LabConfig& lab,
                               const PidObjectiveConfig& weights = {});

struct MonteCarloRequest {
  int n_patients = 100;
  std::vector<ControllerKind> controllers{
      ControllerKind::kPid, ControllerKind::kNmpc, ControllerKind::kMmpc};
  std::uint64_t master_seed = 1;
  int parallelism = 1;
  bool keep_traces = false;
};

struct ControllerBatch {
  ControllerKind kind = ControllerKind::kPid;
  std::vector<MetricsRecord> records;   // aligned with completed patient ids
  std::vector<int> patient_ids;         // ids of the completed runs
  std::vector<int> failed_ids;
  std::vector<double> solve_times_ms;   // every MPC tick across the batch
  CohortSummary summary;
  std::vector<RunTrace> traces;         // filled only when keep_traces is set
};

struct MonteCarloResult {
  std::vector<SampledPatient> cohort;
  std::vector<ControllerBatch> batches;
  double duration_min = 0.0;
};

// Runs the paired cohort through every requested controller. The same
// patients and noise streams are reused across controllers, and summaries do
// not depend on the worker count.
MonteCarloResult run_monte_carlo(const MonteCarloRequest& request,
                                 const LabConfig& lab);

// --- report emission -------------------------------------------------------

std::string trace_to_csv(const RunTrace& trace);
std::string metrics_to_csv(const MonteCarloResult& result);
std::string summary_table(const MonteCarloResult& result);
std::string summary_json(const MonteCarloResult& result);

}  // namespace tiva
