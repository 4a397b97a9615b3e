// tivasim: closed-loop anesthesia simulation lab.
//   run         one patient, one controller, trace CSV
//   montecarlo  paired cohort across controllers, metrics CSV + summary
//   tune-pid    random-search PID tuning on a sampled cohort

#include "tiva/config.hpp"
#include "tiva/sim.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
}

tiva::LabConfig load_lab(const std::string& config_path) {
  if (config_path.empty()) {
    return tiva::LabConfig::defaults();
  }
  return tiva::load_config_file(config_path);
}

std::vector<tiva::ControllerKind> parse_controllers(
    const std::vector<std::string>& names) {
  std::vector<tiva::ControllerKind> kinds;
  for (const std::string& name : names) {
    kinds.push_back(tiva::controller_from_string(name));
  }
  if (kinds.empty()) {
    kinds = {tiva::ControllerKind::kPid, tiva::ControllerKind::kNmpc,
             tiva::ControllerKind::kMmpc};
  }
  return kinds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed-loop propofol/remifentanil anesthesia lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option("--seed", seed, "master seed");
  };

  // --- run ---
  auto* run = app.add_subcommand("run", "simulate one patient, emit a trace CSV");
  std::string run_controller = "mmpc";
  bool run_nominal = false;
  add_common(run);
  run->add_option("--controller", run_controller, "pid | nmpc | mmpc");
  run->add_flag("--nominal", run_nominal, "use the nominal patient instead of sampling");

  // --- montecarlo ---
  auto* mc = app.add_subcommand("montecarlo", "batch study over a sampled cohort");
  int n_patients = 100;
  int parallelism = 1;
  bool emit_traces = false;
  std::vector<std::string> mc_controllers;
  add_common(mc);
  mc->add_option("--n-patients", n_patients, "cohort size");
  mc->add_option("--parallelism", parallelism, "worker threads");
  mc->add_option("--controller", mc_controllers,
                 "controller(s) to run (repeatable; default: all three)");
  mc->add_flag("--emit-traces", emit_traces, "write per-patient trace CSVs");

  // --- tune-pid ---
  auto* tune = app.add_subcommand("tune-pid", "tune the PID on a sampled cohort");
  int tune_cohort = 16;
  int tune_samples = 120;
  add_common(tune);
  tune->add_option("--n-patients", tune_cohort, "tuning cohort size");
  tune->add_option("--samples", tune_samples, "random-search draws");

  CLI11_PARSE(app, argc, argv);

  try {
    const tiva::LabConfig lab = load_lab(config_path);
    const std::filesystem::path out(out_dir);

    if (run->parsed()) {
      tiva::ScenarioConfig scenario = lab.scenario;
      scenario.controller = tiva::controller_from_string(run_controller);

      tiva::SampledPatient patient;
      if (run_nominal) {
        tiva::UncertaintySpec degenerate = lab.uncertainty;
        auto flatten = [](tiva::DrugUncertainty& d) {
          for (tiva::LogNormalParam* p :
               {&d.v1, &d.v2, &d.v3, &d.cl1, &d.cl2, &d.cl3, &d.ke}) {
            p->log_sd = 0.0;
          }
        };
        flatten(degenerate.propofol);
        flatten(degenerate.remifentanil);
        degenerate.pd.c50p.log_sd = 0.0;
        degenerate.pd.c50r.log_sd = 0.0;
        degenerate.pd.gamma.log_sd = 0.0;
        patient = tiva::sample_patient(degenerate, seed);
      } else {
        patient = tiva::sample_patient(lab.uncertainty, seed);
      }

      const tiva::RunTrace trace =
          tiva::run_closed_loop(patient, scenario, lab, seed);
      const auto path = out / ("trace_" + run_controller + ".csv");
      write_file(path, tiva::trace_to_csv(trace));
      const tiva::MetricsRecord m =
          tiva::compute_metrics(trace, {}, scenario.bis_target);
      std::printf("trace written to %s\n", path.c_str());
      std::printf("TT %s min, NADIR %.2f, US %.2f, solver failures %d\n",
                  m.tt_min ? std::to_string(*m.tt_min).c_str() : "n/a",
                  m.bis_nadir, m.us, trace.solver_failures);
    }

    if (mc->parsed()) {
      tiva::MonteCarloRequest request;
      request.n_patients = n_patients;
      request.controllers = parse_controllers(mc_controllers);
      request.master_seed = seed;
      request.parallelism = parallelism;
      request.keep_traces = emit_traces;

      const tiva::MonteCarloResult result = tiva::run_monte_carlo(request, lab);
      write_file(out / "metrics.csv", tiva::metrics_to_csv(result));
      write_file(out / "summary.json", tiva::summary_json(result));
      const std::string table = tiva::summary_table(result);
      write_file(out / "summary.txt", table);
      if (emit_traces) {
        for (const tiva::ControllerBatch& batch : result.batches) {
          for (std::size_t i = 0; i < batch.traces.size(); ++i) {
            const auto name = "trace_" + tiva::to_string(batch.kind) + "_p" +
                              std::to_string(batch.patient_ids[i]) + ".csv";
            write_file(out / name, tiva::trace_to_csv(batch.traces[i]));
          }
        }
      }
      std::cout << table;
      std::printf("reports written to %s\n", out.c_str());
    }

    if (tune->parsed()) {
      const auto cohort =
          tiva::sample_cohort(tune_cohort, lab.uncertainty, seed);
      auto objective = [&](const tiva::PidConfig& pid) {
        return tiva::pid_induction_objective(cohort, pid, lab);
      };
      tiva::PidTuneConfig tune_config;
      tune_config.random_samples = tune_samples;
      tune_config.seed = seed;
      const tiva::PidConfig tuned = tiva::tune_pid(objective, tune_config);

      tiva::LabConfig tuned_lab = lab;
      tuned_lab.pid = tuned;
      write_file(out / "tuned_config.json", tiva::config_to_json(tuned_lab));
      std::printf("tuned gains: kp %.5f ti %.1f td %.2f (objective %.3f)\n",
                  tuned.kp, tuned.ti, tuned.td, objective(tuned));
      std::printf("full config written to %s\n",
                  (out / "tuned_config.json").c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
