#include <benchmark/benchmark.h>

#include "tiva/model_bank.hpp"
#include "tiva/rng.hpp"
#include "tiva/sim.hpp"

using namespace tiva;

namespace {

void BM_EkfUpdate(benchmark::State& state) {
  const DiscreteDynamics dyn = nominal_dynamics(2.0);
  const EkfConfig config = EkfConfig::defaults();
  EkfState filter = make_ekf(config, theta_nominal());
  filter.x_hat << 2.0, 0.5, 0.2, 1.5, 4.0, 1.0, 0.3, 3.0;
  const Vec2 u(2.0, 4.0);
  double y = 60.0;
  for (auto _ : state) {
    ekf_update(filter, y, u, dyn, config);
    benchmark::DoNotOptimize(filter.x_hat);
    y = 55.0 + 0.01 * filter.x_hat(0);
  }
}
BENCHMARK(BM_EkfUpdate);

void BM_MpcSolveCold(benchmark::State& state) {
  const DiscreteDynamics dyn = nominal_dynamics(2.0);
  const PdParams pd{theta_nominal(), 97.4};
  const MpcConfig cfg;
  Vec8 x0 = Vec8::Zero();
  x0(0) = 10.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mpc_solve(x0, pd, 50.0, cfg, dyn, nullptr));
  }
}
BENCHMARK(BM_MpcSolveCold);

void BM_MpcSolveWarm(benchmark::State& state) {
  const DiscreteDynamics dyn = nominal_dynamics(2.0);
  const PdParams pd{theta_nominal(), 97.4};
  const MpcConfig cfg;
  Vec8 x0 = Vec8::Zero();
  x0(0) = 10.0;
  x0(3) = 2.0;
  std::vector<Vec2> warm = mpc_solve(x0, pd, 50.0, cfg, dyn, nullptr).plan;
  for (auto _ : state) {
    const MpcResult res = mpc_solve(x0, pd, 50.0, cfg, dyn, &warm);
    warm = shift_plan(res.plan);
    benchmark::DoNotOptimize(warm);
  }
}
BENCHMARK(BM_MpcSolveWarm);

void BM_BankStep45(benchmark::State& state) {
  const DiscreteDynamics dyn = nominal_dynamics(2.0);
  ModelBank bank(build_grid(UncertaintySpec::defaults().pd, GridSpec{}),
                 EkfConfig::defaults(), dyn, SelectorConfig{}, 97.4, 22);
  Rng rng(5);
  Vec2 u(2.0, 4.0);
  for (auto _ : state) {
    const auto out = bank.step(97.4 - 40.0 * rng.next_double(), u);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_BankStep45);

void BM_ClosedLoopMmpc(benchmark::State& state) {
  LabConfig lab;
  lab.scenario.duration_s = 60.0;
  ScenarioConfig scenario = lab.scenario;
  scenario.controller = ControllerKind::kMmpc;
  const SampledPatient patient = sample_cohort(1, lab.uncertainty, 9).front();
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_closed_loop(patient, scenario, lab, 9));
  }
}
BENCHMARK(BM_ClosedLoopMmpc)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
