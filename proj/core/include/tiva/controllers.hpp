#pragma once

#include "tiva/ekf.hpp"
#include "tiva/pkpd.hpp"
#include "tiva/population.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace tiva {

// Propofol/remifentanil rates, always inside the actuator boxes.
struct ControlDecision {
  double u_p_mg_s = 0.0;
  double u_r_ug_s = 0.0;

  Vec2 as_vec() const { return {u_p_mg_s, u_r_ug_s}; }
};

struct MpcConfig {
  int horizon = 30;          // prediction horizon N (steps)
  int control_horizon = 5;   // free moves N_u; later inputs repeat the last
                             // move, which favors sustained ramps over a
                             // slam-and-stop bolus
  // Input cost: large enough to temper the induction bolus against the
  // quartic tracking term; the weight ratio shapes the drug mix.
  Eigen::Matrix2d r = (Eigen::Vector2d(3.0e5, 2.0e4)).asDiagonal();
  double sample_period_s = 2.0;
  Vec2 u_max{kMaxPropofolRateMgS, kMaxRemifentanilRateUgS};
  double cost_exponent = 4.0;  // tracking-error power (even), 4 trades speed
                               // against undershoot better than 2
  int max_iterations = 200;
  double grad_tolerance = 0.05;  // projected-gradient residual, input units

  static MpcConfig defaults() { return {}; }
  void validate() const;
};

struct MpcResult {
  ControlDecision u;            // first move
  std::vector<Vec2> plan;       // full move sequence (control_horizon entries)
  std::vector<double> predicted_bis;  // along the optimized trajectory
  double cost = 0.0;
  double grad_norm = 0.0;       // projected-gradient norm at exit
  int iterations = 0;
  bool converged = false;
  double solve_ms = 0.0;
};

// Receding-horizon solve: single-shooting transcription of the tracking
// problem under the current theta, box bounds handled by projection, analytic
// gradients through the linear dynamics and the Hill output. Never throws on
// slow convergence; the best feasible iterate comes back flagged.
MpcResult mpc_solve(const Vec8& x0, const PdParams& pd, double y_ref,
                    const MpcConfig& config, const DiscreteDynamics& dyn,
                    const std::vector<Vec2>* warm_start = nullptr);

// Shifts a plan one step for the next warm start (last move repeated).
std::vector<Vec2> shift_plan(const std::vector<Vec2>& plan);

// Integrator on the MPC internal reference, armed after the initial
// transient so steady-state offset from model mismatch gets absorbed.
struct ReferenceGovernor {
  double bis_target = 50.0;
  double k_i = 0.05;
  double activation_time_s = 120.0;
  double y_ref = 50.0;
};

double governor_step(ReferenceGovernor& gov, double measured_bis, double t_s);

struct PidConfig {
  double kp = 0.10;    // mg/s per BIS unit
  double ti = 250.0;   // s
  double td = 20.0;    // s
  double ratio = 2.0;  // u_r [ug/s] = ratio * u_p [mg/s]
  double sample_period_s = 1.0;
  Vec2 u_max{kMaxPropofolRateMgS, kMaxRemifentanilRateUgS};

  static PidConfig defaults() { return {}; }
  void validate() const;
};

struct PidState {
  double integral_s = 0.0;   // integrated error, seconds * BIS
  double prev_meas = 0.0;
  bool has_prev = false;
};

// Discrete PID on (BIS - setpoint) with derivative on the measurement and
// conditional integration while saturated; remifentanil follows propofol at
// the fixed ratio.
ControlDecision pid_step(PidState& state, double measured_bis, double setpoint,
                         const PidConfig& config);

struct PidGainBoxes {
  Range kp{1e-3, 0.5};
  Range ti{30.0, 1200.0};
  Range td{0.0, 60.0};
};

struct PidTuneConfig {
  PidGainBoxes boxes;
  int random_samples = 120;
  int refine_passes = 2;      // coordinate-descent sweeps around the best draw
  std::uint64_t seed = 1;
};

// Deterministic random search plus coordinate refinement over the gain boxes;
// the objective is supplied by the caller (the simulation harness provides
// the undershoot-penalized induction objective).
PidConfig tune_pid(const std::function<double(const PidConfig&)>& objective,
                   const PidTuneConfig& tune);

}  // namespace tiva
