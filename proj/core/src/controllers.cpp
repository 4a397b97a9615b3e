#include "tiva/controllers.hpp"

#include "tiva/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace tiva {

namespace {

// |e|^p and its signed derivative kernel |e|^(p-1)*sign(e), with the common
// exponents special-cased to stay off the pow path in the hot loop.
double power_cost(double e, double p) {
  if (p == 2.0) {
    return e * e;
  }
  if (p == 4.0) {
    const double e2 = e * e;
    return e2 * e2;
  }
  return std::pow(std::abs(e), p);
}

double power_slope(double e, double p) {
  if (p == 2.0) {
    return 2.0 * e;
  }
  if (p == 4.0) {
    return 4.0 * e * e * e;
  }
  return p * std::pow(std::abs(e), p - 1.0) * (e >= 0.0 ? 1.0 : -1.0);
}

}  // namespace

void MpcConfig::validate() const {
  if (control_horizon < 1 || horizon < control_horizon) {
    throw std::invalid_argument("need horizon >= control_horizon >= 1");
  }
  const Eigen::Matrix2d rs = 0.5 * (r + r.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(rs);
  if (es.eigenvalues().minCoeff() < -1e-12) {
    throw std::invalid_argument("input cost matrix must be positive semi-definite");
  }
  if (!(u_max(0) > 0.0) || !(u_max(1) > 0.0)) {
    throw std::invalid_argument("u_max must be positive");
  }
  if (!(sample_period_s > 0.0)) {
    throw std::invalid_argument("sample period must be positive");
  }
  if (!(cost_exponent >= 2.0)) {
    throw std::invalid_argument("cost exponent must be >= 2");
  }
  if (max_iterations < 1 || !(grad_tolerance > 0.0)) {
    throw std::invalid_argument("bad solver limits");
  }
}

std::vector<Vec2> shift_plan(const std::vector<Vec2>& plan) {
  if (plan.empty()) {
    return {};
  }
  std::vector<Vec2> shifted(plan.begin() + 1, plan.end());
  shifted.push_back(plan.back());
  return shifted;
}

namespace {

using Plan = std::vector<Vec2>;

struct MpcWork {
  const Vec8* x0;
  const PdParams* pd;
  double y_ref;
  const MpcConfig* cfg;
  const DiscreteDynamics* dyn;
  std::vector<Vec8> states;  // rollout scratch, horizon+1 entries
};

void clamp_plan(Plan& plan, const Vec2& u_max) {
  for (Vec2& u : plan) {
    u = u.cwiseMax(0.0).cwiseMin(u_max);
  }
}

// Cost of a move plan; fills the gradient via the adjoint recursion when
// requested. Inputs beyond the control horizon repeat the last move.
double evaluate(MpcWork& w, const Plan& plan, Plan* grad) {
  const int n = w.cfg->horizon;
  const int nu = w.cfg->control_horizon;
  const double p = w.cfg->cost_exponent;
  const Eigen::Matrix2d r_sym = 0.5 * (w.cfg->r + w.cfg->r.transpose());

  auto& xs = w.states;
  xs.resize(static_cast<std::size_t>(n) + 1);
  xs[0] = *w.x0;
  for (int j = 0; j < n; ++j) {
    const Vec2& u = plan[static_cast<std::size_t>(std::min(j, nu - 1))];
    xs[static_cast<std::size_t>(j + 1)] =
        w.dyn->a * xs[static_cast<std::size_t>(j)] + w.dyn->b * u;
  }

  double cost = 0.0;
  for (int j = 1; j <= n; ++j) {
    cost += power_cost(w.y_ref - bis_output(xs[static_cast<std::size_t>(j)], *w.pd), p);
  }
  for (int m = 0; m < nu; ++m) {
    const Vec2& u = plan[static_cast<std::size_t>(m)];
    cost += u.dot(w.cfg->r * u);
  }

  if (grad != nullptr) {
    grad->assign(static_cast<std::size_t>(nu), Vec2::Zero());
    Vec8 lambda = Vec8::Zero();
    for (int j = n; j >= 1; --j) {
      const Vec8& xj = xs[static_cast<std::size_t>(j)];
      const double e = w.y_ref - bis_output(xj, *w.pd);
      const Vec8 stage = -power_slope(e, p) * bis_jacobian(xj, *w.pd).transpose();
      lambda = (j == n) ? stage : Vec8(w.dyn->a.transpose() * lambda + stage);
      const int m = std::min(j - 1, nu - 1);
      (*grad)[static_cast<std::size_t>(m)] += w.dyn->b.transpose() * lambda;
    }
    for (int m = 0; m < nu; ++m) {
      (*grad)[static_cast<std::size_t>(m)] +=
          2.0 * r_sym * plan[static_cast<std::size_t>(m)];
    }
  }
  return cost;
}

double plan_inf_norm_diff(const Plan& a, const Plan& b) {
  double norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    norm = std::max(norm, (a[i] - b[i]).cwiseAbs().maxCoeff());
  }
  return norm;
}

}  // namespace

MpcResult mpc_solve(const Vec8& x0, const PdParams& pd, double y_ref,
                    const MpcConfig& config, const DiscreteDynamics& dyn,
                    const std::vector<Vec2>* warm_start) {
  config.validate();
  const auto t_begin = std::chrono::steady_clock::now();

  const int nu = config.control_horizon;
  MpcWork work{&x0, &pd, y_ref, &config, &dyn, {}};

  // The Hill output is flat at the drug-free origin (zero guarded gradient),
  // so the all-zero plan is a stationary point even when it is not optimal.
  // Iterate from the mid-box plan (or the warm start when it is better) and
  // only compare against the zero plan at the end.
  const Plan zero(static_cast<std::size_t>(nu), Vec2::Zero());
  Plan plan(static_cast<std::size_t>(nu), Vec2(0.5 * config.u_max));
  double f = evaluate(work, plan, nullptr);
  if (warm_start != nullptr && !warm_start->empty()) {
    Plan warm = *warm_start;
    warm.resize(static_cast<std::size_t>(nu), warm_start->back());
    clamp_plan(warm, config.u_max);
    const double f_warm = evaluate(work, warm, nullptr);
    if (f_warm <= f) {
      plan = std::move(warm);
      f = f_warm;
    }
  }

  Plan grad;
  f = evaluate(work, plan, &grad);

  MpcResult result;
  Plan best_plan = plan;
  double best_f = f;

  Plan prev_plan;
  Plan prev_grad;
  double step = 0.0;
  int iterations = 0;
  double pg_norm = 0.0;
  bool converged = false;

  Plan trial(static_cast<std::size_t>(nu), Vec2::Zero());
  for (; iterations < config.max_iterations; ++iterations) {
    // projected-gradient residual as the stationarity measure
    Plan projected = plan;
    for (int m = 0; m < nu; ++m) {
      projected[static_cast<std::size_t>(m)] -= grad[static_cast<std::size_t>(m)];
    }
    clamp_plan(projected, config.u_max);
    pg_norm = plan_inf_norm_diff(projected, plan);
    if (pg_norm <= config.grad_tolerance) {
      converged = true;
      break;
    }

    if (iterations == 0) {
      double g_inf = 0.0;
      for (const Vec2& g : grad) {
        g_inf = std::max(g_inf, g.cwiseAbs().maxCoeff());
      }
      step = 0.1 * config.u_max.maxCoeff() / std::max(g_inf, 1e-12);
    } else {
      // Barzilai-Borwein step from the last accepted move
      double ss = 0.0;
      double sy = 0.0;
      for (std::size_t m = 0; m < plan.size(); ++m) {
        const Vec2 s = plan[m] - prev_plan[m];
        const Vec2 yv = grad[m] - prev_grad[m];
        ss += s.dot(s);
        sy += s.dot(yv);
      }
      if (sy > 1e-16) {
        step = ss / sy;
      }
    }
    step = std::clamp(step, 1e-12, 1e8);

    // backtracking line search on the projected step
    double t = step;
    bool accepted = false;
    double f_trial = f;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t m = 0; m < plan.size(); ++m) {
        trial[m] = plan[m] - t * grad[m];
      }
      clamp_plan(trial, config.u_max);
      if (plan_inf_norm_diff(trial, plan) == 0.0) {
        break;  // step collapsed onto the active box
      }
      f_trial = evaluate(work, trial, nullptr);
      double decrease = 0.0;
      for (std::size_t m = 0; m < plan.size(); ++m) {
        decrease += grad[m].dot(plan[m] - trial[m]);
      }
      if (f_trial <= f - 1e-4 * decrease) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      break;
    }

    prev_plan.swap(plan);
    prev_grad.swap(grad);
    plan = trial;
    f = evaluate(work, plan, &grad);
    if (f < best_f) {
      best_f = f;
      best_plan = plan;
    }
  }

  // the zero plan stays in play as a fallback candidate
  const double f_zero = evaluate(work, zero, nullptr);
  if (f_zero < best_f) {
    best_f = f_zero;
    best_plan = zero;
  }

  std::vector<double> predicted;
  const double final_cost = evaluate(work, best_plan, nullptr);
  predicted.reserve(work.states.size());
  for (const Vec8& x : work.states) {
    predicted.push_back(bis_output(x, pd));
  }

  result.u = {best_plan[0](0), best_plan[0](1)};
  result.plan = std::move(best_plan);
  result.predicted_bis = std::move(predicted);
  result.cost = final_cost;
  result.grad_norm = pg_norm;
  result.iterations = iterations;
  result.converged = converged;
  result.solve_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t_begin)
                        .count();
  return result;
}

double governor_step(ReferenceGovernor& gov, double measured_bis, double t_s) {
  if (t_s < gov.activation_time_s) {
    gov.y_ref = gov.bis_target;
  } else {
    gov.y_ref += gov.k_i * (gov.bis_target - measured_bis);
    gov.y_ref = std::clamp(gov.y_ref, 0.0, 100.0);
  }
  return gov.y_ref;
}

void PidConfig::validate() const {
  if (!(kp >= 0.0) || !(ti > 0.0) || td < 0.0) {
    throw std::invalid_argument("bad PID gains");
  }
  if (!(ratio > 0.0) || !(sample_period_s > 0.0)) {
    throw std::invalid_argument("ratio and sample period must be positive");
  }
}

ControlDecision pid_step(PidState& state, double measured_bis, double setpoint,
                         const PidConfig& config) {
  const double dt = config.sample_period_s;
  const double error = measured_bis - setpoint;  // reverse-acting plant
  const double deriv =
      state.has_prev ? (measured_bis - state.prev_meas) / dt : 0.0;
  state.prev_meas = measured_bis;
  state.has_prev = true;

  auto output = [&](double integral) {
    return config.kp * (error + integral / config.ti + config.td * deriv);
  };

  // conditional integration: hold the integrator while the unsaturated
  // output is pinned and the error keeps pushing it further out
  const double v_unsat = output(state.integral_s + error * dt);
  const bool push_hi = v_unsat > config.u_max(0) && error > 0.0;
  const bool push_lo = v_unsat < 0.0 && error < 0.0;
  if (!push_hi && !push_lo) {
    state.integral_s += error * dt;
  }

  const double v = output(state.integral_s);
  ControlDecision decision;
  decision.u_p_mg_s = std::clamp(v, 0.0, config.u_max(0));
  decision.u_r_ug_s = std::clamp(config.ratio * v, 0.0, config.u_max(1));
  return decision;
}

PidConfig tune_pid(const std::function<double(const PidConfig&)>& objective,
                   const PidTuneConfig& tune) {
  Rng rng(tune.seed);

  auto log_uniform = [&](const Range& r) {
    return std::exp(std::log(r.lo) + (std::log(r.hi) - std::log(r.lo)) * rng.next_double());
  };
  auto uniform = [&](const Range& r) {
    return r.lo + (r.hi - r.lo) * rng.next_double();
  };

  PidConfig best = PidConfig::defaults();
  double best_f = objective(best);

  for (int i = 0; i < tune.random_samples; ++i) {
    PidConfig candidate;
    candidate.kp = log_uniform(tune.boxes.kp);
    candidate.ti = log_uniform(tune.boxes.ti);
    candidate.td = uniform(tune.boxes.td);
    const double f = objective(candidate);
    if (f < best_f) {
      best_f = f;
      best = candidate;
    }
  }

  // local coordinate refinement around the best draw
  const double factors[] = {0.7, 0.85, 1.15, 1.3};
  for (int pass = 0; pass < tune.refine_passes; ++pass) {
    for (int coord = 0; coord < 3; ++coord) {
      for (double factor : factors) {
        PidConfig candidate = best;
        if (coord == 0) {
          candidate.kp = std::clamp(best.kp * factor, tune.boxes.kp.lo, tune.boxes.kp.hi);
        } else if (coord == 1) {
          candidate.ti = std::clamp(best.ti * factor, tune.boxes.ti.lo, tune.boxes.ti.hi);
        } else {
          const double span = tune.boxes.td.hi - tune.boxes.td.lo;
          candidate.td = std::clamp(best.td + (factor - 1.0) * span,
                                    tune.boxes.td.lo, tune.boxes.td.hi);
        }
        const double f = objective(candidate);
        if (f < best_f) {
          best_f = f;
          best = candidate;
        }
      }
    }
  }
  return best;
}

}  // namespace tiva
