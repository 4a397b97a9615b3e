#pragma once

#include <Eigen/Dense>

#include <utility>

namespace tiva {

using Vec2 = Eigen::Matrix<double, 2, 1>;
using Vec4 = Eigen::Matrix<double, 4, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat8x2 = Eigen::Matrix<double, 8, 2>;
using RowVec8 = Eigen::Matrix<double, 1, 8>;

// Single-drug state: concentrations in blood, muscle, fat, effect site
// (ug/ml for propofol, ng/ml for remifentanil). Two of these stack into the
// Vec8 patient state, propofol first.
using DrugState = Vec4;

// Hard infusion-rate ceilings shared by every controller.
inline constexpr double kMaxPropofolRateMgS = 6.67;      // mg/s
inline constexpr double kMaxRemifentanilRateUgS = 16.67; // ug/s
inline constexpr double kNominalE0 = 97.4;               // drug-free BIS

// Three-compartment-plus-effect-site pharmacokinetics of one drug.
// Volumes in liters, clearances in liters/minute, ke in 1/minute.
struct PkParams {
  double v1 = 0.0;
  double v2 = 0.0;
  double v3 = 0.0;
  double cl1 = 0.0;
  double cl2 = 0.0;
  double cl3 = 0.0;
  double ke = 0.0;

  double k10() const { return cl1 / v1; }
  double k12() const { return cl2 / v1; }
  double k13() const { return cl3 / v1; }
  double k21() const { return cl2 / v2; }
  double k31() const { return cl3 / v3; }

  // throws std::invalid_argument on non-positive volumes/rates
  void validate() const;
};

PkParams propofol_nominal();      // 70 kg / 170 cm / 35 y reference man
PkParams remifentanil_nominal();

// PD parameter triple of the response-surface output.
struct ThetaVector {
  double c50p = 0.0;   // ug/ml
  double c50r = 0.0;   // ng/ml
  double gamma = 0.0;  // Hill slope

  void validate() const;
};

ThetaVector theta_nominal();

struct PdParams {
  ThetaVector theta;
  double e0 = kNominalE0;  // baseline BIS, in (0, 100]

  void validate() const;
};

struct ContinuousSystem {
  Mat4 a;  // 1/minute
  Vec4 b;  // input gain for mass flow in (drug mass unit)/minute
};

// Compartment matrix of the single-drug PK model. Column-sum structure is the
// standard mass balance: the only leak out of the physical compartments is k10.
ContinuousSystem build_continuous_matrices(const PkParams& pk);

// Exact zero-order-hold discretization over a step dt expressed in the same
// time unit as `a` (computed with one matrix exponential of the augmented
// [[A B];[0 0]] system).
std::pair<Mat4, Vec4> discretize(const Mat4& a, const Vec4& b, double dt);

// Normalized interaction term U = xp4/C50p + xr4/C50r.
double interaction_u(double x_p4, double x_r4, const ThetaVector& theta);

double bis_from_u(double u, const PdParams& pd);

// BIS via the response surface on the two effect-site states (index 3 is
// propofol, index 7 remifentanil).
double bis_output(const Vec8& x, const PdParams& pd);

// Analytic gradient of bis_output w.r.t. the 8 states. Nonzero only in the
// two effect-site slots; guarded to 0 at exactly U = 0 so gamma <= 1 cannot
// produce an unbounded entry.
RowVec8 bis_jacobian(const Vec8& x, const PdParams& pd);

// One virtual patient: decoupled propofol/remifentanil PK discretized at a
// fixed sampling period, plus the PD output and the true state.
struct PatientModel {
  PkParams pk_p;
  PkParams pk_r;
  PdParams pd;
  Vec8 state = Vec8::Zero();  // (x_p1..x_p4, x_r1..x_r4)
  Mat8 a_disc = Mat8::Identity();
  Mat8x2 b_disc = Mat8x2::Zero();
  double sample_period_s = 1.0;
};

// Builds the stacked discrete model. b_disc is scaled so inputs are infusion
// rates in mg/s (propofol) and ug/s (remifentanil).
PatientModel make_patient_model(const PkParams& pk_p, const PkParams& pk_r,
                                const PdParams& pd, double sample_period_s);

// Measures BIS at the current state (plus measurement noise w), then advances
// the state one sampling period under the held rates. Rates outside the
// [0, u_max] boxes are a domain error.
double patient_step(PatientModel& model, double u_p_mg_s, double u_r_ug_s,
                    double w = 0.0);

}  // namespace tiva
