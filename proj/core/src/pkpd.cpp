#include "tiva/pkpd.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

namespace tiva {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(name) + " must be strictly positive");
  }
}

}  // namespace

void PkParams::validate() const {
  require_positive(v1, "v1");
  require_positive(v2, "v2");
  require_positive(v3, "v3");
  require_positive(cl1, "cl1");
  require_positive(cl2, "cl2");
  require_positive(cl3, "cl3");
  require_positive(ke, "ke");
}

PkParams propofol_nominal() {
  return {4.27, 25.94, 238.0, 1.64, 1.72, 0.84, 0.456};
}

PkParams remifentanil_nominal() {
  return {5.22, 10.26, 5.42, 2.69, 2.20, 0.08, 0.63};
}

void ThetaVector::validate() const {
  require_positive(c50p, "c50p");
  require_positive(c50r, "c50r");
  require_positive(gamma, "gamma");
}

ThetaVector theta_nominal() { return {4.47, 19.3, 1.43}; }

void PdParams::validate() const {
  theta.validate();
  if (!(e0 > 0.0) || e0 > 100.0) {
    throw std::invalid_argument("e0 must lie in (0, 100]");
  }
}

ContinuousSystem build_continuous_matrices(const PkParams& pk) {
  pk.validate();
  const double k10 = pk.k10();
  const double k12 = pk.k12();
  const double k13 = pk.k13();
  const double k21 = pk.k21();
  const double k31 = pk.k31();

  ContinuousSystem sys;
  sys.a << -(k10 + k12 + k13), k12, k13, 0.0,
           k21, -k21, 0.0, 0.0,
           k31, 0.0, -k31, 0.0,
           pk.ke, 0.0, 0.0, -pk.ke;
  sys.b << 1.0 / pk.v1, 0.0, 0.0, 0.0;
  return sys;
}

std::pair<Mat4, Vec4> discretize(const Mat4& a, const Vec4& b, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("sampling period must be positive");
  }
  // exp([[A B];[0 0]] dt) = [[Ad Bd];[0 I]] gives both ZOH factors at once
  Eigen::Matrix<double, 5, 5> aug = Eigen::Matrix<double, 5, 5>::Zero();
  aug.topLeftCorner<4, 4>() = a * dt;
  aug.topRightCorner<4, 1>() = b * dt;
  const Eigen::Matrix<double, 5, 5> e = aug.exp();
  return {e.topLeftCorner<4, 4>(), e.topRightCorner<4, 1>()};
}

double interaction_u(double x_p4, double x_r4, const ThetaVector& theta) {
  return x_p4 / theta.c50p + x_r4 / theta.c50r;
}

double bis_from_u(double u, const PdParams& pd) {
  if (u <= 0.0) {
    return pd.e0;
  }
  const double ug = std::pow(u, pd.theta.gamma);
  return pd.e0 * (1.0 - ug / (1.0 + ug));
}

double bis_output(const Vec8& x, const PdParams& pd) {
  return bis_from_u(interaction_u(x(3), x(7), pd.theta), pd);
}

RowVec8 bis_jacobian(const Vec8& x, const PdParams& pd) {
  RowVec8 grad = RowVec8::Zero();
  const double u = interaction_u(x(3), x(7), pd.theta);
  if (u <= 0.0) {
    // slope is 0 for gamma > 1 and guarded to 0 for gamma <= 1
    return grad;
  }
  const double g = pd.theta.gamma;
  const double ug = std::pow(u, g);
  const double denom = (1.0 + ug) * (1.0 + ug);
  const double dbis_du = -pd.e0 * g * std::pow(u, g - 1.0) / denom;
  grad(3) = dbis_du / pd.theta.c50p;
  grad(7) = dbis_du / pd.theta.c50r;
  return grad;
}

PatientModel make_patient_model(const PkParams& pk_p, const PkParams& pk_r,
                                const PdParams& pd, double sample_period_s) {
  if (!(sample_period_s > 0.0)) {
    throw std::invalid_argument("sampling period must be positive");
  }
  pd.validate();

  PatientModel model;
  model.pk_p = pk_p;
  model.pk_r = pk_r;
  model.pd = pd;
  model.sample_period_s = sample_period_s;

  // PK matrices are per-minute; inputs arrive per-second, so fold the factor
  // 60 into B and discretize over dt in minutes.
  const double dt_min = sample_period_s / 60.0;
  const ContinuousSystem p = build_continuous_matrices(pk_p);
  const ContinuousSystem r = build_continuous_matrices(pk_r);
  const auto [ad_p, bd_p] = discretize(p.a, 60.0 * p.b, dt_min);
  const auto [ad_r, bd_r] = discretize(r.a, 60.0 * r.b, dt_min);

  model.a_disc.setZero();
  model.a_disc.topLeftCorner<4, 4>() = ad_p;
  model.a_disc.bottomRightCorner<4, 4>() = ad_r;
  model.b_disc.setZero();
  model.b_disc.topLeftCorner<4, 1>() = bd_p;
  model.b_disc.bottomRightCorner<4, 1>() = bd_r;
  return model;
}

double patient_step(PatientModel& model, double u_p_mg_s, double u_r_ug_s,
                    double w) {
  if (!(u_p_mg_s >= 0.0) || u_p_mg_s > kMaxPropofolRateMgS) {
    throw std::domain_error("propofol rate outside [0, 6.67] mg/s");
  }
  if (!(u_r_ug_s >= 0.0) || u_r_ug_s > kMaxRemifentanilRateUgS) {
    throw std::domain_error("remifentanil rate outside [0, 16.67] ug/s");
  }
  const double measured = bis_output(model.state, model.pd) + w;
  model.state = model.a_disc * model.state + model.b_disc * Vec2(u_p_mg_s, u_r_ug_s);
  return measured;
}

}  // namespace tiva
