#include "tiva/ekf.hpp"

#include <cmath>
#include <stdexcept>

namespace tiva {

namespace {

void symmetrize(Mat8& p) { p = 0.5 * (p + p.transpose()).eval(); }

}  // namespace

DiscreteDynamics nominal_dynamics(double sample_period_s) {
  const PatientModel nominal = make_patient_model(
      propofol_nominal(), remifentanil_nominal(), {theta_nominal(), kNominalE0},
      sample_period_s);
  return {nominal.a_disc, nominal.b_disc};
}

EkfConfig EkfConfig::defaults() {
  EkfConfig config;
  // Process noise large enough to absorb PK mismatch between the nominal
  // model and the actual patient; the blood compartments carry most of it.
  Vec8 q;
  q << 1e-2, 1e-3, 1e-3, 1e-2, 1e-1, 1e-2, 1e-2, 1e-1;
  config.r1 = q.asDiagonal();
  config.r2 = 1.0;
  config.x0 = Vec8::Zero();
  config.p0 = (1e-2 * Vec8::Ones()).asDiagonal();
  return config;
}

void EkfConfig::validate() const {
  if (!(r2 > 0.0)) {
    throw std::invalid_argument("r2 must be positive");
  }
  if (!r1.isApprox(r1.transpose(), 1e-12)) {
    throw std::invalid_argument("r1 must be symmetric");
  }
  if (!p0.isApprox(p0.transpose(), 1e-12)) {
    throw std::invalid_argument("p0 must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat8> es_r1(r1);
  if (es_r1.eigenvalues().minCoeff() < -1e-12) {
    throw std::invalid_argument("r1 must be positive semi-definite");
  }
  Eigen::SelfAdjointEigenSolver<Mat8> es_p0(p0);
  if (!(es_p0.eigenvalues().minCoeff() > 0.0)) {
    throw std::invalid_argument("p0 must be positive definite");
  }
}

EkfState make_ekf(const EkfConfig& config, const ThetaVector& theta, double e0) {
  EkfState state;
  state.x_hat = config.x0;
  state.p = config.p0;
  state.pd = {theta, e0};
  return state;
}

double ekf_measurement_update(EkfState& state, double y, double r2) {
  const RowVec8 h = bis_jacobian(state.x_hat, state.pd);
  const double innovation_cov = (h * state.p * h.transpose())(0, 0) + r2;
  if (!(innovation_cov > 0.0) || !std::isfinite(innovation_cov)) {
    throw std::runtime_error("EKF innovation covariance is not positive");
  }
  const Vec8 gain = state.p * h.transpose() / innovation_cov;
  const double innovation = y - bis_output(state.x_hat, state.pd);
  state.x_hat += gain * innovation;
  state.p -= gain * (h * state.p).eval();
  symmetrize(state.p);
  // negative concentrations are not allowed
  state.x_hat = state.x_hat.cwiseMax(0.0);
  return innovation;
}

void ekf_predict_only(EkfState& state, const Vec2& u,
                      const DiscreteDynamics& dyn, const Mat8& r1) {
  state.x_hat = dyn.a * state.x_hat + dyn.b * u;
  state.p = dyn.a * state.p * dyn.a.transpose() + r1;
  symmetrize(state.p);
}

double ekf_update(EkfState& state, double y, const Vec2& u,
                  const DiscreteDynamics& dyn, const EkfConfig& config) {
  const double innovation = ekf_measurement_update(state, y, config.r2);
  ekf_predict_only(state, u, dyn, config.r1);
  return innovation;
}

}  // namespace tiva
