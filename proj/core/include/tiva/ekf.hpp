#pragma once

#include "tiva/pkpd.hpp"

namespace tiva {

// Shared discrete dynamics used by the estimator/controller side of a loop
// (nominal PK at the controller period).
struct DiscreteDynamics {
  Mat8 a = Mat8::Identity();
  Mat8x2 b = Mat8x2::Zero();
};

DiscreteDynamics nominal_dynamics(double sample_period_s);

struct EkfConfig {
  Mat8 r1 = Mat8::Identity();    // process noise covariance
  double r2 = 1.0;               // measurement noise variance (BIS^2)
  Vec8 x0 = Vec8::Zero();        // induction starts drug-free
  Mat8 p0 = Mat8::Identity();

  static EkfConfig defaults();
  void validate() const;
};

// One filter instance. x_hat/p hold the one-step-ahead prediction between
// measurement updates; pd carries the theta this filter is conditioned on.
struct EkfState {
  Vec8 x_hat = Vec8::Zero();
  Mat8 p = Mat8::Identity();
  PdParams pd;
};

EkfState make_ekf(const EkfConfig& config, const ThetaVector& theta,
                  double e0 = kNominalE0);

// Measurement correction at the current estimate: gain from the linearized
// output, state/covariance update, then the non-negativity clamp on x_hat.
// Returns the innovation. Throws on a non-positive innovation covariance.
double ekf_measurement_update(EkfState& state, double y, double r2);

// Pure time update: x <- A x + B u, P <- A P A' + R1.
void ekf_predict_only(EkfState& state, const Vec2& u,
                      const DiscreteDynamics& dyn, const Mat8& r1);

// Full recursion step in the textbook order (correct with y, clamp, then
// predict with the input to be applied next). Returns the innovation.
double ekf_update(EkfState& state, double y, const Vec2& u,
                  const DiscreteDynamics& dyn, const EkfConfig& config);

}  // namespace tiva
