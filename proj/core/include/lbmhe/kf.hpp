#pragma once

#include "lbmhe/model.hpp"
#include "lbmhe/types.hpp"

namespace lbmhe {

/// Filter state after the measurement update at time k.
struct KfState {
  Index k = -1;  // -1 before the first measurement
  Vector x_hat;
  Matrix P;
  VectorList dx_hat;
  MatrixList dP;
  /// Smoothed disturbance estimate ŵ(k-1) = Q Cᵀ S⁻¹ e(k), S the innovation
  /// covariance and e(k) the innovation. Matches the N = 1 moving horizon
  /// estimate of the last disturbance.
  Vector w_hat;
  VectorList dw_hat;
  bool has_w = false;
};

/// Prior (x̄₀, P₀) with zero sensitivities, before any measurement.
KfState kf_init(const LtiModel& model);

/// Measurement update only; used for y(0).
KfState kf_update(const KfState& state, const Vector& y, const ParamVec& theta, const LtiModel& model);

/// Predict with u(k-1), then update with y(k). Sensitivities are propagated
/// by differentiating every line of the filter.
///
/// Throws NumericalError if R + C P⁻ Cᵀ is not positive definite.
KfState kf_step(const KfState& state, const Vector& u, const Vector& y, const ParamVec& theta,
                const LtiModel& model);

}  // namespace lbmhe
