#pragma once

#include <string>
#include <vector>

#include "lbmhe/mhe.hpp"
#include "lbmhe/model.hpp"
#include "lbmhe/types.hpp"

namespace lbmhe {

enum class EstimatorKind { kMhe, kKf };

/// Parses "mhe" or "kf"; throws ConfigError otherwise.
EstimatorKind parse_estimator(const std::string& name);
std::string to_string(EstimatorKind kind);

/// Estimate at one time step, common to both estimators.
struct EstimatePoint {
  Index k = 0;
  Vector x_hat;
  VectorList dx_hat;
  bool has_w = false;
  Vector w_hat;  // estimate of w(k-1)
  VectorList dw_hat;
  double V_star = 0.0;  // zero for the Kalman filter
  bool degenerate = false;
  bool weak_activity = false;
  bool relaxed = false;
};

struct EstimateTrace {
  std::vector<EstimatePoint> points;

  bool any_degenerate() const;
  bool any_relaxed() const;
};

/// Runs the chosen estimator at fixed θ over y(0) … y(T), u(0) … u(T-1).
EstimateTrace run_estimator(EstimatorKind kind, const LtiModel& model, const ParamVec& theta,
                            const VectorList& y_seq, const VectorList& u_seq, const MheConfig& mhe_cfg);

/// Mean over k = 1 … T of ‖x(k) - x̂(k)‖₂.
double mean_state_error(const VectorList& x_seq, const EstimateTrace& trace);

}  // namespace lbmhe
