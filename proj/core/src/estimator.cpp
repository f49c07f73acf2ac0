#include "lbmhe/estimator.hpp"

#include <algorithm>

#include "lbmhe/errors.hpp"
#include "lbmhe/kf.hpp"

namespace lbmhe {

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "mhe") return EstimatorKind::kMhe;
  if (name == "kf") return EstimatorKind::kKf;
  throw ConfigError("unknown estimator '" + name + "' (expected mhe or kf)");
}

std::string to_string(EstimatorKind kind) { return kind == EstimatorKind::kMhe ? "mhe" : "kf"; }

bool EstimateTrace::any_degenerate() const {
  return std::any_of(points.begin(), points.end(), [](const EstimatePoint& p) { return p.degenerate; });
}

bool EstimateTrace::any_relaxed() const {
  return std::any_of(points.begin(), points.end(), [](const EstimatePoint& p) { return p.relaxed; });
}

EstimateTrace run_estimator(EstimatorKind kind, const LtiModel& model, const ParamVec& theta,
                            const VectorList& y_seq, const VectorList& u_seq, const MheConfig& mhe_cfg) {
  if (y_seq.empty() || u_seq.size() + 1 != y_seq.size()) {
    throw UsageError("estimator: need T+1 measurements and T inputs");
  }
  EstimateTrace trace;
  trace.points.reserve(y_seq.size());
  if (kind == EstimatorKind::kMhe) {
    MovingHorizonEstimator est(model, theta, mhe_cfg);
    for (std::size_t k = 0; k < y_seq.size(); ++k) {
      std::optional<Vector> u;
      if (k > 0) u = u_seq[k - 1];
      MheStepResult r = est.step(y_seq[k], u);
      EstimatePoint pt;
      pt.k = r.k;
      pt.x_hat = std::move(r.x_hat);
      pt.dx_hat = std::move(r.dx_hat);
      pt.has_w = r.has_w;
      if (r.has_w) pt.w_hat = r.w_hats.back();
      pt.dw_hat = std::move(r.dw_last);
      pt.V_star = r.V_star;
      pt.degenerate = r.degenerate;
      pt.weak_activity = r.weak_activity;
      pt.relaxed = r.relaxed;
      trace.points.push_back(std::move(pt));
    }
    return trace;
  }

  KfState s = kf_update(kf_init(model), y_seq[0], theta, model);
  for (std::size_t k = 0; k < y_seq.size(); ++k) {
    if (k > 0) s = kf_step(s, u_seq[k - 1], y_seq[k], theta, model);
    EstimatePoint pt;
    pt.k = s.k;
    pt.x_hat = s.x_hat;
    pt.dx_hat = s.dx_hat;
    pt.has_w = s.has_w;
    if (s.has_w) {
      pt.w_hat = s.w_hat;
      pt.dw_hat = s.dw_hat;
    }
    trace.points.push_back(std::move(pt));
  }
  return trace;
}

double mean_state_error(const VectorList& x_seq, const EstimateTrace& trace) {
  if (x_seq.size() != trace.points.size()) throw UsageError("state error: sequence lengths differ");
  if (x_seq.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 1; k < x_seq.size(); ++k) sum += (x_seq[k] - trace.points[k].x_hat).norm();
  return sum / static_cast<double>(x_seq.size() - 1);
}

}  // namespace lbmhe
