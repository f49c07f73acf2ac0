#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "lbmhe/model.hpp"
#include "lbmhe/qp_diff.hpp"
#include "lbmhe/qp_solver.hpp"
#include "lbmhe/types.hpp"

namespace lbmhe {

/// Where the prior mean of the next window comes from.
enum class PriorMode {
  /// x̄_{k-N} = A x̂(k-N-1) + B u(k-N-1): the one-step prediction from the
  /// estimate produced at time k-N-1. Pairs with the a-priori Riccati
  /// covariance P_{k-N}; the unconstrained estimator equals the Kalman filter.
  kPredicted,
  /// x̄_{k-N} = x̂*_{k-N|k-1}, the smoothed state from the previous window.
  kSmoothed,
};

struct MheConfig {
  int horizon = 10;  // N
  SolverConfig solver;
  DiffConfig diff;
  bool enable_state_constraints = true;
  bool enable_disturbance_constraints = true;
  bool enable_noise_constraints = false;
  PriorMode prior_mode = PriorMode::kPredicted;
  double feas_tol = 1e-7;
  /// Doublings of the bounded noise sets (W and V) tried when a window QP
  /// is infeasible.
  int max_relaxations = 10;

  void validate() const;
};

/// Data of one estimation window covering time steps start … k.
struct MheWindow {
  Index k = 0;
  Index start = 0;
  VectorList y;  // y(start) … y(k), k - start + 1 entries
  VectorList u;  // u(start) … u(k-1), k - start entries
  Vector prior_mean;
  Matrix prior_inv_sqrt;
  double prior_cost = 0.0;

  Index length() const { return k - start; }
  /// The window starts at time 0, so the prior is the initial-state prior
  /// and x(0) ∈ X₀ applies.
  bool initial() const { return start == 0; }
};

/// Per-θⱼ derivatives of the window prior.
struct SensitivityState {
  VectorList d_prior_mean;
  MatrixList d_prior_inv_sqrt;
  MatrixList d_P;

  static SensitivityState zeros(Index n, Index q);
};

/// Position of each variable block inside the stacked decision vector
/// (x_start … x_k, w_start … w_{k-1}, v_start … v_k).
struct MheLayout {
  Index n = 0;
  Index p = 0;
  Index length = 0;  // number of transitions in the window

  Index x(Index i) const { return i * n; }
  Index w(Index i) const { return (length + 1) * n + i * n; }
  Index v(Index i) const { return (length + 1) * n + length * n + i * p; }
  Index dim() const { return (length + 1) * n + length * n + (length + 1) * p; }
  Index num_dynamics_rows() const { return length * n; }
  Index num_measurement_rows() const { return (length + 1) * p; }
};

struct MheQp {
  QpProblem qp;
  QpDataSens sens;
  MheLayout layout;
  /// ‖P^{-1/2} x̄‖², dropped from the QP objective.
  double objective_constant = 0.0;
};

enum class DerivativeMode {
  /// Prior held fixed: ∂MHE/∂θ only.
  kPartial,
  /// Prior derivatives from the SensitivityState enter the data sensitivities.
  kTotal,
};

/// Builds the window QP and its per-parameter data derivatives.
/// `noise_scale` multiplies the right-hand sides of the W and V rows
/// (infeasibility relaxation).
MheQp build_qp(const MheWindow& window, const ParamVec& theta, const SensitivityState& sens,
               const LtiModel& model, const MheConfig& cfg, DerivativeMode mode = DerivativeMode::kTotal,
               double noise_scale = 1.0);

struct MheStepResult {
  Index k = 0;
  Vector x_hat;        // x̂(k) = x̂*_{k|k}
  VectorList x_window;  // x̂*_{i|k}, i = start … k
  VectorList w_hats;    // ŵ*_{i|k}
  VectorList v_hats;    // v̂*_{i|k}
  double V_star = 0.0;
  VectorList dx_hat;               // total derivative of x̂(k), one per θⱼ
  std::vector<VectorList> dx_window;  // [j][i]
  VectorList dw_last;              // total derivative of ŵ*_{k-1|k}; empty when k = 0
  bool has_w = false;
  bool degenerate = false;
  bool weak_activity = false;
  bool relaxed = false;
  double noise_scale = 1.0;  // factor applied to W and V when relaxed
  int qp_iterations = 0;
};

/// Solves one window, differentiates the solution and extracts the estimate.
MheStepResult estimate_step(const MheWindow& window, const ParamVec& theta, const SensitivityState& sens,
                            const LtiModel& model, const MheConfig& cfg,
                            DerivativeMode mode = DerivativeMode::kTotal);

/// Rolling estimator at a fixed parameter estimate. Grows the window as a
/// full-information problem until N transitions are available, then slides
/// it, propagating the prior and its θ-derivatives between windows.
class MovingHorizonEstimator {
 public:
  MovingHorizonEstimator(const LtiModel& model, ParamVec theta, MheConfig cfg);

  /// Consumes y(k) (and u(k-1) for k ≥ 1) and returns the estimate x̂(k).
  MheStepResult step(const Vector& y, const std::optional<Vector>& u_prev);

  Index time() const { return next_k_; }
  const SensitivityState& sensitivity_state() const { return last_sens_; }
  /// Window solved by the most recent step.
  const MheWindow& last_window() const { return last_window_; }
  const ParamVec& theta() const { return theta_; }

 private:
  struct History {
    Index k = 0;
    Vector x_hat;
    VectorList dx_hat;
    double V_star = 0.0;
  };

  void advance_riccati_to(Index index);

  LtiModel model_;
  ParamVec theta_;
  MheConfig cfg_;
  Matrix A_;
  Matrix B_;

  Index next_k_ = 0;
  std::deque<Vector> y_buf_;  // most recent N+1 measurements
  std::deque<Vector> u_buf_;  // most recent N+1 inputs
  std::deque<History> history_;
  std::optional<MheStepResult> previous_;

  Index riccati_index_ = 0;
  Matrix P_;
  MatrixList dP_;
  SensitivityState last_sens_;
  MheWindow last_window_;
};

struct MheTrajectory {
  std::vector<MheStepResult> steps;
  SensitivityState final_sens;
};

/// Runs the estimator over y(0) … y(T) with inputs u(0) … u(T-1).
MheTrajectory run_trajectory(const LtiModel& model, const ParamVec& theta, const VectorList& y_seq,
                             const VectorList& u_seq, const MheConfig& cfg);

/// One-shot constrained full-information estimate of x(T) from y(0) … y(T).
MheStepResult solve_full_information(const LtiModel& model, const ParamVec& theta, const VectorList& y_seq,
                                     const VectorList& u_seq, const MheConfig& cfg);

}  // namespace lbmhe
