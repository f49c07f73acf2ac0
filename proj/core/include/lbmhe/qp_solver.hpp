#pragma once

#include <string>

#include "lbmhe/types.hpp"

namespace lbmhe {

/// Dense convex QP
///   min ½ zᵀPz + fᵀz   s.t.  Gz ≤ h,  Ez = b.
struct QpProblem {
  Matrix P;
  Vector f;
  Matrix G;
  Vector h;
  Matrix E;
  Vector b;

  Index dim() const { return P.rows(); }
  Index num_ineq() const { return G.rows(); }
  Index num_eq() const { return E.rows(); }

  /// Problem with no constraints of the given dimension.
  static QpProblem unconstrained(Matrix P, Vector f);

  double objective(const Vector& z) const { return 0.5 * z.dot(P * z) + f.dot(z); }

  /// Dimension and symmetry checks; throws ConfigError.
  void validate() const;
};

enum class QpStatus { kOptimal, kMaxIter, kInfeasible };

std::string to_string(QpStatus status);

struct QpSolution {
  Vector z;
  Vector lambda;  // inequality duals, ≥ 0
  Vector nu;      // equality duals
  QpStatus status = QpStatus::kMaxIter;
  /// Max of the scaled KKT residuals on success; for kInfeasible the
  /// residual ‖Gᵀλ̄ + Eᵀν̄‖∞ of the normalized dual ray.
  double kkt_residual = 0.0;
  int iterations = 0;
  /// Diagonal shift added to P when [P Eᵀ; E 0] was singular.
  double regularization = 0.0;
  /// True when the returned point comes from an exact active-set solve.
  bool polished = false;
};

struct SolverConfig {
  int max_iter = 100;
  /// Absolute KKT tolerance (stationarity scaled by 1 + ‖f‖∞).
  double tol = 1e-8;
  /// Dual magnitude past which the problem is declared infeasible.
  double divergence_threshold = 1e12;
  /// Added to P's diagonal when the equality-constrained Hessian is singular.
  double psd_regularization = 1e-9;
  /// Re-solve the KKT system on the identified active set after the
  /// interior-point iterations.
  bool polish = true;
  /// Try the equality-constrained minimizer first and return it when it
  /// already satisfies every inequality.
  bool try_unconstrained_first = true;
};

struct KktResiduals {
  double stationarity = 0.0;  // ‖Pz + f + Gᵀλ + Eᵀν‖∞
  double primal_ineq = 0.0;   // max(Gz - h, 0)
  double primal_eq = 0.0;     // ‖Ez - b‖∞
  double complementarity = 0.0;  // max |λᵢ (Gz - h)ᵢ|
  double dual_infeas = 0.0;   // max(-λ, 0)
};

KktResiduals kkt_residuals(const QpProblem& qp, const Vector& z, const Vector& lambda, const Vector& nu);

/// Primal-dual interior point (Mehrotra predictor-corrector) on the dense
/// reduced KKT system. Deterministic for identical inputs.
///
/// Throws ConfigError on inconsistent dimensions or rank-deficient E.
QpSolution solve(const QpProblem& qp, const SolverConfig& cfg = {});

}  // namespace lbmhe
