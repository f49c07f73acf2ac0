#pragma once

#include <vector>

#include "lbmhe/qp_solver.hpp"
#include "lbmhe/types.hpp"

namespace lbmhe {

/// Derivatives of the QP data along each parameter direction θⱼ. An empty
/// (0-sized) entry stands for an all-zero derivative.
struct QpDataSens {
  MatrixList dP;
  VectorList df;
  MatrixList dG;
  VectorList dh;
  MatrixList dE;
  VectorList db;

  /// q directions with every derivative zero.
  static QpDataSens zeros(Index num_params);
  Index num_params() const { return static_cast<Index>(df.size()); }
};

struct QpSolutionSens {
  VectorList dz;
  VectorList dlambda;  // full length; zero on inactive constraints
  VectorList dnu;
  std::vector<Index> active_set;
  /// KKT matrix was singular and had to be regularized.
  bool degenerate = false;
  /// Some constraint had both λᵢ and its slack below the activity
  /// threshold; the solution map is not differentiable there.
  bool weak_activity = false;
};

struct DiffConfig {
  double activity_threshold = 1e-6;
  double regularization = 1e-10;
};

/// Implicit differentiation of the KKT conditions restricted to the active
/// set. One factorization is shared by all parameter directions.
///
/// Requires sol.status == kOptimal (UsageError otherwise).
QpSolutionSens differentiate(const QpProblem& qp, const QpSolution& sol, const QpDataSens& sens,
                             const DiffConfig& cfg = {});

}  // namespace lbmhe
