#pragma once

#include <cmath>

#include "lbmhe/qp_solver.hpp"

namespace lbmhe::test {

/// Dual projected gradient (FISTA) on max_{λ≥0,ν} of the Lagrange dual of a
/// strictly convex QP. The dual optimum equals the primal optimum.
inline double dual_oracle_objective(const QpProblem& qp, int max_iter = 1'000'000) {
  const Index mi = qp.num_ineq();
  const Index me = qp.num_eq();
  Matrix M(mi + me, qp.dim());
  M << qp.G, qp.E;
  Vector c(mi + me);
  c << qp.h, qp.b;
  const Eigen::LLT<Matrix> llt(qp.P);
  const Matrix PinvMt = llt.solve(M.transpose());
  const Matrix H = M * PinvMt;  // dual Hessian
  const Vector Pinv_f = llt.solve(qp.f);
  const double L = Eigen::SelfAdjointEigenSolver<Matrix>(H).eigenvalues().maxCoeff();
  // g(μ) = -½ (f + Mᵀμ)ᵀ P⁻¹ (f + Mᵀμ) - cᵀμ
  auto dual = [&](const Vector& mu) {
    const Vector r = qp.f + M.transpose() * mu;
    return -0.5 * r.dot(llt.solve(r)) - c.dot(mu);
  };
  auto project = [&](Vector mu) {
    for (Index i = 0; i < mi; ++i) mu(i) = std::max(0.0, mu(i));
    return mu;
  };
  Vector mu = Vector::Zero(mi + me), y = mu;
  double t = 1.0;
  double prev = -INFINITY;
  for (int it = 0; it < max_iter; ++it) {
    const Vector grad = -(M * Pinv_f + H * y) - c;
    const Vector next = project(y + grad / L);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - mu);
    mu = next;
    t = t_next;
    if (it % 1000 == 999) {
      const double g = dual(mu);
      if (std::abs(g - prev) <= 1e-15 * (1.0 + std::abs(g))) break;
      prev = g;
    }
  }
  return dual(mu);
}

}  // namespace lbmhe::test
