#include "lbmhe/linalg.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "lbmhe/errors.hpp"

namespace lbmhe {

SqrtmResult inv_sqrtm_with_sens(const Matrix& P, const MatrixList& dP) {
  if (P.rows() != P.cols()) throw NumericalError("inv_sqrtm: matrix is not square");
  const Index n = P.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(P));
  if (eig.info() != Eigen::Success) throw NumericalError("inv_sqrtm: eigendecomposition failed");
  const Vector& lambda = eig.eigenvalues();
  if (lambda.minCoeff() <= 1e-12) {
    throw NumericalError("inv_sqrtm: matrix is not positive definite (min eigenvalue " +
                         std::to_string(lambda.minCoeff()) + ")");
  }
  const Matrix& V = eig.eigenvectors();
  const Vector root = lambda.cwiseSqrt();

  SqrtmResult out;
  out.inv_sqrt = symmetrize(V * root.cwiseInverse().asDiagonal() * V.transpose());
  out.sensitivities.reserve(dP.size());
  for (const Matrix& d : dP) {
    if (d.rows() != n || d.cols() != n) throw NumericalError("inv_sqrtm: sensitivity dimension mismatch");
    Matrix dS_eig = V.transpose() * d * V;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const double denom = root(i) + root(j);
        if (!(denom > 0.0)) throw InvariantError("inv_sqrtm: singular Sylvester operator");
        dS_eig(i, j) /= denom;
      }
    }
    // d(S⁻¹) = -S⁻¹ dS S⁻¹, all diagonal in the eigenbasis
    const Matrix dX_eig = -(root.cwiseInverse().asDiagonal() * dS_eig * root.cwiseInverse().asDiagonal());
    out.sensitivities.push_back(symmetrize(V * dX_eig * V.transpose()));
  }
  return out;
}

Matrix inv_sqrtm(const Matrix& P) { return inv_sqrtm_with_sens(P, {}).inv_sqrt; }

RiccatiResult riccati_step_with_sens(const Matrix& P, const MatrixList& dP, const LtiModel& model,
                                     const ParamVec& theta) {
  const Matrix A = model.A.eval(theta);
  const Matrix C = model.C.eval(theta);

  const Matrix PCt = P * C.transpose();
  const Matrix S = model.R + C * PCt;
  Eigen::LLT<Matrix> S_llt(symmetrize(S));
  if (S_llt.info() != Eigen::Success) {
    throw NumericalError("riccati: innovation covariance R + C P Cᵀ is not positive definite");
  }
  const Matrix M = A * PCt;                          // A P Cᵀ
  const Matrix SinvMt = S_llt.solve(M.transpose());  // S⁻¹ Mᵀ
  Matrix next = model.Q + A * P * A.transpose() - M * SinvMt;

  const double asym = (next - next.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * (1.0 + next.cwiseAbs().maxCoeff())) {
    spdlog::warn("riccati: symmetry drift {:.3e}, symmetrizing", asym);
  }
  RiccatiResult out;
  out.P = symmetrize(next);
  if (Eigen::LLT<Matrix>(out.P).info() != Eigen::Success) {
    throw NumericalError("riccati: P lost positive definiteness (model/θ inconsistent?)");
  }

  out.dP.reserve(dP.size());
  for (std::size_t j = 0; j < dP.size(); ++j) {
    const Matrix& dA = model.A.partial(static_cast<Index>(j));
    const Matrix& dC = model.C.partial(static_cast<Index>(j));
    const Matrix& dPj = dP[j];
    const Matrix dAPAt = dA * P * A.transpose();
    const Matrix d_APAt = dAPAt + A * dPj * A.transpose() + dAPAt.transpose();
    const Matrix dM = dA * PCt + A * dPj * C.transpose() + A * P * dC.transpose();
    const Matrix dCPCt = dC * PCt;
    const Matrix dS = dCPCt + C * dPj * C.transpose() + dCPCt.transpose();
    // d(M S⁻¹ Mᵀ) = dM S⁻¹ Mᵀ + M S⁻¹ dMᵀ - M S⁻¹ dS S⁻¹ Mᵀ
    const Matrix t1 = dM * SinvMt;
    const Matrix d_gain = t1 + t1.transpose() - SinvMt.transpose() * dS * SinvMt;
    out.dP.push_back(symmetrize(d_APAt - d_gain));
  }
  return out;
}

Index observability_rank(const Matrix& A, const Matrix& C, double rel_tol) {
  const Index n = A.rows();
  const Index p = C.rows();
  Matrix obs(n * p, n);
  Matrix block = C;
  for (Index k = 0; k < n; ++k) {
    obs.middleRows(k * p, p) = block;
    block = block * A;
  }
  Eigen::JacobiSVD<Matrix> svd(obs);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double cutoff = rel_tol * sv(0);
  return static_cast<Index>((sv.array() > cutoff).count());
}

bool is_observable(const Matrix& A, const Matrix& C, double rel_tol) {
  return observability_rank(A, C, rel_tol) >= A.rows();
}

double rel_error(const Matrix& a, const Matrix& b, double floor) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

}  // namespace lbmhe
