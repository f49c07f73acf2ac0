#pragma once

#include "lbmhe/model.hpp"
#include "lbmhe/types.hpp"

namespace lbmhe {

/// P^{-1/2} together with its derivatives along the directions dPⱼ.
struct SqrtmResult {
  Matrix inv_sqrt;
  MatrixList sensitivities;
};

/// Inverse square root of an SPD matrix and its directional derivatives.
///
/// S = P^{1/2} comes from the symmetric eigendecomposition P = V Λ Vᵀ. The
/// derivative dS of the square root solves the Sylvester equation
/// S dS + dS S = dP, which is diagonal in the eigenbasis:
/// (Vᵀ dS V)ᵢⱼ = (Vᵀ dP V)ᵢⱼ / (√λᵢ + √λⱼ). Then d(S⁻¹) = -S⁻¹ dS S⁻¹.
///
/// Throws NumericalError if P is not SPD (min eigenvalue ≤ 1e-12).
SqrtmResult inv_sqrtm_with_sens(const Matrix& P, const MatrixList& dP);

/// Same as above without sensitivities.
Matrix inv_sqrtm(const Matrix& P);

struct RiccatiResult {
  Matrix P;
  MatrixList dP;
};

/// One step of the a-priori Riccati recursion
///   P⁺ = Q + A P Aᵀ - A P Cᵀ (R + C P Cᵀ)⁻¹ C P Aᵀ
/// at A(θ), C(θ), with forward-mode derivatives dP⁺ⱼ given dPⱼ and the
/// family partials Aⱼ, Cⱼ. The result is symmetrized.
RiccatiResult riccati_step_with_sens(const Matrix& P, const MatrixList& dP, const LtiModel& model,
                                     const ParamVec& theta);

/// Numerical rank of the stacked observability matrix [C; CA; …; CA^{n-1}]
/// with singular-value cutoff rel_tol·σ_max.
Index observability_rank(const Matrix& A, const Matrix& C, double rel_tol = 1e-8);

bool is_observable(const Matrix& A, const Matrix& C, double rel_tol = 1e-8);

/// Relative Frobenius distance ‖a - b‖ / max(‖b‖, floor).
double rel_error(const Matrix& a, const Matrix& b, double floor = 1e-12);

}  // namespace lbmhe
