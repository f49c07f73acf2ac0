#include "lbmhe/kf.hpp"

#include "lbmhe/errors.hpp"

namespace lbmhe {

namespace {

/// Update from the predicted mean/covariance (x⁻, P⁻) and their derivatives.
KfState measurement_update(Index k, const Vector& x_pred, const Matrix& P_pred, const VectorList& dx_pred,
                           const MatrixList& dP_pred, const Vector& y, const ParamVec& theta,
                           const LtiModel& model) {
  if (y.size() != model.p) throw UsageError("kf: measurement has wrong dimension");
  const Matrix C = model.C.eval(theta);
  const Matrix PCt = P_pred * C.transpose();
  const Matrix S = symmetrize(model.R + C * PCt);
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("kf: innovation covariance is not positive definite at k=" + std::to_string(k));
  }
  const Matrix K = llt.solve(PCt.transpose()).transpose();
  const Vector e = y - C * x_pred;
  const Vector Sinv_e = llt.solve(e);

  KfState out;
  out.k = k;
  out.x_hat = x_pred + K * e;
  out.P = symmetrize(P_pred - K * C * P_pred);
  out.w_hat = model.Q * C.transpose() * Sinv_e;

  const auto q = static_cast<std::size_t>(model.q);
  out.dx_hat.reserve(q);
  out.dP.reserve(q);
  out.dw_hat.reserve(q);
  for (std::size_t j = 0; j < q; ++j) {
    const Matrix& dC = model.C.partial(static_cast<Index>(j));
    const Matrix dPCt = dP_pred[j] * C.transpose() + P_pred * dC.transpose();
    const Matrix dCPCt = dC * PCt;
    const Matrix dS = dCPCt + dCPCt.transpose() + C * dP_pred[j] * C.transpose();
    const Matrix dK = llt.solve((dPCt - K * dS).transpose()).transpose();
    const Vector de = -dC * x_pred - C * dx_pred[j];
    out.dx_hat.push_back(dx_pred[j] + dK * e + K * de);
    out.dP.push_back(symmetrize(dP_pred[j] - dK * C * P_pred - K * dC * P_pred - K * C * dP_pred[j]));
    const Vector dSinv_e = llt.solve(de - dS * Sinv_e);
    out.dw_hat.push_back(model.Q * (dC.transpose() * Sinv_e + C.transpose() * dSinv_e));
  }
  return out;
}

}  // namespace

KfState kf_init(const LtiModel& model) {
  KfState s;
  s.x_hat = model.x0_prior.mean();
  s.P = model.x0_prior.cov();
  s.dx_hat.assign(static_cast<std::size_t>(model.q), Vector::Zero(model.n));
  s.dP.assign(static_cast<std::size_t>(model.q), Matrix::Zero(model.n, model.n));
  return s;
}

KfState kf_update(const KfState& state, const Vector& y, const ParamVec& theta, const LtiModel& model) {
  return measurement_update(state.k + 1, state.x_hat, state.P, state.dx_hat, state.dP, y, theta, model);
}

KfState kf_step(const KfState& state, const Vector& u, const Vector& y, const ParamVec& theta,
                const LtiModel& model) {
  if (u.size() != model.m) throw UsageError("kf: input has wrong dimension");
  const Matrix A = model.A.eval(theta);
  const Matrix B = model.B.eval(theta);
  const Vector x_pred = A * state.x_hat + B * u;
  const Matrix P_pred = symmetrize(A * state.P * A.transpose() + model.Q);
  VectorList dx_pred;
  MatrixList dP_pred;
  for (Index j = 0; j < model.q; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const Matrix& dA = model.A.partial(j);
    dx_pred.push_back(dA * state.x_hat + A * state.dx_hat[jj] + model.B.partial(j) * u);
    const Matrix t = dA * state.P * A.transpose();
    dP_pred.push_back(symmetrize(t + t.transpose() + A * state.dP[jj] * A.transpose()));
  }
  KfState out = measurement_update(state.k + 1, x_pred, P_pred, dx_pred, dP_pred, y, theta, model);
  out.has_w = true;
  return out;
}

}  // namespace lbmhe
