#include "lbmhe/mhe.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "lbmhe/errors.hpp"
#include "lbmhe/linalg.hpp"

namespace lbmhe {

namespace {

/// Σᵀ Σ for a symmetric inverse square root Σ = M^{-1/2}, i.e. M⁻¹.
Matrix weight_from_inv_sqrt(const Matrix& inv_sqrt) { return inv_sqrt.transpose() * inv_sqrt; }

void append_rows(Matrix& G, Vector& h, Index& row, const Polytope& poly, Index col, double scale = 1.0) {
  const Index r = poly.num_rows();
  if (r == 0) return;
  G.block(row, col, r, poly.dim()) = poly.H();
  h.segment(row, r) = scale * poly.h();
  row += r;
}

}  // namespace

void MheConfig::validate() const {
  if (horizon < 1) throw ConfigError("mhe: horizon N must be ≥ 1");
  if (feas_tol <= 0.0) throw ConfigError("mhe: feasibility tolerance must be positive");
  if (max_relaxations < 0) throw ConfigError("mhe: max_relaxations must be ≥ 0");
}

SensitivityState SensitivityState::zeros(Index n, Index q) {
  SensitivityState s;
  const auto qq = static_cast<std::size_t>(q);
  s.d_prior_mean.assign(qq, Vector::Zero(n));
  s.d_prior_inv_sqrt.assign(qq, Matrix::Zero(n, n));
  s.d_P.assign(qq, Matrix::Zero(n, n));
  return s;
}

MheQp build_qp(const MheWindow& window, const ParamVec& theta, const SensitivityState& sens,
               const LtiModel& model, const MheConfig& cfg, DerivativeMode mode, double noise_scale) {
  const Index n = model.n;
  const Index p = model.p;
  const Index q = model.q;
  const Index len = window.length();
  if (len < 0 || static_cast<Index>(window.y.size()) != len + 1 || static_cast<Index>(window.u.size()) != len) {
    throw UsageError("mhe: window needs N+1 measurements and N inputs (got " +
                     std::to_string(window.y.size()) + " and " + std::to_string(window.u.size()) + ")");
  }
  if (window.prior_mean.size() != n || window.prior_inv_sqrt.rows() != n || window.prior_inv_sqrt.cols() != n) {
    throw UsageError("mhe: prior has wrong dimension");
  }
  if (mode == DerivativeMode::kTotal &&
      (static_cast<Index>(sens.d_prior_mean.size()) != q || static_cast<Index>(sens.d_prior_inv_sqrt.size()) != q)) {
    throw UsageError("mhe: sensitivity state does not match q");
  }

  const Matrix A = model.A.eval(theta);
  const Matrix B = model.B.eval(theta);
  const Matrix C = model.C.eval(theta);
  const Matrix Q_w = weight_from_inv_sqrt(inv_sqrtm(model.Q));
  const Matrix R_w = weight_from_inv_sqrt(inv_sqrtm(model.R));
  const Matrix& X = window.prior_inv_sqrt;
  const Matrix prior_w = X.transpose() * X;

  MheQp out;
  out.layout = MheLayout{n, p, len};
  const MheLayout& L = out.layout;
  const Index d = L.dim();
  QpProblem& qp = out.qp;

  qp.P = Matrix::Zero(d, d);
  qp.f = Vector::Zero(d);
  qp.P.block(L.x(0), L.x(0), n, n) = 2.0 * prior_w;
  qp.f.segment(L.x(0), n) = -2.0 * prior_w * window.prior_mean;
  for (Index i = 0; i < len; ++i) qp.P.block(L.w(i), L.w(i), n, n) = 2.0 * Q_w;
  for (Index i = 0; i <= len; ++i) qp.P.block(L.v(i), L.v(i), p, p) = 2.0 * R_w;
  out.objective_constant = (X * window.prior_mean).squaredNorm();

  // x_{i+1} - A x_i - w_i = B u_i, then C x_i + v_i = y_i
  const Index n_dyn = L.num_dynamics_rows();
  const Index n_eq = n_dyn + L.num_measurement_rows();
  qp.E = Matrix::Zero(n_eq, d);
  qp.b = Vector::Zero(n_eq);
  for (Index i = 0; i < len; ++i) {
    const Index r = i * n;
    qp.E.block(r, L.x(i + 1), n, n).setIdentity();
    qp.E.block(r, L.x(i), n, n) = -A;
    qp.E.block(r, L.w(i), n, n) = -Matrix::Identity(n, n);
    qp.b.segment(r, n) = B * window.u[static_cast<std::size_t>(i)];
  }
  for (Index i = 0; i <= len; ++i) {
    const Index r = n_dyn + i * p;
    qp.E.block(r, L.x(i), p, n) = C;
    qp.E.block(r, L.v(i), p, p).setIdentity();
    qp.b.segment(r, p) = window.y[static_cast<std::size_t>(i)];
  }

  const bool use_x = cfg.enable_state_constraints;
  const bool use_x0 = use_x && window.initial();
  const bool use_w = cfg.enable_disturbance_constraints;
  const bool use_v = cfg.enable_noise_constraints;
  const Index n_in = (use_x ? (len + 1) * model.X.num_rows() : 0) +
                     (use_x0 ? model.x0_prior.support().num_rows() : 0) +
                     (use_w ? len * model.W.num_rows() : 0) + (use_v ? (len + 1) * model.V.num_rows() : 0);
  qp.G = Matrix::Zero(n_in, d);
  qp.h = Vector::Zero(n_in);
  Index row = 0;
  if (use_x) {
    for (Index i = 0; i <= len; ++i) append_rows(qp.G, qp.h, row, model.X, L.x(i));
  }
  if (use_x0) append_rows(qp.G, qp.h, row, model.x0_prior.support(), L.x(0));
  if (use_w) {
    for (Index i = 0; i < len; ++i) append_rows(qp.G, qp.h, row, model.W, L.w(i), noise_scale);
  }
  if (use_v) {
    for (Index i = 0; i <= len; ++i) append_rows(qp.G, qp.h, row, model.V, L.v(i), noise_scale);
  }

  out.sens = QpDataSens::zeros(q);
  for (Index j = 0; j < q; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const Matrix& dA = model.A.partial(j);
    const Matrix& dB = model.B.partial(j);
    const Matrix& dC = model.C.partial(j);
    Matrix dE = Matrix::Zero(n_eq, d);
    Vector db = Vector::Zero(n_eq);
    for (Index i = 0; i < len; ++i) {
      dE.block(i * n, L.x(i), n, n) = -dA;
      db.segment(i * n, n) = dB * window.u[static_cast<std::size_t>(i)];
    }
    for (Index i = 0; i <= len; ++i) dE.block(n_dyn + i * p, L.x(i), p, n) = dC;
    out.sens.dE[jj] = std::move(dE);
    out.sens.db[jj] = std::move(db);

    if (mode == DerivativeMode::kTotal) {
      const Matrix& dX = sens.d_prior_inv_sqrt[jj];
      const Vector& dmean = sens.d_prior_mean[jj];
      const Matrix d_prior_w = dX.transpose() * X + X.transpose() * dX;
      Matrix dP = Matrix::Zero(d, d);
      dP.block(L.x(0), L.x(0), n, n) = 2.0 * d_prior_w;
      Vector df = Vector::Zero(d);
      df.segment(L.x(0), n) = -2.0 * (d_prior_w * window.prior_mean + prior_w * dmean);
      out.sens.dP[jj] = std::move(dP);
      out.sens.df[jj] = std::move(df);
    }
  }
  return out;
}

MheStepResult estimate_step(const MheWindow& window, const ParamVec& theta, const SensitivityState& sens,
                            const LtiModel& model, const MheConfig& cfg, DerivativeMode mode) {
  const bool can_relax = (cfg.enable_noise_constraints && !model.V.empty_rows()) ||
                         (cfg.enable_disturbance_constraints && !model.W.empty_rows());
  MheQp built;
  QpSolution sol;
  bool relaxed = false;
  double scale = 1.0;
  for (int attempt = 0;; ++attempt) {
    scale = std::ldexp(1.0, attempt);
    built = build_qp(window, theta, sens, model, cfg, mode, scale);
    sol = solve(built.qp, cfg.solver);
    if (sol.status == QpStatus::kOptimal) break;
    if (sol.status == QpStatus::kInfeasible && can_relax && attempt < cfg.max_relaxations) {
      spdlog::debug("mhe: window at k={} infeasible, widening W and V by 2^{}", window.k, attempt + 1);
      relaxed = true;
      continue;
    }
    throw NumericalError("mhe: window QP at k=" + std::to_string(window.k) + " returned " +
                         to_string(sol.status));
  }
  const QpSolutionSens dsol = differentiate(built.qp, sol, built.sens, cfg.diff);

  const MheLayout& L = built.layout;
  const Index n = model.n;
  const Index p = model.p;
  const Index len = L.length;
  MheStepResult r;
  r.k = window.k;
  r.x_hat = sol.z.segment(L.x(len), n);
  for (Index i = 0; i <= len; ++i) r.x_window.push_back(sol.z.segment(L.x(i), n));
  for (Index i = 0; i < len; ++i) r.w_hats.push_back(sol.z.segment(L.w(i), n));
  for (Index i = 0; i <= len; ++i) r.v_hats.push_back(sol.z.segment(L.v(i), p));
  r.V_star = std::max(0.0, built.qp.objective(sol.z) + built.objective_constant) + window.prior_cost;
  r.has_w = len > 0;
  for (const Vector& dz : dsol.dz) {
    r.dx_hat.push_back(dz.segment(L.x(len), n));
    VectorList dxw;
    for (Index i = 0; i <= len; ++i) dxw.push_back(dz.segment(L.x(i), n));
    r.dx_window.push_back(std::move(dxw));
    if (r.has_w) r.dw_last.push_back(dz.segment(L.w(len - 1), n));
  }
  r.degenerate = dsol.degenerate;
  r.weak_activity = dsol.weak_activity;
  r.relaxed = relaxed;
  r.noise_scale = scale;
  r.qp_iterations = sol.iterations;

  if (cfg.enable_state_constraints) {
    for (const Vector& x : r.x_window) {
      if (!model.X.contains(x, cfg.feas_tol)) {
        throw InvariantError("mhe: estimate violates the state constraints at k=" + std::to_string(window.k));
      }
    }
  }
  return r;
}

MovingHorizonEstimator::MovingHorizonEstimator(const LtiModel& model, ParamVec theta, MheConfig cfg)
    : model_(model), theta_(std::move(theta)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (theta_.size() != model_.q) throw ConfigError("mhe: θ length does not match model");
  A_ = model_.A.eval(theta_);
  B_ = model_.B.eval(theta_);
  P_ = model_.x0_prior.cov();
  dP_.assign(static_cast<std::size_t>(model_.q), Matrix::Zero(model_.n, model_.n));
  last_sens_ = SensitivityState::zeros(model_.n, model_.q);
}

void MovingHorizonEstimator::advance_riccati_to(Index index) {
  while (riccati_index_ < index) {
    RiccatiResult next = riccati_step_with_sens(P_, dP_, model_, theta_);
    P_ = std::move(next.P);
    dP_ = std::move(next.dP);
    ++riccati_index_;
  }
}

MheStepResult MovingHorizonEstimator::step(const Vector& y, const std::optional<Vector>& u_prev) {
  const Index k = next_k_;
  const Index N = cfg_.horizon;
  const Index n = model_.n;
  const Index q = model_.q;
  if (y.size() != model_.p) throw UsageError("mhe: measurement has wrong dimension");
  if (k > 0 && !u_prev) throw UsageError("mhe: u(k-1) is required for k ≥ 1");
  if (k > 0 && u_prev->size() != model_.m) throw UsageError("mhe: input has wrong dimension");

  y_buf_.push_back(y);
  if (static_cast<Index>(y_buf_.size()) > N + 1) y_buf_.pop_front();
  if (k > 0) {
    u_buf_.push_back(*u_prev);
    if (static_cast<Index>(u_buf_.size()) > N + 1) u_buf_.pop_front();
  }

  const Index start = std::max<Index>(0, k - N);
  MheWindow window;
  window.k = k;
  window.start = start;
  window.y.assign(y_buf_.end() - (k - start + 1), y_buf_.end());
  window.u.assign(u_buf_.end() - (k - start), u_buf_.end());

  SensitivityState sens = SensitivityState::zeros(n, q);
  if (start == 0) {
    window.prior_mean = model_.x0_prior.mean();
    window.prior_inv_sqrt = inv_sqrtm(model_.x0_prior.cov());
  } else {
    advance_riccati_to(start);
    SqrtmResult root = inv_sqrtm_with_sens(P_, dP_);
    window.prior_inv_sqrt = std::move(root.inv_sqrt);
    sens.d_prior_inv_sqrt = std::move(root.sensitivities);
    sens.d_P = dP_;

    const auto prev = std::find_if(history_.begin(), history_.end(),
                                   [&](const History& h) { return h.k == start - 1; });
    if (prev == history_.end()) throw InvariantError("mhe: missing estimate history");
    window.prior_cost = prev->V_star;
    if (cfg_.prior_mode == PriorMode::kPredicted) {
      const Vector& u_before = *(u_buf_.end() - (k - start + 1));
      window.prior_mean = A_ * prev->x_hat + B_ * u_before;
      for (Index j = 0; j < q; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        sens.d_prior_mean[jj] = model_.A.partial(j) * prev->x_hat + A_ * prev->dx_hat[jj] +
                                model_.B.partial(j) * u_before;
      }
    } else {
      const MheStepResult& last = *previous_;
      const Index offset = start - (last.k - static_cast<Index>(last.x_window.size()) + 1);
      window.prior_mean = last.x_window[static_cast<std::size_t>(offset)];
      for (Index j = 0; j < q; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        sens.d_prior_mean[jj] = last.dx_window[jj][static_cast<std::size_t>(offset)];
      }
    }
  }

  MheStepResult result = estimate_step(window, theta_, sens, model_, cfg_, DerivativeMode::kTotal);
  last_sens_ = std::move(sens);
  last_window_ = std::move(window);

  history_.push_back(History{k, result.x_hat, result.dx_hat, result.V_star});
  while (static_cast<Index>(history_.size()) > N + 1) history_.pop_front();
  if (cfg_.prior_mode == PriorMode::kSmoothed) previous_ = result;
  ++next_k_;
  return result;
}

MheTrajectory run_trajectory(const LtiModel& model, const ParamVec& theta, const VectorList& y_seq,
                             const VectorList& u_seq, const MheConfig& cfg) {
  if (y_seq.empty() || u_seq.size() + 1 != y_seq.size()) {
    throw UsageError("mhe: need T+1 measurements and T inputs");
  }
  MovingHorizonEstimator est(model, theta, cfg);
  MheTrajectory out;
  out.steps.reserve(y_seq.size());
  for (std::size_t k = 0; k < y_seq.size(); ++k) {
    std::optional<Vector> u;
    if (k > 0) u = u_seq[k - 1];
    out.steps.push_back(est.step(y_seq[k], u));
  }
  out.final_sens = est.sensitivity_state();
  return out;
}

MheStepResult solve_full_information(const LtiModel& model, const ParamVec& theta, const VectorList& y_seq,
                                     const VectorList& u_seq, const MheConfig& cfg) {
  if (y_seq.empty() || u_seq.size() + 1 != y_seq.size()) {
    throw UsageError("mhe: need T+1 measurements and T inputs");
  }
  MheWindow window;
  window.k = static_cast<Index>(u_seq.size());
  window.start = 0;
  window.y = y_seq;
  window.u = u_seq;
  window.prior_mean = model.x0_prior.mean();
  window.prior_inv_sqrt = inv_sqrtm(model.x0_prior.cov());
  return estimate_step(window, theta, SensitivityState::zeros(model.n, model.q), model, cfg,
                       DerivativeMode::kTotal);
}

}  // namespace lbmhe
