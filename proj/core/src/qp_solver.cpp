#include "lbmhe/qp_solver.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "lbmhe/errors.hpp"

namespace lbmhe {

namespace {

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Largest α ∈ (0, 1] keeping v + α dv ≥ 0.
double max_step(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

Matrix kkt_matrix(const Matrix& H, const Matrix& E) {
  const Index d = H.rows();
  const Index me = E.rows();
  Matrix K = Matrix::Zero(d + me, d + me);
  K.topLeftCorner(d, d) = H;
  K.topRightCorner(d, me) = E.transpose();
  K.bottomLeftCorner(me, d) = E;
  return K;
}

bool converged(const KktResiduals& r, double f_scale, double tol) {
  return r.stationarity <= tol * (1.0 + f_scale) && r.primal_ineq <= tol && r.primal_eq <= tol &&
         r.complementarity <= tol && r.dual_infeas <= tol;
}

double worst(const KktResiduals& r, double f_scale) {
  return std::max({r.stationarity / (1.0 + f_scale), r.primal_ineq, r.primal_eq, r.complementarity,
                   r.dual_infeas});
}

/// Solves the KKT system with the constraints in `active` held as
/// equalities. Returns nothing if the system is singular, the multipliers
/// have the wrong sign or an inactive constraint is violated.
std::optional<QpSolution> active_set_solve(const QpProblem& qp, const Matrix& P,
                                           const std::vector<Index>& active, double tol) {
  const Index d = qp.dim();
  const Index me = qp.num_eq();
  const Index ma = static_cast<Index>(active.size());
  Matrix Ga(ma, d);
  Vector ha(ma);
  for (Index r = 0; r < ma; ++r) {
    Ga.row(r) = qp.G.row(active[static_cast<std::size_t>(r)]);
    ha(r) = qp.h(active[static_cast<std::size_t>(r)]);
  }
  Matrix cons(ma + me, d);
  cons << Ga, qp.E;
  Vector rhs(d + ma + me);
  rhs << -qp.f, ha, qp.b;
  Eigen::PartialPivLU<Matrix> lu(kkt_matrix(P, cons));
  if (!(lu.rcond() > 1e-14)) return std::nullopt;
  const Vector sol = lu.solve(rhs);
  if (!sol.allFinite()) return std::nullopt;

  QpSolution out;
  out.z = sol.head(d);
  out.lambda = Vector::Zero(qp.num_ineq());
  const Vector lam_a = sol.segment(d, ma);
  for (Index r = 0; r < ma; ++r) {
    if (lam_a(r) < -tol) return std::nullopt;
    out.lambda(active[static_cast<std::size_t>(r)]) = std::max(lam_a(r), 0.0);
  }
  out.nu = sol.tail(me);
  if (qp.num_ineq() > 0) {
    const Vector slack = qp.G * out.z - qp.h;
    for (Index i = 0; i < slack.size(); ++i) {
      if (slack(i) > tol * (1.0 + std::abs(qp.h(i)))) return std::nullopt;
    }
  }
  out.status = QpStatus::kOptimal;
  out.polished = true;
  return out;
}

}  // namespace

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal:
      return "optimal";
    case QpStatus::kMaxIter:
      return "max-iter";
    case QpStatus::kInfeasible:
      return "infeasible";
  }
  return "unknown";
}

QpProblem QpProblem::unconstrained(Matrix P, Vector f) {
  const Index d = P.rows();
  return QpProblem{std::move(P), std::move(f), Matrix(0, d), Vector(0), Matrix(0, d), Vector(0)};
}

void QpProblem::validate() const {
  const Index d = dim();
  if (P.cols() != d || f.size() != d) throw ConfigError("qp: P/f dimension mismatch");
  if (G.cols() != d || G.rows() != h.size()) throw ConfigError("qp: G/h dimension mismatch");
  if (E.cols() != d || E.rows() != b.size()) throw ConfigError("qp: E/b dimension mismatch");
  if (d > 0 && (P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + P.cwiseAbs().maxCoeff())) {
    throw ConfigError("qp: P is not symmetric");
  }
  if (!P.allFinite() || !f.allFinite() || !G.allFinite() || !h.allFinite() || !E.allFinite() ||
      !b.allFinite()) {
    throw ConfigError("qp: non-finite problem data");
  }
}

KktResiduals kkt_residuals(const QpProblem& qp, const Vector& z, const Vector& lambda, const Vector& nu) {
  KktResiduals r;
  Vector grad = qp.P * z + qp.f;
  if (qp.num_ineq() > 0) grad += qp.G.transpose() * lambda;
  if (qp.num_eq() > 0) grad += qp.E.transpose() * nu;
  r.stationarity = inf_norm(grad);
  if (qp.num_ineq() > 0) {
    const Vector slack = qp.G * z - qp.h;
    r.primal_ineq = std::max(0.0, slack.maxCoeff());
    r.complementarity = lambda.cwiseProduct(slack).cwiseAbs().maxCoeff();
    r.dual_infeas = std::max(0.0, -lambda.minCoeff());
  }
  if (qp.num_eq() > 0) r.primal_eq = inf_norm(qp.E * z - qp.b);
  return r;
}

QpSolution solve(const QpProblem& qp, const SolverConfig& cfg) {
  qp.validate();
  const Index d = qp.dim();
  const Index mi = qp.num_ineq();
  const Index me = qp.num_eq();
  const double f_scale = inf_norm(qp.f);

  if (me > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(qp.E.transpose());
    if (qr.rank() < me) throw ConfigError("qp: equality constraint matrix E is rank deficient");
  }

  Matrix P = qp.P;
  double reg = 0.0;
  Eigen::PartialPivLU<Matrix> lu0(kkt_matrix(P, qp.E));
  if (!(lu0.rcond() > 1e-13)) {
    reg = cfg.psd_regularization;
    spdlog::warn("qp: singular reduced Hessian, regularizing P by {:.1e}·I", reg);
    P.diagonal().array() += reg;
    lu0.compute(kkt_matrix(P, qp.E));
  }

  auto finish = [&](QpSolution sol) {
    sol.regularization = reg;
    if (sol.status == QpStatus::kOptimal) {
      sol.kkt_residual = worst(kkt_residuals(qp, sol.z, sol.lambda, sol.nu), f_scale);
    }
    return sol;
  };

  if (mi == 0 || cfg.try_unconstrained_first) {
    Vector rhs(d + me);
    rhs << -qp.f, qp.b;
    const Vector sol = lu0.solve(rhs);
    QpSolution cand;
    cand.z = sol.head(d);
    cand.nu = sol.tail(me);
    cand.lambda = Vector::Zero(mi);
    cand.status = QpStatus::kOptimal;
    cand.polished = true;
    const bool feasible =
        mi == 0 || ((qp.G * cand.z - qp.h).array() <= 0.1 * cfg.tol * (1.0 + qp.h.array().abs())).all();
    if (mi == 0 || (feasible && cand.z.allFinite())) return finish(std::move(cand));
  }

  // Interior point on (z, s, λ, ν) with Gz + s = h, s ≥ 0, λ ≥ 0.
  Vector z(d), nu(me), s(mi), lam(mi);
  {
    const Matrix Gt = qp.G.transpose();
    Eigen::PartialPivLU<Matrix> lu(kkt_matrix(P + Gt * qp.G, qp.E));
    Vector rhs(d + me);
    rhs << -qp.f + Gt * qp.h, qp.b;
    const Vector sol = lu.solve(rhs);
    z = sol.head(d);
    nu = sol.tail(me);
    s = qp.h - qp.G * z;
    lam = -s;
    const double ap = -s.minCoeff();
    if (ap >= -1e-8) s.array() += 1.0 + ap;
    const double ad = -lam.minCoeff();
    if (ad >= -1e-8) lam.array() += 1.0 + ad;
  }

  QpSolution result;
  result.status = QpStatus::kMaxIter;
  int iter = 0;
  for (; iter < cfg.max_iter; ++iter) {
    const KktResiduals res = kkt_residuals(qp, z, lam, nu);
    if (converged(res, f_scale, cfg.tol)) {
      result.status = QpStatus::kOptimal;
      break;
    }
    if (inf_norm(lam) > cfg.divergence_threshold || inf_norm(nu) > cfg.divergence_threshold ||
        inf_norm(z) > cfg.divergence_threshold) {
      result.status = QpStatus::kInfeasible;
      break;
    }

    Vector r_d = P * z + qp.f + qp.G.transpose() * lam;
    if (me > 0) r_d += qp.E.transpose() * nu;
    const Vector r_e = qp.E * z - qp.b;
    const Vector r_i = qp.G * z + s - qp.h;
    const double mu = s.dot(lam) / static_cast<double>(mi);

    const Vector w = lam.cwiseQuotient(s);
    Eigen::PartialPivLU<Matrix> lu(
        kkt_matrix(P + qp.G.transpose() * w.asDiagonal() * qp.G, qp.E));

    // dλ = (r_c + λ∘r_i + λ∘(G dz)) / s,  ds = -r_i - G dz
    auto newton = [&](const Vector& r_c, Vector& dz, Vector& ds, Vector& dlam, Vector& dnu) {
      Vector rhs(d + me);
      rhs << -r_d - qp.G.transpose() * (r_c + lam.cwiseProduct(r_i)).cwiseQuotient(s), -r_e;
      const Vector sol = lu.solve(rhs);
      dz = sol.head(d);
      dnu = sol.tail(me);
      const Vector Gdz = qp.G * dz;
      ds = -r_i - Gdz;
      dlam = (r_c + lam.cwiseProduct(r_i + Gdz)).cwiseQuotient(s);
    };

    Vector dz_a, ds_a, dlam_a, dnu_a;
    newton(-s.cwiseProduct(lam), dz_a, ds_a, dlam_a, dnu_a);
    const double alpha_a = std::min(max_step(s, ds_a), max_step(lam, dlam_a));
    const double mu_aff = (s + alpha_a * ds_a).dot(lam + alpha_a * dlam_a) / static_cast<double>(mi);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    Vector r_c = -s.cwiseProduct(lam) - ds_a.cwiseProduct(dlam_a);
    r_c.array() += sigma * mu;
    Vector dz, ds, dlam, dnu;
    newton(r_c, dz, ds, dlam, dnu);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(lam, dlam)));

    z += alpha * dz;
    s += alpha * ds;
    lam += alpha * dlam;
    nu += alpha * dnu;
    if (!z.allFinite() || !lam.allFinite()) {
      result.status = QpStatus::kInfeasible;
      break;
    }
  }
  result.iterations = iter;
  result.z = z;
  result.lambda = lam;
  result.nu = nu;

  if (result.status == QpStatus::kInfeasible) {
    const double scale = std::max(inf_norm(lam), 1.0);
    Vector ray = qp.G.transpose() * (lam / scale);
    if (me > 0) ray += qp.E.transpose() * (nu / scale);
    result.kkt_residual = inf_norm(ray);
    result.regularization = reg;
    return result;
  }

  if (cfg.polish) {
    std::vector<Index> active;
    for (Index i = 0; i < mi; ++i) {
      if (lam(i) > s(i)) active.push_back(i);
    }
    if (auto polished = active_set_solve(qp, P, active, cfg.tol)) {
      const double before = result.status == QpStatus::kOptimal
                                ? worst(kkt_residuals(qp, z, lam, nu), f_scale)
                                : std::numeric_limits<double>::infinity();
      const double after = worst(kkt_residuals(qp, polished->z, polished->lambda, polished->nu), f_scale);
      if (after <= before && converged(kkt_residuals(qp, polished->z, polished->lambda, polished->nu),
                                       f_scale, cfg.tol)) {
        polished->iterations = iter;
        return finish(std::move(*polished));
      }
    }
  }

  if (result.status == QpStatus::kOptimal) return finish(std::move(result));
  result.regularization = reg;
  result.kkt_residual = worst(kkt_residuals(qp, z, lam, nu), f_scale);
  return result;
}

}  // namespace lbmhe
