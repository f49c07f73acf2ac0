#include "lbmhe/qp_diff.hpp"

#include <algorithm>
#include <cmath>

#include "lbmhe/errors.hpp"

namespace lbmhe {

namespace {

bool is_zero(const Matrix& m) { return m.size() == 0; }
bool is_zero(const Vector& v) { return v.size() == 0; }

template <typename T>
const T* entry(const std::vector<T>& list, std::size_t j) {
  return j < list.size() && !is_zero(list[j]) ? &list[j] : nullptr;
}

}  // namespace

QpDataSens QpDataSens::zeros(Index num_params) {
  const auto q = static_cast<std::size_t>(num_params);
  QpDataSens s;
  s.dP.resize(q);
  s.df.resize(q);
  s.dG.resize(q);
  s.dh.resize(q);
  s.dE.resize(q);
  s.db.resize(q);
  return s;
}

QpSolutionSens differentiate(const QpProblem& qp, const QpSolution& sol, const QpDataSens& sens,
                             const DiffConfig& cfg) {
  if (sol.status != QpStatus::kOptimal) {
    throw UsageError("qp-diff: solution status is " + to_string(sol.status) + ", not optimal");
  }
  const Index d = qp.dim();
  const Index mi = qp.num_ineq();
  const Index me = qp.num_eq();

  QpSolutionSens out;
  const Vector slack = mi > 0 ? Vector(qp.G * sol.z - qp.h) : Vector(0);
  for (Index i = 0; i < mi; ++i) {
    const bool dual_pos = sol.lambda(i) > cfg.activity_threshold;
    const bool tight = std::abs(slack(i)) < cfg.activity_threshold;
    if (dual_pos && tight) {
      out.active_set.push_back(i);
    } else if (!dual_pos && tight) {
      out.weak_activity = true;
    }
  }
  const Index ma = static_cast<Index>(out.active_set.size());

  Matrix Ga(ma, d);
  Vector lam_a(ma);
  for (Index r = 0; r < ma; ++r) {
    const Index i = out.active_set[static_cast<std::size_t>(r)];
    Ga.row(r) = qp.G.row(i);
    lam_a(r) = sol.lambda(i);
  }

  const Index nk = d + ma + me;
  Matrix K = Matrix::Zero(nk, nk);
  K.topLeftCorner(d, d) = qp.P;
  K.topLeftCorner(d, d).diagonal().array() += sol.regularization;
  K.block(0, d, d, ma) = Ga.transpose();
  K.block(0, d + ma, d, me) = qp.E.transpose();
  K.block(d, 0, ma, d) = Ga;
  K.block(d + ma, 0, me, d) = qp.E;

  Eigen::PartialPivLU<Matrix> lu(K);
  const Vector pivots = lu.matrixLU().diagonal().cwiseAbs();
  const bool singular = nk > 0 && !(pivots.minCoeff() > 1e-12 * std::max(1.0, pivots.maxCoeff()));
  if (singular || !(lu.rcond() > 1e-14)) {
    out.degenerate = true;
    K.topLeftCorner(d, d).diagonal().array() += cfg.regularization;
    K.bottomRightCorner(ma + me, ma + me).diagonal().array() -= cfg.regularization;
    lu.compute(K);
  }

  const auto q = static_cast<std::size_t>(sens.num_params());
  out.dz.reserve(q);
  out.dlambda.reserve(q);
  out.dnu.reserve(q);
  for (std::size_t j = 0; j < q; ++j) {
    Vector r_stat = Vector::Zero(d);
    Vector r_act = Vector::Zero(ma);
    Vector r_eq = Vector::Zero(me);
    if (const Matrix* dP = entry(sens.dP, j)) r_stat += *dP * sol.z;
    if (const Vector* df = entry(sens.df, j)) r_stat += *df;
    if (const Matrix* dG = entry(sens.dG, j)) {
      for (Index r = 0; r < ma; ++r) {
        const Index i = out.active_set[static_cast<std::size_t>(r)];
        r_stat += dG->row(i).transpose() * lam_a(r);
        r_act(r) += dG->row(i).dot(sol.z);
      }
    }
    if (const Vector* dh = entry(sens.dh, j)) {
      for (Index r = 0; r < ma; ++r) r_act(r) -= (*dh)(out.active_set[static_cast<std::size_t>(r)]);
    }
    if (const Matrix* dE = entry(sens.dE, j)) {
      r_stat += dE->transpose() * sol.nu;
      r_eq += *dE * sol.z;
    }
    if (const Vector* db = entry(sens.db, j)) r_eq -= *db;

    Vector rhs(nk);
    rhs << -r_stat, -r_act, -r_eq;
    const Vector x = lu.solve(rhs);
    out.dz.push_back(x.head(d));
    Vector dlam = Vector::Zero(mi);
    for (Index r = 0; r < ma; ++r) dlam(out.active_set[static_cast<std::size_t>(r)]) = x(d + r);
    out.dlambda.push_back(std::move(dlam));
    out.dnu.push_back(x.tail(me));
  }
  return out;
}

}  // namespace lbmhe
