#pragma once

#include <doctest.h>

#include <functional>

#include "lbmhe/linalg.hpp"
#include "lbmhe/model.hpp"
#include "lbmhe/model_io.hpp"
#include "lbmhe/qp_solver.hpp"
#include "lbmhe/rng.hpp"

namespace lbmhe::test {

inline Matrix random_matrix(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline Vector random_vector(Rng& rng, Index n) { return rng.normal(n); }

inline Matrix random_spd(Rng& rng, Index n, double shift = 0.5) {
  const Matrix L = random_matrix(rng, n, n);
  return L * L.transpose() / static_cast<double>(n) + shift * Matrix::Identity(n, n);
}

inline Matrix random_symmetric(Rng& rng, Index n) { return symmetrize(random_matrix(rng, n, n)); }

/// Random stable, observable model with q parameters entering A, B and C.
inline LtiModel random_model(Rng& rng, Index n, Index m, Index p, Index q) {
  LtiModel model;
  model.n = n;
  model.m = m;
  model.p = p;
  model.q = q;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix A0 = random_matrix(rng, n, n);
    const double rho = A0.eigenvalues().cwiseAbs().maxCoeff();
    A0 *= 0.9 / rho;
    MatrixList Ac, Bc, Cc;
    for (Index j = 0; j < q; ++j) {
      Ac.push_back(0.05 * random_matrix(rng, n, n));
      Bc.push_back(0.1 * random_matrix(rng, n, m));
      Cc.push_back(0.1 * random_matrix(rng, p, n));
    }
    model.A = AffineMatrixFamily(A0, Ac);
    model.B = AffineMatrixFamily(random_matrix(rng, n, m), Bc);
    model.C = AffineMatrixFamily(random_matrix(rng, p, n), Cc);
    if (is_observable(model.A.base(), model.C.base())) break;
  }
  model.Q = random_spd(rng, n, 0.2);
  model.R = random_spd(rng, p, 0.5);
  model.x0_prior = TruncatedGaussian("x0", random_vector(rng, n), random_spd(rng, n, 0.5), Polytope::unconstrained(n));
  model.W = Polytope::unconstrained(n);
  model.V = Polytope::unconstrained(p);
  model.X = Polytope::unconstrained(n);
  model.validate();
  return model;
}

inline ParamVec zero_theta(Index q) { return ParamVec(Vector::Zero(q)); }

inline ParamVec shifted(const ParamVec& theta, Index j, double by) {
  Vector v = theta.values();
  v(j) += by;
  return ParamVec(v);
}

/// Central difference of a vector-valued map along θⱼ.
inline Vector central_diff(const std::function<Vector(const ParamVec&)>& f, const ParamVec& theta, Index j,
                           double h = 1e-6) {
  return (f(shifted(theta, j, h)) - f(shifted(theta, j, -h))) / (2.0 * h);
}

inline Vector flat(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline RunConfig factory_config(const char* name = "factory4.json") {
  return load_run_config(std::string(LBMHE_CONFIG_DIR) + "/" + name);
}

/// Random feasible QP: inequality rows are satisfied with margin by a
/// random point, so the interior is nonempty.
inline QpProblem random_feasible_qp(Rng& rng, Index d, Index mi, Index me) {
  QpProblem qp;
  qp.P = random_spd(rng, d, 0.1);
  qp.f = random_vector(rng, d);
  qp.G = random_matrix(rng, mi, d);
  const Vector z0 = random_vector(rng, d);
  qp.h = qp.G * z0;
  for (Index i = 0; i < mi; ++i) qp.h(i) += rng.uniform(0.05, 1.0);
  qp.E = random_matrix(rng, me, d);
  qp.b = qp.E * z0;
  return qp;
}

}  // namespace lbmhe::test
