#include <doctest.h>

#include <cmath>

#include "lbmhe/errors.hpp"
#include "lbmhe/qp_solver.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace lbmhe;

using test::dual_oracle_objective;

TEST_CASE("unconstrained minimum of ‖z‖²") {
  const QpSolution s = solve(QpProblem::unconstrained(2.0 * Matrix::Identity(3, 3), Vector::Zero(3)));
  CHECK(s.status == QpStatus::kOptimal);
  CHECK(s.z.norm() == 0.0);
  CHECK(s.lambda.size() == 0);
  CHECK(s.nu.size() == 0);
}

TEST_CASE("min (z-1)² s.t. z ≤ 0 gives z = 0, λ = 2") {
  QpProblem qp = QpProblem::unconstrained(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, -2.0));
  qp.G = Matrix::Constant(1, 1, 1.0);
  qp.h = Vector::Constant(1, 0.0);
  const QpSolution s = solve(qp);
  REQUIRE(s.status == QpStatus::kOptimal);
  CHECK(std::abs(s.z(0)) < 1e-10);
  CHECK(std::abs(s.lambda(0) - 2.0) < 1e-8);
}

TEST_CASE("infeasible problem is reported with a certificate") {
  QpProblem qp = QpProblem::unconstrained(Matrix::Identity(1, 1), Vector::Zero(1));
  qp.G = (Matrix(2, 1) << 1.0, -1.0).finished();
  qp.h = (Vector(2) << -1.0, -1.0).finished();  // z ≤ -1 and z ≥ 1
  const QpSolution s = solve(qp);
  CHECK(s.status == QpStatus::kInfeasible);
  CHECK(std::isfinite(s.kkt_residual));
}

TEST_CASE("rank-deficient equality constraints are a configuration error") {
  QpProblem qp = QpProblem::unconstrained(Matrix::Identity(2, 2), Vector::Zero(2));
  qp.E = (Matrix(2, 2) << 1.0, 1.0, 2.0, 2.0).finished();
  qp.b = (Vector(2) << 1.0, 2.0).finished();
  CHECK_THROWS_AS(solve(qp), ConfigError);
}

TEST_CASE("inconsistent dimensions are a configuration error") {
  QpProblem qp = QpProblem::unconstrained(Matrix::Identity(2, 2), Vector::Zero(3));
  CHECK_THROWS_AS(solve(qp), ConfigError);
}

TEST_CASE("iteration cap returns max-iter") {
  Rng rng(4);
  const QpProblem qp = test::random_feasible_qp(rng, 20, 40, 3);
  SolverConfig cfg;
  cfg.max_iter = 2;
  cfg.try_unconstrained_first = false;
  const QpSolution s = solve(qp, cfg);
  CHECK(s.status == QpStatus::kMaxIter);
  CHECK(s.z.size() == 20);
}

TEST_CASE("PSD-but-singular P with equality constraints is still solved") {
  QpProblem qp = QpProblem::unconstrained(Matrix::Zero(2, 2), Vector::Zero(2));
  qp.P(0, 0) = 2.0;
  qp.E = Matrix::Zero(0, 2);
  qp.G = (Matrix(2, 2) << 0.0, 1.0, 0.0, -1.0).finished();
  qp.h = (Vector(2) << 1.0, 1.0).finished();
  qp.f = (Vector(2) << -2.0, -1.0).finished();  // linear pull on z₂ to its bound
  const QpSolution s = solve(qp);
  REQUIRE(s.status == QpStatus::kOptimal);
  CHECK(std::abs(s.z(0) - 1.0) < 1e-6);
  CHECK(std::abs(s.z(1) - 1.0) < 1e-6);
}

TEST_CASE("KKT residuals within 1e-8 on 100 random feasible instances (d ≤ 40)") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const Index d = 2 + static_cast<Index>(rng.uniform() * 39);
    const Index mi = static_cast<Index>(rng.uniform() * 2 * d);
    const Index me = static_cast<Index>(rng.uniform() * d / 3);
    const QpProblem qp = test::random_feasible_qp(rng, d, mi, me);
    const QpSolution s = solve(qp);
    REQUIRE(s.status == QpStatus::kOptimal);
    const KktResiduals r = kkt_residuals(qp, s.z, s.lambda, s.nu);
    CHECK(r.stationarity <= 1e-8 * (1.0 + qp.f.cwiseAbs().maxCoeff()));
    CHECK(r.primal_ineq <= 1e-8);
    CHECK(r.primal_eq <= 1e-8);
    CHECK(r.complementarity <= 1e-8);
    if (mi > 0) CHECK(s.lambda.minCoeff() >= -1e-10);
  }
}

TEST_CASE("objective matches a dual projected-gradient oracle (20 instances, d ≤ 12)") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(5000 + seed);
    const Index d = 2 + static_cast<Index>(rng.uniform() * 11);
    const Index me = static_cast<Index>(rng.uniform() * d / 3);
    const Index mi = static_cast<Index>(rng.uniform() * (d - me));
    const QpProblem qp = test::random_feasible_qp(rng, d, mi, me);
    const QpSolution s = solve(qp);
    REQUIRE(s.status == QpStatus::kOptimal);
    const double primal = qp.objective(s.z);
    const double oracle = dual_oracle_objective(qp);
    CHECK(std::abs(primal - oracle) <= 1e-6 * std::max(1.0, std::abs(oracle)));
  }
}

TEST_CASE("solve is deterministic") {
  Rng rng(77);
  const QpProblem qp = test::random_feasible_qp(rng, 15, 20, 4);
  const QpSolution a = solve(qp), b = solve(qp);
  CHECK(a.z == b.z);
  CHECK(a.lambda == b.lambda);
  CHECK(a.nu == b.nu);
  CHECK(a.iterations == b.iterations);
}
