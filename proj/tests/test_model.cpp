#include <doctest.h>

#include <cmath>

#include "lbmhe/errors.hpp"
#include "lbmhe/model.hpp"
#include "support.hpp"

using namespace lbmhe;

TEST_CASE("ParamVec rejects non-finite entries") {
  CHECK_THROWS_AS(ParamVec(Vector::Constant(2, std::nan(""))), ConfigError);
  CHECK_THROWS_AS(ParamVec(Vector::Constant(1, INFINITY)), ConfigError);
  CHECK(ParamVec{1.0, 2.0}.size() == 2);
}

TEST_CASE("ParamBox validation and projection") {
  CHECK_THROWS_AS(ParamBox(Vector::Constant(1, 1.0), Vector::Constant(1, 0.0)), ConfigError);
  const ParamBox box(Vector::Constant(1, 0.0), Vector::Constant(1, 1.0));
  CHECK(box.project(Vector::Constant(1, -0.4))[0] == 0.0);
  CHECK(box.project(Vector::Constant(1, 1.7))[0] == 1.0);
  CHECK(box.project(Vector::Constant(1, 0.3))[0] == 0.3);
  CHECK(box.contains(ParamVec{0.5}));
  CHECK_FALSE(box.contains(ParamVec{1.5}));
}

TEST_CASE("eval_family: zero family at θ = 0 is the zero matrix") {
  const AffineMatrixFamily fam(Matrix::Zero(2, 2), {Matrix::Identity(2, 2)});
  CHECK(eval_family(fam, ParamVec{0.0}).isZero());
  CHECK(fam.partial(0) == Matrix::Identity(2, 2));
}

TEST_CASE("eval_family: constant family ignores θ") {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 1.0, 2.0;
  const AffineMatrixFamily fam(d, {});
  CHECK(eval_family(fam, ParamVec(Vector(0))) == d);
  const AffineMatrixFamily fam3 = AffineMatrixFamily::constant(d, 3);
  CHECK(eval_family(fam3, ParamVec{5.0, -1.0, 2.0}) == d);
}

TEST_CASE("eval_family: literal scaled A family of the cooling example") {
  const RunConfig cfg = test::factory_config("factory4_literal.json");
  const Matrix A = eval_family(cfg.model.A, ParamVec{0.001});
  Matrix expected(4, 4);
  expected << 3, .001, .001, 0, .001, 3, 0, .001, .001, 0, 3, .001, 0, .001, .001, 3;
  expected /= 1000.0;
  CHECK((A - expected).cwiseAbs().maxCoeff() < 1e-18);
}

TEST_CASE("eval_family: dimension mismatch is a configuration error") {
  const AffineMatrixFamily fam(Matrix::Zero(2, 2), {Matrix::Identity(2, 2)});
  CHECK_THROWS_AS(fam.eval(ParamVec{1.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(AffineMatrixFamily(Matrix::Zero(2, 2), {Matrix::Identity(3, 3)}), ConfigError);
}

TEST_CASE("eval_family is exactly affine") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Index q = 3;
    MatrixList coeffs;
    for (Index j = 0; j < q; ++j) coeffs.push_back(test::random_matrix(rng, 3, 2));
    const AffineMatrixFamily fam(test::random_matrix(rng, 3, 2), coeffs);
    const ParamVec t1(test::random_vector(rng, q)), t2(test::random_vector(rng, q));
    const Matrix lhs = fam.eval(t1) + fam.eval(t2) - fam.eval(test::zero_theta(q));
    const Matrix rhs = fam.eval(ParamVec(t1.values() + t2.values()));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("polytope membership and box") {
  const Polytope box = Polytope::box(2, 0.1);
  CHECK(box.contains(Vector::Constant(2, 0.1)));
  CHECK_FALSE(box.contains(Vector::Constant(2, 0.1 + 1e-6)));
  CHECK(box.contains(Vector::Constant(2, 0.1 + 1e-8), 1e-7));
  CHECK(Polytope::unconstrained(3).contains(Vector::Constant(3, 1e300)));
  CHECK(box.scaled(2.0).contains(Vector::Constant(2, 0.2)));
}

TEST_CASE("truncated Gaussian: disturbance samples respect the box") {
  const RunConfig cfg = test::factory_config();
  const TruncatedGaussian w = cfg.model.disturbance();
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const Vector s = sample_truncated_gaussian(w, rng);
    REQUIRE(s.cwiseAbs().maxCoeff() <= 0.1);
  }
}

TEST_CASE("truncated Gaussian: no truncation gives the plain Gaussian mean") {
  const Vector mean = (Vector(2) << 1.0, -2.0).finished();
  const Matrix cov = (Matrix(2, 2) << 2.0, 0.3, 0.3, 1.0).finished();
  const TruncatedGaussian g("plain", mean, cov, Polytope::unconstrained(2));
  Rng rng(3);
  const int n = 100000;
  Vector sum = Vector::Zero(2);
  for (int i = 0; i < n; ++i) sum += sample_truncated_gaussian(g, rng);
  const Vector emp = sum / n;
  CHECK(std::abs(emp(0) - mean(0)) < 3.0 * std::sqrt(cov(0, 0) / n));
  CHECK(std::abs(emp(1) - mean(1)) < 3.0 * std::sqrt(cov(1, 1) / n));
}

TEST_CASE("truncated Gaussian: sampler agrees draw-for-draw with an independent rejection loop") {
  const Matrix cov = (Matrix(2, 2) << 1.0, 0.5, 0.5, 2.0).finished();
  const Polytope support((Matrix(2, 2) << 1.0, 1.0, -1.0, 0.0).finished(), (Vector(2) << 0.5, 1.0).finished());
  const TruncatedGaussian g("oracle", Vector::Zero(2), cov, support);
  Rng rng_lib(99), rng_oracle(99);
  const Matrix L = Eigen::LLT<Matrix>(cov).matrixL();
  int hist_lib[4] = {0, 0, 0, 0}, hist_oracle[4] = {0, 0, 0, 0};
  auto bucket = [](const Vector& x) { return (x(0) > 0 ? 1 : 0) + (x(1) > 0 ? 2 : 0); };
  for (int i = 0; i < 100000; ++i) {
    const Vector a = sample_truncated_gaussian(g, rng_lib);
    Vector b;
    do {
      Vector z(2);
      z(0) = rng_oracle.normal();
      z(1) = rng_oracle.normal();
      b = L * z;
    } while (!(b(0) + b(1) <= 0.5 && -b(0) <= 1.0));
    ++hist_lib[bucket(a)];
    ++hist_oracle[bucket(b)];
  }
  for (int k = 0; k < 4; ++k) CHECK(hist_lib[k] == hist_oracle[k]);
}

TEST_CASE("truncated Gaussian: an unreachable support raises a named sampling error") {
  const Polytope far(Matrix::Identity(1, 1) * -1.0, Vector::Constant(1, -50.0));  // x ≥ 50
  const TruncatedGaussian g("far-away", Vector::Zero(1), Matrix::Identity(1, 1), far);
  Rng rng(1);
  try {
    sample_truncated_gaussian(g, rng, 1000);
    FAIL("expected SamplingError");
  } catch (const SamplingError& e) {
    CHECK(std::string(e.what()).find("far-away") != std::string::npos);
  }
}

TEST_CASE("model validation catches dimension and covariance errors") {
  Rng rng(2);
  LtiModel m = test::random_model(rng, 3, 1, 2, 1);
  LtiModel bad = m;
  bad.Q = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = m;
  bad.R = -Matrix::Identity(2, 2);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = m;
  bad.W = Polytope(Matrix::Identity(3, 3), Vector::Constant(3, -1.0));
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(make_model(m, ParamVec{0.0}));
  CHECK_THROWS_AS(make_model(m, ParamVec{0.0, 1.0}), ConfigError);
}
