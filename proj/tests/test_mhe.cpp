#include <doctest.h>

#include <cmath>

#include "lbmhe/errors.hpp"
#include "lbmhe/estimator.hpp"
#include "lbmhe/mhe.hpp"
#include "lbmhe/simulator.hpp"
#include "support.hpp"

using namespace lbmhe;

namespace {

MheConfig unconstrained_cfg(int horizon) {
  MheConfig cfg;
  cfg.horizon = horizon;
  cfg.enable_state_constraints = false;
  cfg.enable_disturbance_constraints = false;
  cfg.enable_noise_constraints = false;
  return cfg;
}

MheWindow window_from(const Rollout& r, Index start, Index k, const LtiModel& model) {
  MheWindow w;
  w.k = k;
  w.start = start;
  w.y.assign(r.y.begin() + start, r.y.begin() + k + 1);
  w.u.assign(r.u.begin() + start, r.u.begin() + k);
  w.prior_mean = model.x0_prior.mean();
  w.prior_inv_sqrt = inv_sqrtm(model.x0_prior.cov());
  return w;
}

Vector stacked_x(const MheTrajectory& t) {
  Vector out(static_cast<Index>(t.steps.size()) * t.steps[0].x_hat.size());
  Index at = 0;
  for (const auto& s : t.steps) {
    out.segment(at, s.x_hat.size()) = s.x_hat;
    at += s.x_hat.size();
  }
  return out;
}

Vector stacked_dx(const MheTrajectory& t, std::size_t j) {
  Vector out(static_cast<Index>(t.steps.size()) * t.steps[0].x_hat.size());
  Index at = 0;
  for (const auto& s : t.steps) {
    out.segment(at, s.x_hat.size()) = s.dx_hat[j];
    at += s.x_hat.size();
  }
  return out;
}

}  // namespace

TEST_CASE("build_qp: N = 1 window without constraints") {
  Rng rng(1);
  const LtiModel m = test::random_model(rng, 3, 3, 2, 1);
  const Rollout r = rollout(m, ParamVec{0.0}, 3, SafetyPolicy{1e9, 0.0}, SinusoidRanges{}.draw(3, rng), rng);
  const MheQp built = build_qp(window_from(r, 0, 1, m), ParamVec{0.0}, SensitivityState::zeros(3, 1), m,
                               unconstrained_cfg(1));
  // two states, one disturbance, two measurement-noise vectors
  CHECK(built.qp.dim() == 2 * 3 + 3 + 2 * 2);
  CHECK(built.qp.num_ineq() == 0);
  CHECK(built.qp.num_eq() == 3 + 2 * 2);
}

TEST_CASE("build_qp: cooling model with N = 10 has 62 equality rows") {
  const RunConfig cfg = test::factory_config();
  Rng rng(2);
  const Rollout r = simulate_sample(cfg.model, cfg.plant, 12, 5);
  MheWindow w = window_from(r, 2, 12, cfg.model);
  const MheQp built = build_qp(w, ParamVec{0.001}, SensitivityState::zeros(4, 1), cfg.model, cfg.mhe);
  CHECK(built.qp.num_eq() == 62);
  // X on 11 states, W on 10 disturbances
  CHECK(built.qp.num_ineq() == 11 * 4 + 10 * 8);
  CHECK(build_qp(w, ParamVec{0.001}, SensitivityState::zeros(4, 1), cfg.model, unconstrained_cfg(10)).qp.num_ineq() ==
        0);
}

TEST_CASE("build_qp: mismatched buffers are a usage error") {
  const RunConfig cfg = test::factory_config();
  const Rollout r = simulate_sample(cfg.model, cfg.plant, 5, 5);
  MheWindow w = window_from(r, 0, 5, cfg.model);
  w.u.pop_back();
  CHECK_THROWS_AS(build_qp(w, ParamVec{0.001}, SensitivityState::zeros(4, 1), cfg.model, cfg.mhe), UsageError);
}

TEST_CASE("exact data and exact prior reproduce the true state") {
  Rng rng(3);
  const LtiModel m = test::random_model(rng, 3, 3, 2, 1);
  const ParamVec theta{0.2};
  const SinusoidSchedule sched = SinusoidRanges{}.draw(3, rng);
  const Rollout r = rollout(m, theta, 8, SafetyPolicy{1e9, 0.0}, sched, rng, false);
  MheWindow w = window_from(r, 3, 8, m);
  w.prior_mean = r.x[3];
  const MheStepResult res =
      estimate_step(w, theta, SensitivityState::zeros(3, 1), m, unconstrained_cfg(5), DerivativeMode::kTotal);
  CHECK((res.x_hat - r.x[8]).norm() < 1e-9);
  for (const Vector& wh : res.w_hats) CHECK(wh.norm() < 1e-9);
  for (const Vector& vh : res.v_hats) CHECK(vh.norm() < 1e-9);
  CHECK(res.V_star >= 0.0);
  CHECK(res.V_star < 1e-12);
}

TEST_CASE("state constraint active against measurements sits on the boundary") {
  LtiModel m;
  m.n = m.m = m.p = 1;
  m.q = 1;
  m.A = AffineMatrixFamily(Matrix::Constant(1, 1, 0.9), {Matrix::Zero(1, 1)});
  m.B = AffineMatrixFamily(Matrix::Constant(1, 1, 1.0), {Matrix::Zero(1, 1)});
  m.C = AffineMatrixFamily(Matrix::Constant(1, 1, 1.0), {Matrix::Zero(1, 1)});
  m.Q = Matrix::Constant(1, 1, 0.1);
  m.R = Matrix::Constant(1, 1, 0.1);
  m.x0_prior = TruncatedGaussian("x0", Vector::Zero(1), Matrix::Identity(1, 1), Polytope::unconstrained(1));
  m.W = Polytope::unconstrained(1);
  m.V = Polytope::unconstrained(1);
  m.X = Polytope(Matrix::Identity(1, 1), Vector::Zero(1));  // x ≤ 0
  MheConfig cfg;
  cfg.horizon = 3;
  MovingHorizonEstimator est(m, ParamVec{0.0}, cfg);
  MheStepResult last;
  for (int k = 0; k < 6; ++k) {
    std::optional<Vector> u;
    if (k > 0) u = Vector::Zero(1);
    last = est.step(Vector::Constant(1, 5.0), u);
    CHECK(last.x_hat(0) <= 1e-7);
  }
  CHECK(std::abs(last.x_hat(0)) <= 1e-7);
}

TEST_CASE("window covering the whole history equals a one-shot full-information solve") {
  const RunConfig cfg = test::factory_config();
  const Rollout r = simulate_sample(cfg.model, cfg.plant, 10, 17);
  for (Index T = 1; T <= 10; ++T) {
    const VectorList y(r.y.begin(), r.y.begin() + T + 1);
    const VectorList u(r.u.begin(), r.u.begin() + T);
    const MheTrajectory traj = run_trajectory(cfg.model, ParamVec{0.01}, y, u, cfg.mhe);
    const MheStepResult full = solve_full_information(cfg.model, ParamVec{0.01}, y, u, cfg.mhe);
    CHECK((traj.steps.back().x_hat - full.x_hat).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((traj.steps.back().dx_hat[0] - full.dx_hat[0]).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("total derivative matches central differences of the whole pipeline (cooling model, 50 steps)") {
  const RunConfig cfg = test::factory_config();
  const Rollout r = simulate_sample(cfg.model, cfg.plant, 50, 23);
  const ParamVec theta{0.01};
  const MheTrajectory base = run_trajectory(cfg.model, theta, r.y, r.u, cfg.mhe);
  const Vector fd = test::central_diff(
      [&](const ParamVec& t) { return stacked_x(run_trajectory(cfg.model, t, r.y, r.u, cfg.mhe)); }, theta, 0);
  CHECK(rel_error(stacked_dx(base, 0), fd) <= 1e-3);
}

TEST_CASE("total derivative matches central differences on random models with two parameters") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(400 + seed);
    const LtiModel m = test::random_model(rng, 3, 3, 2, 2);
    const ParamVec theta(0.1 * test::random_vector(rng, 2));
    const Rollout r = rollout(m, theta, 25, SafetyPolicy{1e9, 0.0}, SinusoidRanges{}.draw(3, rng), rng);
    const MheConfig cfg = unconstrained_cfg(4);
    const MheTrajectory base = run_trajectory(m, theta, r.y, r.u, cfg);
    for (std::size_t j = 0; j < 2; ++j) {
      const Vector fd = test::central_diff(
          [&](const ParamVec& t) { return stacked_x(run_trajectory(m, t, r.y, r.u, cfg)); }, theta,
          static_cast<Index>(j));
      CHECK(rel_error(stacked_dx(base, j), fd) <= 1e-5);
    }
  }
}

TEST_CASE("smoothed prior mode: derivative still matches central differences") {
  const RunConfig cfg = test::factory_config();
  MheConfig mc = cfg.mhe;
  mc.prior_mode = PriorMode::kSmoothed;
  const Rollout r = simulate_sample(cfg.model, cfg.plant, 30, 29);
  const MheTrajectory base = run_trajectory(cfg.model, ParamVec{0.005}, r.y, r.u, mc);
  const Vector fd = test::central_diff(
      [&](const ParamVec& t) { return stacked_x(run_trajectory(cfg.model, t, r.y, r.u, mc)); }, ParamVec{0.005}, 0);
  CHECK(rel_error(stacked_dx(base, 0), fd) <= 1e-3);
}

TEST_CASE("cooling model with constraints: every estimate respects the temperature cap over 400 steps") {
  const RunConfig cfg = test::factory_config();
  const Rollout r = simulate_sample(cfg.model, cfg.plant, 400, 31);
  for (const ParamVec& theta : {ParamVec{0.001}, ParamVec{0.01}}) {
    const MheTrajectory t = run_trajectory(cfg.model, theta, r.y, r.u, cfg.mhe);
    double worst = -INFINITY;
    for (const auto& s : t.steps) {
      worst = std::max(worst, s.x_hat.maxCoeff());
      CHECK(s.V_star >= 0.0);
    }
    CHECK(worst <= 105.0 + 1e-7);
  }
}

TEST_CASE("estimator is a deterministic mapping") {
  const RunConfig cfg = test::factory_config();
  const Rollout r = simulate_sample(cfg.model, cfg.plant, 30, 37);
  const MheTrajectory a = run_trajectory(cfg.model, ParamVec{0.01}, r.y, r.u, cfg.mhe);
  const MheTrajectory b = run_trajectory(cfg.model, ParamVec{0.01}, r.y, r.u, cfg.mhe);
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    CHECK(a.steps[k].x_hat == b.steps[k].x_hat);
    CHECK(a.steps[k].dx_hat[0] == b.steps[k].dx_hat[0]);
    CHECK(a.steps[k].V_star == b.steps[k].V_star);
  }
}

TEST_CASE("infeasible window is relaxed by widening the noise sets") {
  LtiModel m;
  m.n = m.m = m.p = 1;
  m.q = 1;
  m.A = AffineMatrixFamily(Matrix::Constant(1, 1, 0.5), {Matrix::Identity(1, 1)});
  m.B = AffineMatrixFamily(Matrix::Constant(1, 1, 1.0), {Matrix::Zero(1, 1)});
  m.C = AffineMatrixFamily(Matrix::Constant(1, 1, 1.0), {Matrix::Zero(1, 1)});
  m.Q = Matrix::Constant(1, 1, 0.01);
  m.R = Matrix::Constant(1, 1, 0.01);
  m.x0_prior = TruncatedGaussian("x0", Vector::Zero(1), Matrix::Identity(1, 1), Polytope::unconstrained(1));
  m.W = Polytope::box(1, 0.1);
  m.V = Polytope::box(1, 0.1);
  m.X = Polytope::unconstrained(1);
  MheConfig cfg;
  cfg.horizon = 2;
  cfg.enable_noise_constraints = true;
  MovingHorizonEstimator est(m, ParamVec{0.0}, cfg);
  est.step(Vector::Constant(1, 0.0), std::nullopt);
  // y jumps far beyond what W and V allow
  const MheStepResult r = est.step(Vector::Constant(1, 3.0), Vector::Constant(1, 0.0));
  CHECK(r.relaxed);
  CHECK(r.noise_scale > 1.0);
  for (const Vector& v : r.v_hats) CHECK(std::abs(v(0)) <= 0.1 * r.noise_scale + 1e-7);
}

TEST_CASE("step requires the previous input after the first measurement") {
  const RunConfig cfg = test::factory_config();
  MovingHorizonEstimator est(cfg.model, ParamVec{0.001}, cfg.mhe);
  est.step(Vector::Constant(2, 100.0), std::nullopt);
  CHECK_THROWS_AS(est.step(Vector::Constant(2, 100.0), std::nullopt), UsageError);
  MheConfig zero;
  zero.horizon = 0;
  CHECK_THROWS_AS(zero.validate(), ConfigError);
}
