#include "lbmhe/gradcheck.hpp"

#include <functional>

#include "lbmhe/errors.hpp"
#include "lbmhe/estimator.hpp"
#include "lbmhe/kf.hpp"
#include "lbmhe/learner.hpp"
#include "lbmhe/linalg.hpp"
#include "lbmhe/simulator.hpp"

namespace lbmhe {

namespace {

ParamVec shifted(const ParamVec& theta, Index j, double by) {
  Vector v = theta.values();
  v(j) += by;
  return ParamVec(v);
}

/// Largest relative error over θ directions of analytic vs central differences.
double worst_error(const ParamVec& theta, double delta, const std::function<Vector(const ParamVec&)>& f,
                   const std::vector<Vector>& analytic) {
  double worst = 0.0;
  for (Index j = 0; j < theta.size(); ++j) {
    const Vector fd = (f(shifted(theta, j, delta)) - f(shifted(theta, j, -delta))) / (2.0 * delta);
    worst = std::max(worst, rel_error(analytic[static_cast<std::size_t>(j)], fd));
  }
  return worst;
}

Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Vector stack(const VectorList& parts) {
  Index len = 0;
  for (const Vector& v : parts) len += v.size();
  Vector out(len);
  Index at = 0;
  for (const Vector& v : parts) {
    out.segment(at, v.size()) = v;
    at += v.size();
  }
  return out;
}

RiccatiResult riccati_from_prior(const LtiModel& model, const ParamVec& theta, int steps) {
  RiccatiResult r{model.x0_prior.cov(),
                  MatrixList(static_cast<std::size_t>(model.q), Matrix::Zero(model.n, model.n))};
  for (int i = 0; i < steps; ++i) r = riccati_step_with_sens(r.P, r.dP, model, theta);
  return r;
}

}  // namespace

std::vector<GradcheckRow> run_gradcheck(const RunConfig& cfg, const GradcheckConfig& gc) {
  if (!(gc.delta > 0.0)) throw ConfigError("gradcheck: delta must be positive");
  const LtiModel& model = cfg.model;
  const ParamVec theta = cfg.learner.theta0;
  const double h = gc.delta;
  std::vector<GradcheckRow> rows;
  auto add = [&](std::string name, double err, bool kernel) {
    rows.push_back(GradcheckRow{std::move(name), err, kernel ? gc.kernel_tol : gc.end_to_end_tol, kernel});
  };

  // inv_sqrtm along the direction of dP after a few Riccati steps
  {
    const RiccatiResult base = riccati_from_prior(model, theta, gc.riccati_steps);
    const SqrtmResult root = inv_sqrtm_with_sens(base.P, base.dP);
    double worst = 0.0;
    for (std::size_t j = 0; j < base.dP.size(); ++j) {
      const Matrix fd = (inv_sqrtm(base.P + h * base.dP[j]) - inv_sqrtm(base.P - h * base.dP[j])) / (2.0 * h);
      worst = std::max(worst, rel_error(root.sensitivities[j], fd));
    }
    add("inv_sqrtm", worst, true);
  }

  {
    const RiccatiResult base = riccati_from_prior(model, theta, gc.riccati_steps);
    std::vector<Vector> analytic;
    for (const Matrix& d : base.dP) analytic.push_back(flatten(d));
    add("riccati", worst_error(theta, h, [&](const ParamVec& t) {
          return flatten(riccati_from_prior(model, t, gc.riccati_steps).P);
        }, analytic), true);
  }

  const Rollout data = simulate_sample(model, cfg.plant, gc.pipeline_steps, Rng::derive(cfg.seed(), {3}));

  // partial derivative of one window solution with the prior held fixed
  {
    MovingHorizonEstimator est(model, theta, cfg.mhe);
    for (std::size_t k = 0; k < data.y.size(); ++k) {
      std::optional<Vector> u;
      if (k > 0) u = data.u[k - 1];
      est.step(data.y[k], u);
    }
    const MheWindow window = est.last_window();
    const SensitivityState& sens = est.sensitivity_state();
    const MheQp built = build_qp(window, theta, sens, model, cfg.mhe, DerivativeMode::kPartial);
    const QpSolution sol = solve(built.qp, cfg.mhe.solver);
    if (sol.status != QpStatus::kOptimal) throw NumericalError("gradcheck: window QP not solved");
    const QpSolutionSens ds = differentiate(built.qp, sol, built.sens, cfg.mhe.diff);
    add("qp_diff", worst_error(theta, h, [&](const ParamVec& t) {
          const MheQp b = build_qp(window, t, sens, model, cfg.mhe, DerivativeMode::kPartial);
          return solve(b.qp, cfg.mhe.solver).z;
        }, ds.dz), true);
  }

  auto trajectory_check = [&](EstimatorKind kind) {
    const EstimateTrace trace = run_estimator(kind, model, theta, data.y, data.u, cfg.mhe);
    std::vector<Vector> analytic;
    for (Index j = 0; j < model.q; ++j) {
      VectorList parts;
      for (const EstimatePoint& p : trace.points) parts.push_back(p.dx_hat[static_cast<std::size_t>(j)]);
      analytic.push_back(stack(parts));
    }
    return worst_error(theta, h, [&](const ParamVec& t) {
      VectorList parts;
      for (const EstimatePoint& p : run_estimator(kind, model, t, data.y, data.u, cfg.mhe).points) {
        parts.push_back(p.x_hat);
      }
      return stack(parts);
    }, analytic);
  };
  add("kf", trajectory_check(EstimatorKind::kKf), true);
  add("mhe_pipeline", trajectory_check(EstimatorKind::kMhe), false);

  {
    LearnerConfig lc = cfg.learner;
    lc.n_T = gc.loss_steps;
    const SampleLoss base = sample_loss_and_grad(theta, model, cfg.plant, lc, cfg.mhe, 1);
    add("epoch_loss", worst_error(theta, h, [&](const ParamVec& t) {
          return Vector::Constant(1, sample_loss_and_grad(t, model, cfg.plant, lc, cfg.mhe, 1).J);
        }, [&] {
          std::vector<Vector> g;
          for (Index j = 0; j < model.q; ++j) g.push_back(Vector::Constant(1, base.grad(j)));
          return g;
        }()), false);
  }
  return rows;
}

}  // namespace lbmhe
