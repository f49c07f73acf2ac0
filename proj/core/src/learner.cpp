#include "lbmhe/learner.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

#include "lbmhe/errors.hpp"

namespace lbmhe {

namespace {

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

constexpr std::uint64_t kTrainingStream = 1;
constexpr std::uint64_t kValidationStream = 2;

std::string theta_str(const ParamVec& theta) {
  std::string s;
  for (Index j = 0; j < theta.size(); ++j) {
    if (j > 0) s += ", ";
    s += fmt::format("{:.6g}", theta[j]);
  }
  return s;
}

}  // namespace

void LearnerConfig::validate(Index q) const {
  if (n_S < 1) throw ConfigError("learner: n_S must be ≥ 1");
  if (n_T < 1) throw ConfigError("learner: n_T must be ≥ 1");
  if (epochs < 0) throw ConfigError("learner: epochs must be ≥ 0");
  if (!(gamma >= 0.0)) throw ConfigError("learner: γ must be ≥ 0");
  if (!(alpha0 > 0.0)) throw ConfigError("learner: α₀ must be > 0");
  if (n_val < 1) throw ConfigError("learner: n_val must be ≥ 1");
  if (max_consecutive_failures < 0) throw ConfigError("learner: max_consecutive_failures must be ≥ 0");
  if (box.size() != q) throw ConfigError("learner: parameter box has wrong dimension");
  if (theta0.size() != q) throw ConfigError("learner: θ̂₀ has wrong dimension");
  if (!box.contains(theta0)) throw ConfigError("learner: θ̂₀ lies outside the parameter box");
}

std::uint64_t training_seed(const LearnerConfig& cfg, int epoch, int sample, int attempt) {
  const auto e = static_cast<std::uint64_t>(cfg.common_samples ? 0 : epoch);
  return Rng::derive(cfg.seed, {kTrainingStream, e, static_cast<std::uint64_t>(sample),
                                static_cast<std::uint64_t>(attempt)});
}

std::uint64_t validation_seed(const LearnerConfig& cfg, int epoch, int sample) {
  return Rng::derive(cfg.seed,
                     {kValidationStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(sample)});
}

SampleLoss trace_loss(const Rollout& data, const EstimateTrace& trace, const ParamVec& theta,
                      const LtiModel& model, double gamma) {
  const Index q = model.q;
  const Matrix C = model.C.eval(theta);
  CompensatedSum J;
  std::vector<CompensatedSum> g(static_cast<std::size_t>(q));
  for (std::size_t k = 1; k < trace.points.size(); ++k) {
    const EstimatePoint& pt = trace.points[k];
    const Vector r = C * pt.x_hat - data.y[k];
    J.add(r.squaredNorm());
    if (gamma > 0.0 && pt.has_w) J.add(gamma * pt.w_hat.squaredNorm());
    for (Index j = 0; j < q; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      double d = 2.0 * r.dot(model.C.partial(j) * pt.x_hat + C * pt.dx_hat[jj]);
      if (gamma > 0.0 && pt.has_w) d += 2.0 * gamma * pt.w_hat.dot(pt.dw_hat[jj]);
      g[jj].add(d);
    }
  }
  SampleLoss out;
  out.J = J.value();
  out.grad = Vector(q);
  for (Index j = 0; j < q; ++j) out.grad(j) = g[static_cast<std::size_t>(j)].value();
  out.per_sample.push_back(out.J);
  out.degenerate = trace.any_degenerate();
  out.relaxed = trace.any_relaxed();
  return out;
}

SampleLoss sample_loss_and_grad(const ParamVec& theta, const LtiModel& model, const PlantConfig& plant,
                                const LearnerConfig& cfg, const MheConfig& mhe_cfg, int epoch) {
  const Index q = model.q;
  CompensatedSum J;
  std::vector<CompensatedSum> g(static_cast<std::size_t>(q));
  SampleLoss out;
  int attempt = 0;
  int consecutive = 0;
  for (int s = 0; s < cfg.n_S; ++s) {
    while (true) {
      const std::uint64_t seed = training_seed(cfg, epoch, s, attempt);
      try {
        const Rollout data = simulate_sample(model, plant, cfg.n_T, seed);
        const EstimateTrace trace = run_estimator(cfg.estimator, model, theta, data.y, data.u, mhe_cfg);
        const SampleLoss one = trace_loss(data, trace, theta, model, cfg.gamma);
        J.add(one.J);
        for (Index j = 0; j < q; ++j) g[static_cast<std::size_t>(j)].add(one.grad(j));
        out.per_sample.push_back(one.J);
        out.degenerate = out.degenerate || one.degenerate;
        out.relaxed = out.relaxed || one.relaxed;
        consecutive = 0;
        break;
      } catch (const NumericalError& e) {
        spdlog::warn("learner: epoch {} sample {} seed {} failed: {}", epoch, s, seed, e.what());
      } catch (const SamplingError& e) {
        spdlog::warn("learner: epoch {} sample {} seed {} failed: {}", epoch, s, seed, e.what());
      }
      ++attempt;
      ++out.failures;
      if (++consecutive > cfg.max_consecutive_failures) {
        throw NumericalError("learner: " + std::to_string(consecutive) +
                             " consecutive rollout failures in epoch " + std::to_string(epoch));
      }
    }
  }
  out.J = J.value();
  out.grad = Vector(q);
  for (Index j = 0; j < q; ++j) out.grad(j) = g[static_cast<std::size_t>(j)].value();
  return out;
}

double learning_rate(double alpha0, int t) {
  if (t < 1) throw UsageError("learning rate: epoch counter starts at 1");
  return alpha0 / static_cast<double>(t);
}

ParamVec sgd_update(const ParamVec& theta, const Vector& grad, int t, const LearnerConfig& cfg) {
  if (!grad.allFinite()) throw NumericalError("sgd: non-finite gradient at epoch " + std::to_string(t));
  if (grad.size() != theta.size()) throw UsageError("sgd: gradient has wrong dimension");
  return cfg.box.project(theta.values() - learning_rate(cfg.alpha0, t) * grad);
}

double validation_loss(const ParamVec& theta, const LtiModel& model, const PlantConfig& plant,
                       const LearnerConfig& cfg, const MheConfig& mhe_cfg, int epoch) {
  CompensatedSum total;
  for (int s = 0; s < cfg.n_val; ++s) {
    const Rollout data = simulate_sample(model, plant, cfg.n_T, validation_seed(cfg, epoch, s));
    const EstimateTrace trace = run_estimator(cfg.estimator, model, theta, data.y, data.u, mhe_cfg);
    total.add(mean_state_error(data.x, trace));
  }
  return total.value() / static_cast<double>(cfg.n_val);
}

LearningResult run_learning(const LtiModel& model, const PlantConfig& plant, const LearnerConfig& cfg,
                            const MheConfig& mhe_cfg, const EpochCallback& on_epoch) {
  cfg.validate(model.q);
  plant.validate(model);
  mhe_cfg.validate();
  LearningResult result;
  ParamVec theta = cfg.theta0;
  for (int t = 1; t <= cfg.epochs; ++t) {
    try {
      const SampleLoss loss = sample_loss_and_grad(theta, model, plant, cfg, mhe_cfg, t);
      EpochRecord rec;
      rec.t = t;
      rec.theta = theta;
      rec.theta_next = sgd_update(theta, loss.grad, t, cfg);
      rec.J_hat = loss.J;
      rec.grad = loss.grad;
      rec.alpha = learning_rate(cfg.alpha0, t);
      rec.degenerate = loss.degenerate;
      rec.relaxed = loss.relaxed;
      rec.failures = loss.failures;
      rec.J_val = validation_loss(rec.theta_next, model, plant, cfg, mhe_cfg, t);
      spdlog::info("epoch {}: θ̂ = [{}] → [{}], Ĵ = {:.6g}, J_val = {:.6g}", t, theta_str(rec.theta),
                   theta_str(rec.theta_next), rec.J_hat, rec.J_val);
      const double step =
          theta.size() == 0 ? 0.0 : (rec.theta_next.values() - theta.values()).cwiseAbs().maxCoeff();
      theta = rec.theta_next;
      result.records.push_back(rec);
      if (on_epoch) on_epoch(rec);
      if (step < cfg.stop_tol) {
        result.converged = true;
        break;
      }
    } catch (const Error& e) {
      result.error = e.what();
      spdlog::error("learning stopped in epoch {}: {}", t, e.what());
      break;
    }
  }
  result.theta_final = theta;
  return result;
}

}  // namespace lbmhe
