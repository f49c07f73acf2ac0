#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lbmhe/estimator.hpp"
#include "lbmhe/mhe.hpp"
#include "lbmhe/model.hpp"
#include "lbmhe/simulator.hpp"

namespace lbmhe {

struct LearnerConfig {
  int n_S = 2;  // rollouts per epoch
  int n_T = 100;  // steps per rollout
  int epochs = 5;
  double gamma = 0.0;  // weight of the disturbance term in the loss
  double alpha0 = 1e-4;
  ParamBox box;
  EstimatorKind estimator = EstimatorKind::kMhe;
  std::uint64_t seed = 0;
  ParamVec theta0;
  int n_val = 2;
  double stop_tol = 1e-9;
  int max_consecutive_failures = 3;
  /// Draw the same training rollouts in every epoch instead of fresh ones.
  bool common_samples = false;

  void validate(Index q) const;
};

struct SampleLoss {
  double J = 0.0;
  Vector grad;
  std::vector<double> per_sample;
  bool degenerate = false;
  bool relaxed = false;
  int failures = 0;  // rollouts re-drawn after an estimator failure
};

/// Per-rollout loss Σₖ ‖y(k) - C(θ̂)x̂(k)‖² + γ‖ŵ(k-1)‖² over k = 1 … n_T and
/// its gradient, assembled from the estimator's state and disturbance
/// sensitivities.
SampleLoss trace_loss(const Rollout& data, const EstimateTrace& trace, const ParamVec& theta,
                      const LtiModel& model, double gamma);

/// Sampled loss of one epoch over n_S rollouts, each from its own sub-seed.
/// A rollout whose estimator fails is re-drawn with the next sub-seed; more
/// than max_consecutive_failures in a row raise NumericalError.
SampleLoss sample_loss_and_grad(const ParamVec& theta, const LtiModel& model, const PlantConfig& plant,
                                const LearnerConfig& cfg, const MheConfig& mhe_cfg, int epoch);

/// Step size α₀/t, t ≥ 1.
double learning_rate(double alpha0, int t);

/// Π_Θ(θ - α₀/t · grad). Throws NumericalError on a non-finite gradient.
ParamVec sgd_update(const ParamVec& theta, const Vector& grad, int t, const LearnerConfig& cfg);

/// Mean over n_val fresh rollouts of the mean state error ‖x(k) - x̂(k)‖₂.
double validation_loss(const ParamVec& theta, const LtiModel& model, const PlantConfig& plant,
                       const LearnerConfig& cfg, const MheConfig& mhe_cfg, int epoch);

struct EpochRecord {
  int t = 0;
  ParamVec theta;       // θ̂ₜ, where the loss was sampled
  ParamVec theta_next;  // θ̂ₜ₊₁ after the update
  double J_hat = 0.0;
  double J_val = 0.0;  // at θ̂ₜ₊₁
  Vector grad;
  double alpha = 0.0;
  bool degenerate = false;
  bool relaxed = false;
  int failures = 0;
};

struct LearningResult {
  std::vector<EpochRecord> records;
  ParamVec theta_final;
  bool converged = false;  // stopped on ‖Δθ̂‖∞ < stop_tol
  std::string error;        // non-empty if an epoch failed
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Projected SGD over cfg.epochs epochs. Stops early when the update moves
/// θ̂ by less than stop_tol. An epoch error ends the run; records of the
/// completed epochs are kept and the message is stored in `error`.
LearningResult run_learning(const LtiModel& model, const PlantConfig& plant, const LearnerConfig& cfg,
                            const MheConfig& mhe_cfg, const EpochCallback& on_epoch = {});

/// Sub-seed streams used by the learner.
std::uint64_t training_seed(const LearnerConfig& cfg, int epoch, int sample, int attempt);
std::uint64_t validation_seed(const LearnerConfig& cfg, int epoch, int sample);

}  // namespace lbmhe
