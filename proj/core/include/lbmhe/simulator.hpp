#pragma once

#include <vector>

#include "lbmhe/model.hpp"
#include "lbmhe/rng.hpp"
#include "lbmhe/types.hpp"

namespace lbmhe {

/// Per-machine safety switch driven by threshold sensors.
struct SafetyPolicy {
  double threshold = 103.0;  // T_th
  double u_safety = -3.0;

  /// Throws ConfigError unless threshold < bound.
  void validate(double state_bound) const;
};

/// uᵢ(k) = cᵢ + aᵢ sin(ωᵢ k + φᵢ) per input channel.
struct SinusoidSchedule {
  Vector amplitude;
  Vector frequency;
  Vector phase;
  Vector offset;

  Vector eval(Index k) const;
  Index size() const { return offset.size(); }
};

/// Uniform ranges the per-rollout sinusoid parameters are drawn from.
struct SinusoidRanges {
  double amplitude_lo = 0.5, amplitude_hi = 2.0;
  double frequency_lo = 0.05, frequency_hi = 0.3;
  double phase_lo = 0.0, phase_hi = 6.283185307179586;
  double offset_lo = -0.5, offset_hi = 0.5;

  void validate() const;
  SinusoidSchedule draw(Index m, Rng& rng) const;
};

struct PlantState {
  Vector x;
  Index k = 0;
};

/// (y_th)ᵢ = 1 iff xᵢ > threshold.
std::vector<int> threshold_sensors(const Vector& x, double threshold);

/// Channelwise u_safety where the threshold fired, the sinusoid otherwise.
Vector control_input(const std::vector<int>& y_th, const SinusoidSchedule& schedule, const SafetyPolicy& policy,
                     Index k);

/// y = C x + v with v ~ N(0, R) truncated to V; v = 0 when `noisy` is false.
Vector measure(const Vector& x, const ParamVec& theta, const LtiModel& model, Rng& rng, bool noisy = true);

struct PlantStepResult {
  PlantState state;
  Vector y;
  std::vector<int> y_th;
};

/// Advances x⁺ = A x + B u + w with w drawn from the truncated disturbance
/// distribution, then measures the new state.
PlantStepResult plant_step(const PlantState& state, const Vector& u, const ParamVec& theta,
                           const LtiModel& model, const SafetyPolicy& policy, Rng& rng, bool noisy = true);

struct Rollout {
  VectorList x;                    // x(0) … x(T)
  VectorList y;                    // y(0) … y(T)
  std::vector<std::vector<int>> y_th;  // y_th(0) … y_th(T)
  VectorList u;                    // u(0) … u(T-1)
  SinusoidSchedule schedule;
};

/// Closed-loop rollout: x(0) from the initial-state prior, then n_T
/// transitions with u(k) decided from the threshold sensors at time k.
Rollout rollout(const LtiModel& model, const ParamVec& theta, Index n_T, const SafetyPolicy& policy,
                const SinusoidSchedule& schedule, Rng& rng, bool noisy = true);

/// Everything a rollout needs besides the model and θ.
struct PlantConfig {
  SafetyPolicy policy;
  SinusoidRanges sinusoids;
  ParamVec theta_true;

  void validate(const LtiModel& model) const;
};

/// Draws the sinusoid schedule and the trajectory from one seed.
Rollout simulate_sample(const LtiModel& model, const PlantConfig& plant, Index n_T, std::uint64_t seed);

}  // namespace lbmhe
