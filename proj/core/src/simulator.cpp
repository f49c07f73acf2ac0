#include "lbmhe/simulator.hpp"

#include <cmath>

#include "lbmhe/errors.hpp"

namespace lbmhe {

void SafetyPolicy::validate(double state_bound) const {
  if (!(threshold < state_bound)) {
    throw ConfigError("safety threshold " + std::to_string(threshold) + " must lie below the state bound " +
                      std::to_string(state_bound));
  }
}

Vector SinusoidSchedule::eval(Index k) const {
  const double t = static_cast<double>(k);
  return offset.array() + amplitude.array() * (frequency.array() * t + phase.array()).sin();
}

void SinusoidRanges::validate() const {
  if (amplitude_lo > amplitude_hi || frequency_lo > frequency_hi || phase_lo > phase_hi || offset_lo > offset_hi) {
    throw ConfigError("sinusoid ranges need lo ≤ hi");
  }
}

SinusoidSchedule SinusoidRanges::draw(Index m, Rng& rng) const {
  SinusoidSchedule s;
  s.amplitude.resize(m);
  s.frequency.resize(m);
  s.phase.resize(m);
  s.offset.resize(m);
  for (Index i = 0; i < m; ++i) {
    s.amplitude(i) = rng.uniform(amplitude_lo, amplitude_hi);
    s.frequency(i) = rng.uniform(frequency_lo, frequency_hi);
    s.phase(i) = rng.uniform(phase_lo, phase_hi);
    s.offset(i) = rng.uniform(offset_lo, offset_hi);
  }
  return s;
}

std::vector<int> threshold_sensors(const Vector& x, double threshold) {
  std::vector<int> out(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(i)] = x(i) > threshold ? 1 : 0;
  return out;
}

Vector control_input(const std::vector<int>& y_th, const SinusoidSchedule& schedule, const SafetyPolicy& policy,
                     Index k) {
  if (static_cast<Index>(y_th.size()) != schedule.size()) {
    throw UsageError("control: threshold vector and schedule differ in size");
  }
  Vector u = schedule.eval(k);
  for (std::size_t i = 0; i < y_th.size(); ++i) {
    if (y_th[i] != 0) u(static_cast<Index>(i)) = policy.u_safety;
  }
  return u;
}

Vector measure(const Vector& x, const ParamVec& theta, const LtiModel& model, Rng& rng, bool noisy) {
  Vector y = model.C.eval(theta) * x;
  if (noisy) y += sample_truncated_gaussian(model.noise(), rng);
  return y;
}

PlantStepResult plant_step(const PlantState& state, const Vector& u, const ParamVec& theta,
                           const LtiModel& model, const SafetyPolicy& policy, Rng& rng, bool noisy) {
  if (u.size() != model.m) throw UsageError("plant: input has wrong dimension");
  PlantStepResult out;
  out.state.x = model.A.eval(theta) * state.x + model.B.eval(theta) * u;
  if (noisy) out.state.x += sample_truncated_gaussian(model.disturbance(), rng);
  out.state.k = state.k + 1;
  out.y = measure(out.state.x, theta, model, rng, noisy);
  out.y_th = threshold_sensors(out.state.x, policy.threshold);
  return out;
}

Rollout rollout(const LtiModel& model, const ParamVec& theta, Index n_T, const SafetyPolicy& policy,
                const SinusoidSchedule& schedule, Rng& rng, bool noisy) {
  if (n_T < 1) throw UsageError("rollout: n_T must be ≥ 1");
  if (schedule.size() != model.m) throw UsageError("rollout: schedule has wrong number of channels");
  Rollout r;
  r.schedule = schedule;
  const auto len = static_cast<std::size_t>(n_T);
  r.x.reserve(len + 1);
  r.y.reserve(len + 1);
  r.y_th.reserve(len + 1);
  r.u.reserve(len);

  PlantState s;
  s.x = noisy ? sample_truncated_gaussian(model.x0_prior, rng) : model.x0_prior.mean();
  r.x.push_back(s.x);
  r.y.push_back(measure(s.x, theta, model, rng, noisy));
  r.y_th.push_back(threshold_sensors(s.x, policy.threshold));
  for (Index k = 0; k < n_T; ++k) {
    Vector u = control_input(r.y_th.back(), schedule, policy, k);
    PlantStepResult next = plant_step(s, u, theta, model, policy, rng, noisy);
    r.u.push_back(std::move(u));
    s = next.state;
    r.x.push_back(std::move(next.state.x));
    r.y.push_back(std::move(next.y));
    r.y_th.push_back(std::move(next.y_th));
  }
  return r;
}

void PlantConfig::validate(const LtiModel& model) const {
  sinusoids.validate();
  if (theta_true.size() != model.q) throw ConfigError("plant: true θ length does not match model");
  // single-sided upper bounds eᵢᵀx ≤ c give the bound to compare T_th against
  for (Index r = 0; r < model.X.num_rows(); ++r) {
    const auto row = model.X.H().row(r);
    if ((row.array() >= 0.0).all() && row.sum() == 1.0 && row.maxCoeff() == 1.0) {
      policy.validate(model.X.h()(r));
    }
  }
}

Rollout simulate_sample(const LtiModel& model, const PlantConfig& plant, Index n_T, std::uint64_t seed) {
  Rng rng(seed);
  const SinusoidSchedule schedule = plant.sinusoids.draw(model.m, rng);
  return rollout(model, plant.theta_true, n_T, plant.policy, schedule, rng);
}

}  // namespace lbmhe
