#pragma once

#include <string>
#include <vector>

#include "lbmhe/model_io.hpp"

namespace lbmhe {

struct GradcheckConfig {
  double delta = 1e-6;
  double kernel_tol = 1e-5;
  double end_to_end_tol = 1e-3;
  int riccati_steps = 5;
  int pipeline_steps = 50;
  /// Rollout length used by the epoch-loss row.
  int loss_steps = 100;
};

struct GradcheckRow {
  std::string name;
  double rel_error = 0.0;
  double threshold = 0.0;
  bool kernel = false;
  bool pass() const { return rel_error <= threshold; }
};

/// Compares every analytic sensitivity against central finite differences
/// with common random numbers, at θ̂₀ of the run config.
std::vector<GradcheckRow> run_gradcheck(const RunConfig& cfg, const GradcheckConfig& gc);

}  // namespace lbmhe
