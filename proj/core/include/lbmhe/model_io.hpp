#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "lbmhe/estimator.hpp"
#include "lbmhe/learner.hpp"
#include "lbmhe/mhe.hpp"
#include "lbmhe/model.hpp"
#include "lbmhe/simulator.hpp"

namespace lbmhe {

/// Model from JSON. Matrices are row-major nested arrays, {"identity": s}
/// or {"diag": [...]}. A parameterized matrix is
/// {"base": M, "coeffs": [M₁, …], "scale": s} and evaluates to
/// s·(M + Σⱼ θⱼ Mⱼ). A polytope is {"H": …, "h": …}, {"box": r},
/// {"upper": c} (xᵢ ≤ c) or absent for the whole space.
///
/// Throws ConfigError with the offending key on any malformed entry.
LtiModel model_from_json(const nlohmann::json& j);
LtiModel load_model(const std::filesystem::path& path);

/// Everything the command-line tool reads from one config file.
struct RunConfig {
  LtiModel model;
  PlantConfig plant;
  MheConfig mhe;
  LearnerConfig learner;
  int instances = 1;
  std::filesystem::path output_dir = "results";
  std::filesystem::path source;
  nlohmann::json raw;

  std::uint64_t seed() const { return learner.seed; }
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const ParamVec& theta);

}  // namespace lbmhe
