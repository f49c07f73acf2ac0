#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mhe_cli {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int jobs = 1;
};

struct LearnOptions {
  std::string config;
  bool gnuplot = false;
};

struct EstimateOptions {
  std::string config;
  std::vector<double> theta;
  std::string estimator = "mhe";
  std::optional<int> steps;
  int sample = 0;
};

struct GradcheckOptions {
  std::string config;
  double delta = 1e-6;
};

struct QpSolveOptions {
  std::string problem;
};

struct SimulateOptions {
  std::string config;
  std::vector<double> theta;
  std::optional<int> steps;
  int sample = 0;
};

// Each returns the process exit code: 0 success, 1 runtime or threshold
// failure. Configuration errors propagate as lbmhe::ConfigError.
int cmd_learn(const GlobalOptions& g, const LearnOptions& o);
int cmd_estimate(const GlobalOptions& g, const EstimateOptions& o);
int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& o);
int cmd_qp_solve(const GlobalOptions& g, const QpSolveOptions& o);
int cmd_simulate(const GlobalOptions& g, const SimulateOptions& o);

}  // namespace mhe_cli
