#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>

#include "commands.hpp"
#include "lbmhe/errors.hpp"
#include "lbmhe/logging.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace mhe_cli;
  CLI::App app{"Learning-based moving horizon estimation"};
  app.set_version_flag("--version", std::string(lbmhe::build_version()));
  app.require_subcommand(1);

  GlobalOptions global;
  std::uint64_t seed = 0;
  std::string out;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides the config)");
  app.add_option("--jobs", global.jobs, "Parallel learning instances")->check(CLI::PositiveNumber);

  LearnOptions learn;
  auto* learn_cmd = app.add_subcommand("learn", "Run projected-SGD learning experiments");
  learn_cmd->add_option("config", learn.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  learn_cmd->add_flag("--gnuplot", learn.gnuplot, "Also write a gnuplot script for the aggregate");

  EstimateOptions est;
  auto* est_cmd = app.add_subcommand("estimate", "One rollout with true and estimated states");
  est_cmd->add_option("config", est.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  est_cmd->add_option("--theta", est.theta, "Parameter estimate (default: learner θ̂₀)");
  est_cmd->add_option("--estimator", est.estimator, "mhe or kf")->check(CLI::IsMember({"mhe", "kf"}));
  est_cmd->add_option("--steps", est.steps, "Rollout length (default: learner n_T)")->check(CLI::PositiveNumber);
  est_cmd->add_option("--sample", est.sample, "Rollout index under the master seed")->check(CLI::NonNegativeNumber);

  GradcheckOptions gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic sensitivities with finite differences");
  gc_cmd->add_option("config", gc.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  gc_cmd->add_option("--delta", gc.delta, "Central-difference step")->check(CLI::PositiveNumber);

  QpSolveOptions qp;
  auto* qp_cmd = app.add_subcommand("qp-solve", "Solve a dense QP given as JSON {P, f, G, h, E, b}");
  qp_cmd->add_option("problem", qp.problem, "QP file (JSON)")->required()->check(CLI::ExistingFile);

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Closed-loop plant rollout");
  sim_cmd->add_option("config", sim.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--theta", sim.theta, "Plant parameter (default: plant θ)");
  sim_cmd->add_option("--steps", sim.steps, "Rollout length (default: learner n_T)")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--sample", sim.sample, "Rollout index under the master seed")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (*seed_opt) global.seed = seed;
  if (*out_opt) global.out = out;

  try {
    lbmhe::init_logging_from_env();
    if (*learn_cmd) return cmd_learn(global, learn);
    if (*est_cmd) return cmd_estimate(global, est);
    if (*gc_cmd) return cmd_gradcheck(global, gc);
    if (*qp_cmd) return cmd_qp_solve(global, qp);
    if (*sim_cmd) return cmd_simulate(global, sim);
  } catch (const lbmhe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const lbmhe::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
