#include <benchmark/benchmark.h>

#include "lbmhe/linalg.hpp"
#include "lbmhe/mhe.hpp"
#include "lbmhe/model_io.hpp"
#include "lbmhe/qp_solver.hpp"
#include "lbmhe/rng.hpp"
#include "lbmhe/simulator.hpp"

#ifndef LBMHE_CONFIG_DIR
#define LBMHE_CONFIG_DIR "configs"
#endif

namespace {

lbmhe::QpProblem random_qp(lbmhe::Index d, lbmhe::Index mi, lbmhe::Index me, std::uint64_t seed) {
  lbmhe::Rng rng(seed);
  auto mat = [&](lbmhe::Index r, lbmhe::Index c) {
    lbmhe::Matrix m(r, c);
    for (lbmhe::Index i = 0; i < r; ++i)
      for (lbmhe::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
  };
  const lbmhe::Matrix L = mat(d, d);
  lbmhe::QpProblem qp;
  qp.P = L * L.transpose() + lbmhe::Matrix::Identity(d, d);
  qp.f = mat(d, 1);
  qp.G = mat(mi, d);
  const lbmhe::Vector z0 = mat(d, 1);
  qp.h = qp.G * z0 + lbmhe::Vector::Constant(mi, 0.5);
  qp.E = mat(me, d);
  qp.b = qp.E * z0;
  return qp;
}

void BM_QpSolve(benchmark::State& state) {
  const auto d = static_cast<lbmhe::Index>(state.range(0));
  const lbmhe::QpProblem qp = random_qp(d, 2 * d, d / 4, 7);
  for (auto _ : state) benchmark::DoNotOptimize(lbmhe::solve(qp));
}
BENCHMARK(BM_QpSolve)->Arg(10)->Arg(40)->Arg(100);

void BM_InvSqrtm(benchmark::State& state) {
  const auto n = static_cast<lbmhe::Index>(state.range(0));
  const lbmhe::QpProblem qp = random_qp(n, 0, 0, 3);
  const lbmhe::MatrixList dP{lbmhe::Matrix::Identity(n, n)};
  for (auto _ : state) benchmark::DoNotOptimize(lbmhe::inv_sqrtm_with_sens(qp.P, dP));
}
BENCHMARK(BM_InvSqrtm)->Arg(4)->Arg(16);

void BM_MheTrajectory(benchmark::State& state) {
  const lbmhe::RunConfig cfg = lbmhe::load_run_config(LBMHE_CONFIG_DIR "/factory4.json");
  const lbmhe::Rollout data = lbmhe::simulate_sample(cfg.model, cfg.plant, state.range(0), 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lbmhe::run_trajectory(cfg.model, cfg.learner.theta0, data.y, data.u, cfg.mhe));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MheTrajectory)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
