#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "lbmhe/csv.hpp"
#include "lbmhe/errors.hpp"
#include "lbmhe/estimator.hpp"
#include "lbmhe/gradcheck.hpp"
#include "lbmhe/learner.hpp"
#include "lbmhe/logging.hpp"
#include "lbmhe/model_io.hpp"
#include "lbmhe/qp_solver.hpp"
#include "lbmhe/simulator.hpp"

namespace mhe_cli {

using lbmhe::format_double;
using lbmhe::Index;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

lbmhe::RunConfig load(const GlobalOptions& g, const std::string& path) {
  lbmhe::RunConfig cfg = lbmhe::load_run_config(path);
  if (g.seed) cfg.learner.seed = *g.seed;
  if (g.out) cfg.output_dir = *g.out;
  return cfg;
}

std::vector<std::string> indexed(const std::string& prefix, Index count) {
  std::vector<std::string> names;
  for (Index i = 1; i <= count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

void append(std::vector<std::string>& to, const std::vector<std::string>& more) {
  to.insert(to.end(), more.begin(), more.end());
}

void append_values(std::vector<std::string>& to, const lbmhe::Vector& v) {
  for (Index i = 0; i < v.size(); ++i) to.push_back(format_double(v(i)));
}

lbmhe::ParamVec theta_or(const std::vector<double>& given, const lbmhe::ParamVec& fallback, Index q) {
  if (given.empty()) return fallback;
  if (static_cast<Index>(given.size()) != q) {
    throw lbmhe::UsageError("--theta needs " + std::to_string(q) + " values");
  }
  return lbmhe::ParamVec(lbmhe::Vector::Map(given.data(), q));
}

std::string flags_of(const lbmhe::EpochRecord& r) {
  std::string f;
  if (r.degenerate) f += "degenerate;";
  if (r.relaxed) f += "relaxed;";
  if (r.failures > 0) f += "redrawn=" + std::to_string(r.failures) + ";";
  if (!f.empty()) f.pop_back();
  return f;
}

/// Seed of the rollout used by `estimate` and `simulate`.
std::uint64_t rollout_seed(std::uint64_t master, int sample) {
  return lbmhe::Rng::derive(master, {4, static_cast<std::uint64_t>(sample)});
}

struct Band {
  double median = 0.0, min = 0.0, max = 0.0;
};

Band band_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  Band b;
  b.min = v.front();
  b.max = v.back();
  b.median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return b;
}

void write_gnuplot(const fs::path& dir, Index q) {
  std::ofstream gp(dir / "plot.gp");
  gp << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set terminal pngcairo size 900,900\n"
     << "set output 'learning.png'\n"
     << "set multiplot layout 3,1\n"
     << "set xlabel 'epoch'\n";
  gp << "plot 'aggregate.csv' using 1:3:4 with filledcurves fs transparent solid 0.3 title 'theta1 min-max', "
        "'' using 1:2 with linespoints title 'theta1 median'\n";
  const int jh = 2 + 3 * static_cast<int>(q);
  gp << "plot 'aggregate.csv' using 1:" << jh + 1 << ":" << jh + 2
     << " with filledcurves fs transparent solid 0.3 title 'J_hat min-max', '' using 1:" << jh
     << " with linespoints title 'J_hat median'\n";
  const int jv = jh + 3;
  gp << "plot 'aggregate.csv' using 1:" << jv + 1 << ":" << jv + 2
     << " with filledcurves fs transparent solid 0.3 title 'J_val min-max', '' using 1:" << jv
     << " with linespoints title 'J_val median'\n"
     << "unset multiplot\n";
}

}  // namespace

int cmd_learn(const GlobalOptions& g, const LearnOptions& o) {
  const lbmhe::RunConfig cfg = load(g, o.config);
  const Index q = cfg.model.q;
  const std::string run_id = fs::path(o.config).stem().string() + "-s" + std::to_string(cfg.seed());
  const fs::path dir = cfg.output_dir / run_id;
  fs::create_directories(dir);

  const int n = cfg.instances;
  std::vector<lbmhe::LearningResult> results(static_cast<std::size_t>(n));
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) seeds[static_cast<std::size_t>(i)] = lbmhe::Rng::derive(cfg.seed(), {static_cast<std::uint64_t>(i)});

  std::vector<std::string> header{"t"};
  append(header, indexed("theta", q));
  append(header, indexed("theta_next", q));
  append(header, {"J_hat", "J_val", "alpha"});
  append(header, indexed("grad", q));
  header.push_back("flags");

  std::mutex failure_mutex;
  std::string first_failure;

  auto run_instance = [&](int i) {
    const auto ii = static_cast<std::size_t>(i);
    lbmhe::LearnerConfig lc = cfg.learner;
    lc.seed = seeds[ii];
    const fs::path inst_dir = dir / ("instance-" + std::to_string(i));
    lbmhe::CsvWriter csv(inst_dir / "epochs.csv", lc.seed, header);
    try {
      results[ii] = lbmhe::run_learning(cfg.model, cfg.plant, lc, cfg.mhe, [&](const lbmhe::EpochRecord& r) {
        std::vector<std::string> row{std::to_string(r.t)};
        append_values(row, r.theta.values());
        append_values(row, r.theta_next.values());
        append(row, {format_double(r.J_hat), format_double(r.J_val), format_double(r.alpha)});
        append_values(row, r.grad);
        row.push_back(flags_of(r));
        csv.row(row);
        csv.flush();
      });
    } catch (const lbmhe::Error& e) {
      results[ii].error = e.what();
    }
    const lbmhe::LearningResult& res = results[ii];
    json meta{{"git", lbmhe::build_version()},
              {"config_path", o.config},
              {"config", cfg.raw},
              {"master_seed", cfg.seed()},
              {"instance", i},
              {"instance_seed", lc.seed},
              {"epochs_completed", res.records.size()},
              {"theta_final", res.records.empty() ? lbmhe::to_json(lc.theta0) : lbmhe::to_json(res.theta_final)},
              {"converged", res.converged},
              {"error", res.error}};
    std::ofstream(inst_dir / "run.json") << meta.dump(2) << '\n';
    if (!res.error.empty()) {
      std::lock_guard lock(failure_mutex);
      if (first_failure.empty()) first_failure = "instance " + std::to_string(i) + ": " + res.error;
    }
  };

  const int jobs = std::max(1, std::min(g.jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) run_instance(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (int i = next++; i < n; i = next++) run_instance(i);
      });
    }
  }

  std::vector<std::string> agg_header{"t"};
  for (Index j = 1; j <= q; ++j) {
    const std::string b = "theta" + std::to_string(j);
    append(agg_header, {b + "_median", b + "_min", b + "_max"});
  }
  append(agg_header, {"J_hat_median", "J_hat_min", "J_hat_max", "J_val_median", "J_val_min", "J_val_max", "instances"});
  lbmhe::CsvWriter agg(dir / "aggregate.csv", cfg.seed(), agg_header);
  std::size_t max_epochs = 0;
  for (const auto& r : results) max_epochs = std::max(max_epochs, r.records.size());
  for (std::size_t t = 0; t < max_epochs; ++t) {
    std::vector<std::vector<double>> theta(static_cast<std::size_t>(q));
    std::vector<double> jh, jv;
    for (const auto& r : results) {
      if (t >= r.records.size()) continue;
      const lbmhe::EpochRecord& rec = r.records[t];
      for (Index j = 0; j < q; ++j) theta[static_cast<std::size_t>(j)].push_back(rec.theta_next[j]);
      jh.push_back(rec.J_hat);
      jv.push_back(rec.J_val);
    }
    std::vector<std::string> row{std::to_string(t + 1)};
    for (const auto& col : theta) {
      const Band b = band_of(col);
      append(row, {format_double(b.median), format_double(b.min), format_double(b.max)});
    }
    for (const auto& col : {jh, jv}) {
      const Band b = band_of(col);
      append(row, {format_double(b.median), format_double(b.min), format_double(b.max)});
    }
    row.push_back(std::to_string(jh.size()));
    agg.row(row);
  }
  agg.flush();
  if (o.gnuplot) write_gnuplot(dir, q);

  std::cout << "results: " << dir.string() << '\n';
  if (!first_failure.empty()) {
    std::cerr << "learning failed: " << first_failure << '\n';
    return 1;
  }
  return 0;
}

int cmd_estimate(const GlobalOptions& g, const EstimateOptions& o) {
  const lbmhe::RunConfig cfg = load(g, o.config);
  const Index n = cfg.model.n;
  const Index p = cfg.model.p;
  const Index m = cfg.model.m;
  const lbmhe::ParamVec theta = theta_or(o.theta, cfg.learner.theta0, cfg.model.q);
  const lbmhe::EstimatorKind kind = lbmhe::parse_estimator(o.estimator);
  const int steps = o.steps.value_or(cfg.learner.n_T);
  const std::uint64_t seed = rollout_seed(cfg.seed(), o.sample);
  const lbmhe::Rollout data = lbmhe::simulate_sample(cfg.model, cfg.plant, steps, seed);
  const lbmhe::EstimateTrace trace = lbmhe::run_estimator(kind, cfg.model, theta, data.y, data.u, cfg.mhe);

  std::vector<std::string> header{"k"};
  append(header, indexed("x", n));
  append(header, indexed("x_hat", n));
  append(header, indexed("y", p));
  append(header, indexed("u", m));
  append(header, {"V_star", "flags"});
  const fs::path path = cfg.output_dir / ("estimate-" + o.estimator + "-sample" + std::to_string(o.sample) + ".csv");
  lbmhe::CsvWriter csv(path, cfg.seed(), header);
  for (std::size_t k = 0; k < trace.points.size(); ++k) {
    const lbmhe::EstimatePoint& pt = trace.points[k];
    std::vector<std::string> row{std::to_string(k)};
    append_values(row, data.x[k]);
    append_values(row, pt.x_hat);
    append_values(row, data.y[k]);
    if (k < data.u.size()) {
      append_values(row, data.u[k]);
    } else {
      row.insert(row.end(), static_cast<std::size_t>(m), "");
    }
    row.push_back(format_double(pt.V_star));
    std::string flags;
    if (pt.degenerate) flags += "degenerate;";
    if (pt.weak_activity) flags += "weak;";
    if (pt.relaxed) flags += "relaxed;";
    if (!flags.empty()) flags.pop_back();
    row.push_back(flags);
    csv.row(row);
  }
  std::cout << "estimator=" << o.estimator << " J_val=" << format_double(lbmhe::mean_state_error(data.x, trace))
            << " csv=" << path.string() << '\n';
  return 0;
}

int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& o) {
  const lbmhe::RunConfig cfg = load(g, o.config);
  lbmhe::GradcheckConfig gc;
  gc.delta = o.delta;
  const auto rows = lbmhe::run_gradcheck(cfg, gc);
  std::vector<std::string> failed;
  std::printf("%-14s %-12s %-10s %s\n", "component", "rel_error", "threshold", "result");
  for (const auto& r : rows) {
    std::printf("%-14s %-12.3e %-10.0e %s\n", r.name.c_str(), r.rel_error, r.threshold, r.pass() ? "pass" : "FAIL");
    if (!r.pass()) failed.push_back(r.name);
  }
  if (!failed.empty()) {
    std::string names;
    for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
    std::cerr << "gradcheck failed: " << names << '\n';
    return 1;
  }
  return 0;
}

namespace {

lbmhe::Matrix matrix_of(const json& j, const std::string& key, Index cols) {
  if (!j.contains(key)) return lbmhe::Matrix(0, cols);
  const json& a = j.at(key);
  if (!a.is_array()) throw lbmhe::ConfigError(key + ": expected a nested array");
  lbmhe::Matrix m(static_cast<Index>(a.size()), cols);
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (!a[r].is_array() || static_cast<Index>(a[r].size()) != cols) {
      throw lbmhe::ConfigError(key + ": row " + std::to_string(r) + " needs " + std::to_string(cols) + " entries");
    }
    for (Index c = 0; c < cols; ++c) m(static_cast<Index>(r), c) = a[r][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

lbmhe::Vector vector_of(const json& j, const std::string& key) {
  if (!j.contains(key)) return lbmhe::Vector(0);
  const auto v = j.at(key).get<std::vector<double>>();
  return lbmhe::Vector::Map(v.data(), static_cast<Index>(v.size()));
}

json to_json(const lbmhe::Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

int cmd_qp_solve(const GlobalOptions&, const QpSolveOptions& o) {
  std::ifstream in(o.problem);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw lbmhe::ConfigError(o.problem + ": " + e.what());
  }
  lbmhe::QpProblem qp;
  try {
    const lbmhe::Vector f = vector_of(j, "f");
    const Index d = f.size();
    qp.P = matrix_of(j, "P", d);
    qp.f = f;
    qp.G = matrix_of(j, "G", d);
    qp.h = vector_of(j, "h");
    qp.E = matrix_of(j, "E", d);
    qp.b = vector_of(j, "b");
  } catch (const json::exception& e) {
    throw lbmhe::ConfigError(o.problem + ": " + e.what());
  }
  const lbmhe::QpSolution sol = lbmhe::solve(qp);
  json out{{"status", lbmhe::to_string(sol.status)},
           {"z", to_json(sol.z)},
           {"lambda", to_json(sol.lambda)},
           {"nu", to_json(sol.nu)},
           {"objective", sol.z.size() == qp.dim() ? qp.objective(sol.z) : 0.0},
           {"iterations", sol.iterations},
           {"kkt_residual", sol.kkt_residual}};
  std::cout << out.dump(2) << '\n';
  return sol.status == lbmhe::QpStatus::kOptimal ? 0 : 1;
}

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& o) {
  const lbmhe::RunConfig cfg = load(g, o.config);
  lbmhe::PlantConfig plant = cfg.plant;
  plant.theta_true = theta_or(o.theta, cfg.plant.theta_true, cfg.model.q);
  const int steps = o.steps.value_or(cfg.learner.n_T);
  const lbmhe::Rollout data = lbmhe::simulate_sample(cfg.model, plant, steps, rollout_seed(cfg.seed(), o.sample));

  const Index n = cfg.model.n;
  const Index m = cfg.model.m;
  std::vector<std::string> header{"k"};
  append(header, indexed("x", n));
  append(header, indexed("y", cfg.model.p));
  append(header, indexed("y_th", n));
  append(header, indexed("u", m));
  const fs::path path = cfg.output_dir / ("simulate-sample" + std::to_string(o.sample) + ".csv");
  lbmhe::CsvWriter csv(path, cfg.seed(), header);
  for (std::size_t k = 0; k < data.x.size(); ++k) {
    std::vector<std::string> row{std::to_string(k)};
    append_values(row, data.x[k]);
    append_values(row, data.y[k]);
    for (int v : data.y_th[k]) row.push_back(std::to_string(v));
    if (k < data.u.size()) {
      append_values(row, data.u[k]);
    } else {
      row.insert(row.end(), static_cast<std::size_t>(m), "");
    }
    csv.row(row);
  }
  std::cout << "csv=" << path.string() << '\n';
  return 0;
}

}  // namespace mhe_cli
