#include "lbmhe/model_io.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "lbmhe/errors.hpp"

namespace lbmhe {

using nlohmann::json;

namespace {

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : j.items()) {
    if (allowed.count(item.key()) == 0) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

Vector vector_from(const json& j, const std::string& where) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], where);
  return v;
}

Matrix matrix_from(const json& j, Index rows, Index cols, const std::string& where) {
  if (j.is_object()) {
    if (j.contains("identity")) {
      allow_keys(j, where, {"identity"});
      if (rows != cols) throw ConfigError(where + ": identity needs a square shape");
      return number(j.at("identity"), where) * Matrix::Identity(rows, cols);
    }
    if (j.contains("diag")) {
      allow_keys(j, where, {"diag"});
      const Vector d = vector_from(j.at("diag"), where);
      if (rows != cols || d.size() != rows) throw ConfigError(where + ": diag has wrong length");
      return d.asDiagonal();
    }
    throw ConfigError(where + ": expected a nested array, {identity} or {diag}");
  }
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    throw ConfigError(where + ": expected " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ConfigError(where + ": row " + std::to_string(r) + " needs " + std::to_string(cols) + " entries");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], where);
  }
  return m;
}

AffineMatrixFamily family_from(const json& j, Index rows, Index cols, Index q, const std::string& where) {
  if (!j.is_object() || !j.contains("base")) {
    return AffineMatrixFamily::constant(matrix_from(j, rows, cols, where), q);
  }
  allow_keys(j, where, {"base", "coeffs", "scale"});
  const double scale = j.contains("scale") ? number(j.at("scale"), where + ".scale") : 1.0;
  Matrix base = scale * matrix_from(j.at("base"), rows, cols, where + ".base");
  MatrixList coeffs;
  if (j.contains("coeffs")) {
    const json& cj = j.at("coeffs");
    if (!cj.is_array() || static_cast<Index>(cj.size()) != q) {
      throw ConfigError(where + ".coeffs: expected " + std::to_string(q) + " matrices");
    }
    for (std::size_t i = 0; i < cj.size(); ++i) {
      coeffs.push_back(scale * matrix_from(cj[i], rows, cols, where + ".coeffs[" + std::to_string(i) + "]"));
    }
  } else {
    coeffs.assign(static_cast<std::size_t>(q), Matrix::Zero(rows, cols));
  }
  return AffineMatrixFamily(std::move(base), std::move(coeffs));
}

Polytope polytope_from(const json& parent, const std::string& key, Index dim, const std::string& where) {
  if (!parent.contains(key) || parent.at(key).is_null()) return Polytope::unconstrained(dim);
  const json& j = parent.at(key);
  const std::string w = where + "." + key;
  if (j.contains("box")) {
    allow_keys(j, w, {"box"});
    return Polytope::box(dim, number(j.at("box"), w + ".box"));
  }
  if (j.contains("upper")) {
    allow_keys(j, w, {"upper"});
    return Polytope(Matrix::Identity(dim, dim), Vector::Constant(dim, number(j.at("upper"), w + ".upper")));
  }
  allow_keys(j, w, {"H", "h"});
  const Vector h = vector_from(require(j, "h", w), w + ".h");
  return Polytope(matrix_from(require(j, "H", w), h.size(), dim, w + ".H"), h);
}

Index dimension(const json& j, const char* key) {
  const json& v = require(j, key, "model");
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(std::string("model.") + key + ": expected a non-negative integer");
  }
  return static_cast<Index>(v.get<long long>());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::pair<double, double> range_from(const json& j, const std::string& key, std::pair<double, double> fallback,
                                     const std::string& where) {
  if (!j.contains(key)) return fallback;
  const Vector v = vector_from(j.at(key), where + "." + key);
  if (v.size() != 2) throw ConfigError(where + "." + key + ": expected [lo, hi]");
  return {v(0), v(1)};
}

PriorMode prior_from(const std::string& name) {
  if (name == "predicted") return PriorMode::kPredicted;
  if (name == "smoothed") return PriorMode::kSmoothed;
  throw ConfigError("mhe.prior: expected 'predicted' or 'smoothed', got '" + name + "'");
}

}  // namespace

LtiModel model_from_json(const json& j) {
  allow_keys(j, "model", {"name", "n", "m", "p", "q", "A", "B", "C", "Q", "R", "x0", "W", "V", "X"});
  LtiModel m;
  m.n = dimension(j, "n");
  m.m = dimension(j, "m");
  m.p = dimension(j, "p");
  m.q = dimension(j, "q");
  m.A = family_from(require(j, "A", "model"), m.n, m.n, m.q, "model.A");
  m.B = family_from(require(j, "B", "model"), m.n, m.m, m.q, "model.B");
  m.C = family_from(require(j, "C", "model"), m.p, m.n, m.q, "model.C");
  m.Q = matrix_from(require(j, "Q", "model"), m.n, m.n, "model.Q");
  m.R = matrix_from(require(j, "R", "model"), m.p, m.p, "model.R");
  const json& x0 = require(j, "x0", "model");
  allow_keys(x0, "model.x0", {"mean", "cov", "support"});
  Vector mean = vector_from(require(x0, "mean", "model.x0"), "model.x0.mean");
  if (mean.size() != m.n) throw ConfigError("model.x0.mean: expected " + std::to_string(m.n) + " entries");
  m.x0_prior = TruncatedGaussian("x0", std::move(mean), matrix_from(require(x0, "cov", "model.x0"), m.n, m.n, "model.x0.cov"),
                                 polytope_from(x0, "support", m.n, "model.x0"));
  m.W = polytope_from(j, "W", m.n, "model");
  m.V = polytope_from(j, "V", m.p, "model");
  m.X = polytope_from(j, "X", m.n, "model");
  m.validate();
  return m;
}

LtiModel load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  allow_keys(j, "config", {"model", "plant", "mhe", "learner", "estimator", "instances", "seed", "output_dir"});
  RunConfig cfg;
  cfg.raw = j;
  const json& mj = require(j, "model", "config");
  if (mj.is_string()) {
    std::filesystem::path p = mj.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    cfg.model = load_model(p);
  } else {
    cfg.model = model_from_json(mj);
  }
  const Index q = cfg.model.q;

  const json plant = j.value("plant", json::object());
  allow_keys(plant, "plant", {"theta_true", "threshold", "u_safety", "sinusoids"});
  cfg.plant.theta_true = ParamVec(vector_from(require(plant, "theta_true", "plant"), "plant.theta_true"));
  cfg.plant.policy.threshold = get_or(plant, "threshold", cfg.plant.policy.threshold, "plant");
  cfg.plant.policy.u_safety = get_or(plant, "u_safety", cfg.plant.policy.u_safety, "plant");
  const json sj = plant.value("sinusoids", json::object());
  allow_keys(sj, "plant.sinusoids", {"amplitude", "frequency", "phase", "offset"});
  SinusoidRanges& sr = cfg.plant.sinusoids;
  std::tie(sr.amplitude_lo, sr.amplitude_hi) =
      range_from(sj, "amplitude", {sr.amplitude_lo, sr.amplitude_hi}, "plant.sinusoids");
  std::tie(sr.frequency_lo, sr.frequency_hi) =
      range_from(sj, "frequency", {sr.frequency_lo, sr.frequency_hi}, "plant.sinusoids");
  std::tie(sr.phase_lo, sr.phase_hi) = range_from(sj, "phase", {sr.phase_lo, sr.phase_hi}, "plant.sinusoids");
  std::tie(sr.offset_lo, sr.offset_hi) = range_from(sj, "offset", {sr.offset_lo, sr.offset_hi}, "plant.sinusoids");

  const json mhe = j.value("mhe", json::object());
  allow_keys(mhe, "mhe", {"horizon", "state_constraints", "disturbance_constraints", "noise_constraints", "prior",
                          "feas_tol", "max_relaxations", "solver", "activity_threshold"});
  MheConfig& mc = cfg.mhe;
  mc.horizon = get_or(mhe, "horizon", mc.horizon, "mhe");
  mc.enable_state_constraints = get_or(mhe, "state_constraints", mc.enable_state_constraints, "mhe");
  mc.enable_disturbance_constraints = get_or(mhe, "disturbance_constraints", mc.enable_disturbance_constraints, "mhe");
  mc.enable_noise_constraints = get_or(mhe, "noise_constraints", mc.enable_noise_constraints, "mhe");
  mc.prior_mode = prior_from(get_or<std::string>(mhe, "prior", "predicted", "mhe"));
  mc.feas_tol = get_or(mhe, "feas_tol", mc.feas_tol, "mhe");
  mc.max_relaxations = get_or(mhe, "max_relaxations", mc.max_relaxations, "mhe");
  mc.diff.activity_threshold = get_or(mhe, "activity_threshold", mc.diff.activity_threshold, "mhe");
  const json solver = mhe.value("solver", json::object());
  allow_keys(solver, "mhe.solver", {"max_iter", "tol", "polish"});
  mc.solver.max_iter = get_or(solver, "max_iter", mc.solver.max_iter, "mhe.solver");
  mc.solver.tol = get_or(solver, "tol", mc.solver.tol, "mhe.solver");
  mc.solver.polish = get_or(solver, "polish", mc.solver.polish, "mhe.solver");
  mc.validate();

  const json lj = j.value("learner", json::object());
  allow_keys(lj, "learner", {"n_S", "n_T", "epochs", "gamma", "alpha0", "theta0", "box", "n_val", "stop_tol",
                             "max_consecutive_failures", "common_samples"});
  LearnerConfig& lc = cfg.learner;
  lc.n_S = get_or(lj, "n_S", lc.n_S, "learner");
  lc.n_T = get_or(lj, "n_T", lc.n_T, "learner");
  lc.epochs = get_or(lj, "epochs", lc.epochs, "learner");
  lc.gamma = get_or(lj, "gamma", lc.gamma, "learner");
  lc.alpha0 = get_or(lj, "alpha0", lc.alpha0, "learner");
  lc.n_val = get_or(lj, "n_val", lc.n_val, "learner");
  lc.stop_tol = get_or(lj, "stop_tol", lc.stop_tol, "learner");
  lc.max_consecutive_failures = get_or(lj, "max_consecutive_failures", lc.max_consecutive_failures, "learner");
  lc.common_samples = get_or(lj, "common_samples", lc.common_samples, "learner");
  lc.theta0 = lj.contains("theta0") ? ParamVec(vector_from(lj.at("theta0"), "learner.theta0")) : cfg.plant.theta_true;
  if (lj.contains("box")) {
    const json& bj = lj.at("box");
    allow_keys(bj, "learner.box", {"lower", "upper"});
    lc.box = ParamBox(vector_from(require(bj, "lower", "learner.box"), "learner.box.lower"),
                      vector_from(require(bj, "upper", "learner.box"), "learner.box.upper"));
  } else {
    lc.box = ParamBox(Vector::Constant(q, -1e300), Vector::Constant(q, 1e300));
  }
  lc.estimator = parse_estimator(get_or<std::string>(j, "estimator", "mhe", "config"));
  lc.seed = get_or<std::uint64_t>(j, "seed", 0, "config");
  lc.validate(q);

  cfg.instances = get_or(j, "instances", 1, "config");
  if (cfg.instances < 1) throw ConfigError("config.instances must be ≥ 1");
  cfg.output_dir = get_or<std::string>(j, "output_dir", "results", "config");
  cfg.plant.validate(cfg.model);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg = run_config_from_json(read_json(path), path.parent_path());
  cfg.source = path;
  return cfg;
}

json to_json(const ParamVec& theta) {
  json a = json::array();
  for (Index j = 0; j < theta.size(); ++j) a.push_back(theta[j]);
  return a;
}

}  // namespace lbmhe
