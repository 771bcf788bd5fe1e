#pragma once

// JSON configuration for the CLI. A user file is merged over the defaults
// below; keys absent from the defaults are rejected, and --set overrides may
// only touch keys that exist after the merge.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "proxobs/proxobs.hpp"

namespace proxobs::config {

using nlohmann::json;

/// Raised for anything that makes the configuration unusable (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json system_defaults() {
  return {{"type", "linear_example"}, {"A", nullptr}, {"B", nullptr}, {"C", nullptr},
          {"x0", nullptr},            {"spectral_radius", nullptr}};
}

inline json weights_defaults() { return {{"kind", "identity"}, {"W0", nullptr}, {"Q", nullptr}}; }

inline json experiment_defaults() {
  return {
      {"system", system_defaults()},
      {"estimators", nullptr},
      {"weights", weights_defaults()},
      {"noise",
       {{"process_bound", 0.0},
        {"measurement_bound", 0.0},
        {"impulsive", {{"enabled", true}, {"std", 10.0}, {"dwell", 5}, {"rate", 1.0}}}}},
      {"horizon", 500},
      {"realizations", 100},
      {"dwells", {5}},
      {"seed", 1},
      {"x_init", nullptr},
      {"update", {{"mode", "componentwise"}, {"order", nullptr}, {"tol", 1e-10}}},
      {"detection", {{"enabled", false}, {"epsilon0", 0.01}, {"corrector_q", 1e-3}, {"corrector_r", 1e-2}}},
      {"steady_fraction", 0.1},
      {"threads", 1},
  };
}

inline json check_defaults() {
  return {
      {"system", system_defaults()},
      {"weights", weights_defaults()},
      {"loss", {{"loss", "absolute"}, {"lambda", 0.1}, {"alpha", nullptr}, {"gamma", nullptr}, {"mu", nullptr},
                {"epsilon", nullptr}}},
      {"checks",
       {{"uco", {{"enabled", true}, {"t0", 0}, {"T", 2}}},
        {"d_condition", {{"enabled", true}, {"samples", 64}, {"radius", 1.0}, {"t_max", 1}, {"seed", 0}}},
        {"information_contraction", {{"enabled", true}, {"trials", 100}, {"seed", 0}}},
        {"uco_equivalence", {{"enabled", true}, {"steps", 50}, {"T", 2}, {"q", 1e-3}}},
        {"bound", {{"enabled", false}, {"c", nullptr}, {"lambda", nullptr}, {"w_max", 0.0}}}}},
  };
}

/// Every key of `user` must exist in `defaults` wherever the default is an object.
inline void check_keys(const json& user, const json& defaults, const std::string& path) {
  if (!defaults.is_object()) return;
  if (!user.is_object()) throw ConfigError("'" + path + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    check_keys(it.value(), defaults.at(it.key()), key);
  }
}

inline json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

/// key=value with a dotted key; the key must already exist.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) throw ConfigError("override references unknown key '" + key + "'");
    node = &(*node)[part];
  }
  *node = parse_value(assignment.substr(eq + 1));
}

/// Defaults, merged with the file (if any), then the overrides.
inline json load(const json& defaults, const std::string& path, const std::vector<std::string>& overrides) {
  json doc = defaults;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError("config '" + path + "' is empty");
    json user;
    try {
      user = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("config '" + path + "': " + e.what());
    }
    check_keys(user, defaults, "");
    doc.merge_patch(user);
    // merge_patch drops keys set to null; put the defaults back.
    json filled = defaults;
    filled.update(doc, true);
    doc = filled;
  }
  for (const auto& o : overrides) apply_override(doc, o);
  check_keys(doc, defaults, "");
  return doc;
}

inline Matrix to_matrix(const json& j, const std::string& what) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a non-empty array");
  if (!j.front().is_array()) {
    Matrix m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    return m;
  }
  const std::size_t cols = j.front().size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ConfigError(what + " rows have different lengths");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  }
  return m;
}

inline Vector to_vector(const json& j, const std::string& what) {
  const Matrix m = to_matrix(j, what);
  if (m.cols() != 1) throw ConfigError(what + " must be a flat list");
  return m.col(0);
}

/// A scalar b means b on every channel.
inline Vector to_bounds(const json& j, int n, const std::string& what) {
  if (j.is_number()) {
    const double b = j.get<double>();
    return b == 0.0 ? Vector() : Vector::Constant(n, b);
  }
  return to_vector(j, what);
}

inline BenchmarkSystem build_system(const json& s) {
  const std::string type = s.at("type").get<std::string>();
  BenchmarkSystem bench;
  if (type == "linear_example") {
    bench = linear_example();
  } else if (type == "nonlinear_example") {
    bench = nonlinear_example();
  } else if (type == "linear") {
    if (s.at("A").is_null() || s.at("C").is_null()) throw ConfigError("linear system needs A and C");
    const Matrix A = to_matrix(s.at("A"), "system.A");
    const Matrix C = to_matrix(s.at("C"), "system.C");
    const Matrix B = s.at("B").is_null() ? Matrix() : to_matrix(s.at("B"), "system.B");
    bench.name = "linear";
    bench.B = B;
    bench.model = make_linear(A, B, C);
    bench.x0 = Vector::Zero(A.rows());
  } else {
    throw ConfigError("unknown system type '" + type + "'");
  }
  if (!s.at("x0").is_null()) bench.x0 = to_vector(s.at("x0"), "system.x0");
  if (bench.x0.size() != bench.model.n) throw ConfigError("system.x0 has the wrong dimension");
  if (!s.at("spectral_radius").is_null()) bench = with_spectral_radius(bench, s.at("spectral_radius").get<double>());
  return bench;
}

inline WeightingSpec build_weighting(const json& w) {
  WeightingSpec spec;
  const std::string kind = w.at("kind").get<std::string>();
  if (kind == "identity")
    spec.kind = WeightingPolicy::Kind::Identity;
  else if (kind == "fixed")
    spec.kind = WeightingPolicy::Kind::FixedSPD;
  else if (kind == "kalman")
    spec.kind = WeightingPolicy::Kind::KalmanRecursion;
  else
    throw ConfigError("unknown weights.kind '" + kind + "'");
  if (!w.at("W0").is_null()) spec.W0 = to_matrix(w.at("W0"), "weights.W0");
  if (!w.at("Q").is_null()) spec.Q = to_matrix(w.at("Q"), "weights.Q");
  if (spec.kind == WeightingPolicy::Kind::FixedSPD && spec.W0.size() == 0) throw ConfigError("fixed weights need W0");
  if (spec.kind == WeightingPolicy::Kind::KalmanRecursion && spec.Q.size() == 0) throw ConfigError("kalman weights need Q");
  return spec;
}

inline std::optional<double> opt_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

/// {"loss": kind, "lambda": V^{-1} weight, plus the loss's own parameters}; the loss is unit-scale unless alpha is given.
inline EstimatorConfig build_estimator(const json& e) {
  static const char* allowed[] = {"name", "loss", "lambda", "alpha", "gamma", "mu", "epsilon"};
  for (auto it = e.begin(); it != e.end(); ++it)
    if (std::find(std::begin(allowed), std::end(allowed), it.key()) == std::end(allowed))
      throw ConfigError("unknown estimator key '" + it.key() + "'");
  EstimatorConfig est;
  const std::string kind_name = e.at("loss").get<std::string>();
  LossSpec spec;
  spec.kind = loss_kind_from_string(kind_name);
  if (spec.kind == LossKind::Lasso) {
    spec.lambda = 1.0;
    spec.gamma = opt_number(e, "gamma");
  } else {
    spec.alpha = opt_number(e, "alpha").value_or(1.0);
    if (spec.kind == LossKind::Huber || spec.kind == LossKind::AbsLog) spec.mu = opt_number(e, "mu");
    if (spec.kind == LossKind::Vapnik) spec.epsilon = opt_number(e, "epsilon");
  }
  spec.validate();
  est.loss = spec;
  est.lambda = opt_number(e, "lambda").value_or(1.0);
  est.name = e.contains("name") ? e.at("name").get<std::string>() : std::string(to_string(spec.kind));
  return est;
}

inline UpdateMode build_mode(const json& u) {
  const std::string mode = u.at("mode").get<std::string>();
  UpdateMode m;
  if (mode == "componentwise")
    m = UpdateMode::componentwise();
  else if (mode == "full")
    m = UpdateMode::full_numeric(u.at("tol").get<double>());
  else
    throw ConfigError("unknown update.mode '" + mode + "'");
  if (!u.at("order").is_null()) m.sensor_order = u.at("order").get<std::vector<int>>();
  return m;
}

inline ExperimentConfig build_experiment(const json& doc) {
  try {
    ExperimentConfig cfg;
    cfg.bench = build_system(doc.at("system"));
    const int n = cfg.bench.model.n, n_y = cfg.bench.model.n_y;
    if (!doc.at("estimators").is_null()) {
      cfg.estimators.clear();
      for (const auto& e : doc.at("estimators")) cfg.estimators.push_back(build_estimator(e));
    }
    cfg.weighting = build_weighting(doc.at("weights"));
    const json& nz = doc.at("noise");
    cfg.noise.process_bound = to_bounds(nz.at("process_bound"), n, "noise.process_bound");
    cfg.noise.measurement_bound = to_bounds(nz.at("measurement_bound"), n_y, "noise.measurement_bound");
    const json& imp = nz.at("impulsive");
    cfg.noise.impulsive = {imp.at("enabled").get<bool>(), imp.at("std").get<double>(), imp.at("dwell").get<int>(),
                           imp.at("rate").get<double>()};
    cfg.noise.seed = doc.at("seed").get<std::uint64_t>();
    cfg.horizon = doc.at("horizon").get<int>();
    cfg.realizations = doc.at("realizations").get<int>();
    cfg.dwells = doc.at("dwells").get<std::vector<int>>();
    if (!doc.at("x_init").is_null()) cfg.x_init = to_vector(doc.at("x_init"), "x_init");
    cfg.mode = build_mode(doc.at("update"));
    const json& det = doc.at("detection");
    cfg.detection = {det.at("enabled").get<bool>(), det.at("epsilon0").get<double>(),
                     det.at("corrector_q").get<double>(), det.at("corrector_r").get<double>()};
    cfg.steady_fraction = doc.at("steady_fraction").get<double>();
    cfg.threads = doc.at("threads").get<int>();
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace proxobs::config
