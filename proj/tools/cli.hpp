#pragma once

// Subcommands of the proxobs tool. Each returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "proxobs/proxobs.hpp"

namespace proxobs::cli {

using nlohmann::json;

enum ExitCode { kOk = 0, kRuntime = 1, kUsage = 2 };

/// Value rounded to 12 significant digits so JSON output is diff-stable.
inline double r12(double v) { return std::stod(format_number(v)); }

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(r12(v(i)));
  return a;
}

/// Writes through a temporary file so a failed run leaves nothing behind.
class AtomicOutput {
 public:
  explicit AtomicOutput(std::string path) : path_(std::move(path)), tmp_(path_ + ".partial") {}
  ~AtomicOutput() {
    if (!committed_) {
      std::error_code ec;
      stream_.close();
      std::filesystem::remove(tmp_, ec);
    }
  }
  std::ostream& open() {
    stream_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!stream_) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path_ + "'");
    return stream_;
  }
  void commit() {
    stream_.close();
    if (!stream_) throw Error(ErrorCode::InvalidArgument, "failed writing '" + path_ + "'");
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::string path_, tmp_;
  std::ofstream stream_;
  bool committed_ = false;
};

struct ProxArgs {
  std::string loss;
  std::optional<double> alpha, lambda, gamma, mu, eps;
  std::vector<double> x, a;
  double b = 0.0;
};

inline int cmd_prox(const ProxArgs& args, std::ostream& out, std::ostream& err) {
  LossSpec spec;
  AffineForm form;
  Vector x;
  try {
    spec.kind = loss_kind_from_string(args.loss);
    spec.alpha = args.alpha;
    spec.lambda = args.lambda;
    spec.gamma = args.gamma;
    spec.mu = args.mu;
    spec.epsilon = args.eps;
    if (spec.kind != LossKind::Lasso && !spec.alpha) spec.alpha = 1.0;
    spec.validate();
    x = Eigen::Map<const Vector>(args.x.data(), static_cast<Eigen::Index>(args.x.size()));
    form.a = Eigen::Map<const Vector>(args.a.data(), static_cast<Eigen::Index>(args.a.size()));
    form.b = args.b;
    require_dims(x.size() > 0 && x.size() == form.a.size(), "--x and --a must have the same nonzero length");
    require(form.a.squaredNorm() > 0.0, ErrorCode::ZeroDirection, "--a must be nonzero");
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  try {
    const ProxResult cf = prox(x, form, spec);
    const ProxResult num = prox_oracle_1d(x, form, spec);
    const double gap = std::abs(prox_objective(x, form, spec, cf.z_star, cf.phi_star) -
                                prox_objective(x, form, spec, num.z_star, num.phi_star));
    out << "z =";
    for (Eigen::Index i = 0; i < cf.z_star.size(); ++i) out << ' ' << format_number(cf.z_star(i));
    out << '\n';
    if (cf.phi_star) out << "phi = " << format_number(*cf.phi_star) << '\n';
    out << "oracle_objective_gap = " << format_number(gap) << '\n';
    out << "oracle_minimizer_gap = " << format_number((cf.z_star - num.z_star).norm()) << '\n';
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

struct RunArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_path;
  std::optional<std::uint64_t> seed;
  std::uint64_t realization = 0;
};

inline std::vector<std::string> with_seed(const RunArgs& args) {
  auto o = args.overrides;
  if (args.seed) o.push_back("seed=" + std::to_string(*args.seed));
  return o;
}

inline int cmd_experiment(const RunArgs& args, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = config::build_experiment(config::load(config::experiment_defaults(), args.config_path, with_seed(args)));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  try {
    const auto results = run_monte_carlo(cfg);
    if (!args.output_path.empty()) {
      AtomicOutput file(args.output_path);
      write_csv(file.open(), results);
      file.commit();
    } else {
      write_csv(out, results);
    }
    // Steady-state table: one row per dwell, one column per estimator.
    std::ostream& summary = args.output_path.empty() ? err : out;
    summary << "steady-state error (mean of the last " << format_number(100 * cfg.steady_fraction)
            << "% of " << cfg.horizon << " steps, " << cfg.realizations << " realizations)\n";
    summary << "dwell";
    for (const auto& e : cfg.estimators) summary << ',' << e.name;
    summary << '\n';
    for (std::size_t d = 0; d < cfg.dwells.size(); ++d) {
      summary << cfg.dwells[d];
      for (std::size_t k = 0; k < cfg.estimators.size(); ++k)
        summary << ',' << format_number(results[d * cfg.estimators.size() + k].steady_state_error);
      summary << '\n';
    }
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

/// One realization: true states, measurements, and each estimator's error norm.
inline int cmd_simulate(const RunArgs& args, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = config::build_experiment(config::load(config::experiment_defaults(), args.config_path, with_seed(args)));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  try {
    NoiseModel noise = cfg.noise;
    noise.impulsive.dwell = cfg.dwells.front();
    const Trajectory traj = simulate(cfg.bench, noise, cfg.horizon, args.realization);
    const auto traces = run_realization(cfg, noise, args.realization);
    auto write = [&](std::ostream& os) {
      os << 't';
      for (Eigen::Index i = 0; i < traj.x.cols(); ++i) os << ",x" << i + 1;
      for (Eigen::Index i = 0; i < traj.y.cols(); ++i) os << ",y" << i + 1;
      for (const auto& e : cfg.estimators) os << ",err_" << e.name;
      os << '\n';
      for (Eigen::Index t = 0; t < traj.x.rows(); ++t) {
        os << t;
        for (Eigen::Index i = 0; i < traj.x.cols(); ++i) os << ',' << format_number(traj.x(t, i));
        for (Eigen::Index i = 0; i < traj.y.cols(); ++i) os << ',' << format_number(traj.y(t, i));
        for (const auto& tr : traces) os << ',' << format_number(tr(t));
        os << '\n';
      }
    };
    if (args.output_path.empty()) {
      write(out);
    } else {
      AtomicOutput file(args.output_path);
      write(file.open());
      file.commit();
    }
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

inline json report_json(const CertificateReport& rep) {
  json j{{"name", rep.name}, {"satisfied", rep.satisfied}, {"margin", r12(rep.margin)}};
  j["witness"] = rep.witness ? to_json(*rep.witness) : json(nullptr);
  json values = json::object();
  for (const auto& [k, v] : rep.values) values[k] = r12(v);
  j["values"] = values;
  return j;
}

/// Runs the enabled certificates; a certificate that cannot be evaluated is a runtime failure.
inline json run_checks(const json& doc) {
  const BenchmarkSystem bench = config::build_system(doc.at("system"));
  const EstimatorConfig est = config::build_estimator(doc.at("loss"));
  const SystemModel& m = bench.model;
  const Matrix V = Matrix::Identity(m.n_y, m.n_y) / est.lambda;
  const WeightingSpec wspec = config::build_weighting(doc.at("weights"));
  const WeightingPolicy policy = wspec.policy(V);
  const json& checks = doc.at("checks");
  json report{{"system", bench.name}, {"loss", std::string(to_string(est.loss.kind))}, {"certificates", json::array()}};

  if (checks.at("uco").at("enabled").get<bool>()) {
    const auto& c = checks.at("uco");
    const Grammian g = uco_grammian(m.jacobian, m.observation, c.at("t0").get<std::size_t>(), c.at("T").get<std::size_t>());
    CertificateReport rep{"uco_grammian", g.positive_definite(), std::nullopt, g.min_eigenvalue(), {}};
    const Vector eig = symmetric_eigenvalues(g.matrix);
    if (!rep.satisfied) rep.witness = Eigen::SelfAdjointEigenSolver<Matrix>(g.matrix).eigenvectors().col(0);
    json j = report_json(rep);
    j["eigenvalues"] = to_json(eig);
    j["T"] = g.horizon;
    report["certificates"].push_back(j);
  }
  if (checks.at("d_condition").at("enabled").get<bool>()) {
    const auto& c = checks.at("d_condition");
    const auto t_max = c.at("t_max").get<std::size_t>();
    const CertificateSystem sys{m.jacobian, m.observation, from_vector(weight_sequence(m, policy, t_max + 1)),
                                constant_sequence(V)};
    report["certificates"].push_back(report_json(check_D_condition(
        sys, est.loss, c.at("samples").get<int>(), c.at("radius").get<double>(), t_max, c.at("seed").get<std::uint64_t>())));
  }
  if (checks.at("information_contraction").at("enabled").get<bool>()) {
    const auto& c = checks.at("information_contraction");
    std::mt19937_64 rng(c.at("seed").get<std::uint64_t>());
    std::normal_distribution<double> N(0.0, 1.0);
    auto random = [&](int r, int k) {
      Matrix a(r, k);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < k; ++j) a(i, j) = N(rng);
      return a;
    };
    double worst = -std::numeric_limits<double>::infinity();
    const int trials = c.at("trials").get<int>();
    for (int k = 0; k < trials; ++k) {
      const Matrix Fs = random(m.n, m.n), Fq = random(m.n, m.n);
      const Matrix S = Fs * Fs.transpose() + 1e-3 * Matrix::Identity(m.n, m.n);
      const Matrix Q = Fq * Fq.transpose() + 1e-3 * Matrix::Identity(m.n, m.n);
      worst = std::max(worst, information_contraction_margin(S, Q, random(m.n, m.n)));
    }
    CertificateReport rep{"information_contraction", worst <= 1e-10, std::nullopt, worst, {{"trials", trials}}};
    report["certificates"].push_back(report_json(rep));
  }
  if (checks.at("uco_equivalence").at("enabled").get<bool>()) {
    const auto& c = checks.at("uco_equivalence");
    const auto steps = c.at("steps").get<std::size_t>(), T = c.at("T").get<std::size_t>();
    const Matrix Q = wspec.Q.size() ? wspec.Q : Matrix(c.at("q").get<double>() * Matrix::Identity(m.n, m.n));
    const Matrix R = V * V;
    std::vector<Matrix> gains;
    Matrix P = policy.initial_w_sq(m.n);
    for (std::size_t k = 0; k <= steps + T + 2; ++k) {
      gains.push_back(kalman_gain(P, m.C(k), R));
      P = symmetrize(m.A(k) * posterior_covariance(P, m.C(k), R) * m.A(k).transpose() + Q);
    }
    const MatrixSequence L = from_vector(gains);
    CertificateReport agg{"uco_equivalence", true, std::nullopt, std::numeric_limits<double>::infinity(), {}};
    for (std::size_t t0 = 0; t0 < steps; ++t0) {
      const CertificateReport rep = uco_equivalence_check(m.jacobian, m.observation, L, t0, T);
      agg.margin = std::min(agg.margin, rep.margin);
      if (!rep.satisfied && agg.satisfied) {
        agg.satisfied = false;
        agg.witness = rep.witness;
        agg.values.push_back({"first_failure_t0", static_cast<double>(t0)});
      }
    }
    agg.values.push_back({"windows", static_cast<double>(steps)});
    report["certificates"].push_back(report_json(agg));
  }
  if (checks.at("bound").at("enabled").get<bool>()) {
    const auto& c = checks.at("bound");
    const Matrix w_sq = policy.initial_w_sq(m.n);
    double cc, lam;
    json b;
    if (c.at("c").is_null() || c.at("lambda").is_null()) {
      const DecayEstimate d = estimate_decay(in_band_closed_loop(m.A(0), m.C(0), w_sq));
      cc = d.c;
      lam = d.lambda;
      b["estimated_decay"] = true;
    } else {
      cc = c.at("c").get<double>();
      lam = c.at("lambda").get<double>();
      b["estimated_decay"] = false;
    }
    const RobustnessBound rb = robustness_bound(w_sq, m.C(0), V, est.loss, cc, lam, c.at("w_max").get<double>());
    b.update({{"name", "robustness_bound"}, {"c", r12(cc)}, {"lambda", r12(lam)}, {"delta_psi", r12(rb.delta_psi)},
              {"q", r12(rb.q)}, {"R", r12(rb.R)}, {"gamma_w", r12(rb.gamma_w)}, {"total", r12(rb.total)}});
    report["certificates"].push_back(b);
  }
  return report;
}

inline int cmd_check(const RunArgs& args, std::ostream& out, std::ostream& err) {
  json doc;
  try {
    doc = config::load(config::check_defaults(), args.config_path, args.overrides);
    config::build_system(doc.at("system"));
    config::build_estimator(doc.at("loss"));
    config::build_weighting(doc.at("weights"));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  try {
    const std::string text = run_checks(doc).dump(2) + "\n";
    if (args.output_path.empty()) {
      out << text;
    } else {
      AtomicOutput file(args.output_path);
      file.open() << text;
      file.commit();
    }
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace proxobs::cli
