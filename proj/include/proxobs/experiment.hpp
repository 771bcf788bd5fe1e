#pragma once

// Monte-Carlo runner: every estimator sees the same noise realizations, and
// traces are averaged in realization order so results do not depend on the
// number of threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "proxobs/benchmarks.hpp"
#include "proxobs/errors.hpp"
#include "proxobs/noise.hpp"
#include "proxobs/observer.hpp"
#include "proxobs/simulation.hpp"
#include "proxobs/weighting.hpp"

namespace proxobs {

/// One observer of the comparison: a unit-scale loss and V^{-1} = lambda I.
struct EstimatorConfig {
  std::string name;
  LossSpec loss;
  double lambda = 1.0;
};

/// The five robust estimators used in the benchmark comparison (W = I).
inline std::vector<EstimatorConfig> reference_estimators() {
  return {{"lasso", LossSpec::lasso(1.0, 0.1), 2.0},
          {"absolute", LossSpec::absolute(1.0), 0.1},
          {"abslog", LossSpec::abslog(1.0, 1000.0), 0.1},
          {"huber", LossSpec::huber(1.0, 0.08), 0.1},
          {"vapnik", LossSpec::vapnik(1.0, 0.07), 0.1}};
}

struct WeightingSpec {
  WeightingPolicy::Kind kind = WeightingPolicy::Kind::Identity;
  Matrix W0;  // FixedSPD / KalmanRecursion; empty means identity
  Matrix Q;   // KalmanRecursion

  WeightingPolicy policy(const Matrix& V) const {
    WeightingPolicy p{kind, W0, constant_sequence(V), {}};
    if (kind == WeightingPolicy::Kind::KalmanRecursion) {
      require(Q.size() > 0, ErrorCode::InvalidArgument, "Kalman weighting needs Q");
      p.Q = constant_sequence(Q);
    }
    return p;
  }
};

struct ExperimentConfig {
  BenchmarkSystem bench = linear_example();
  std::vector<EstimatorConfig> estimators = reference_estimators();
  WeightingSpec weighting;
  NoiseModel noise;
  int horizon = 500;
  int realizations = 100;
  std::vector<int> dwells{5};
  Vector x_init;  // empty: zero
  UpdateMode mode;
  DetectionOptions detection;
  double steady_fraction = 0.1;
  int threads = 1;
  bool keep_realizations = false;

  void validate() const {
    require(horizon >= 1, ErrorCode::InvalidArgument, "horizon must be >= 1");
    require(realizations >= 1, ErrorCode::InvalidArgument, "realizations must be >= 1");
    require(!estimators.empty(), ErrorCode::InvalidArgument, "no estimators configured");
    require(!dwells.empty(), ErrorCode::InvalidArgument, "no dwell values configured");
    for (int d : dwells) require(d >= 1, ErrorCode::InvalidArgument, "dwell must be >= 1");
    require(steady_fraction > 0.0 && steady_fraction <= 1.0, ErrorCode::InvalidArgument,
            "steady_fraction must be in (0, 1]");
    require(threads >= 0, ErrorCode::InvalidArgument, "threads must be >= 0");
    require_dims(x_init.size() == 0 || x_init.size() == bench.model.n, "x_init dimension");
    for (const auto& e : estimators) {
      e.loss.validate();
      require(e.lambda > 0.0 && std::isfinite(e.lambda), ErrorCode::InvalidArgument,
              "estimator '" + e.name + "': lambda must be positive");
    }
    noise.validate(bench.model.n, bench.model.n_y);
  }
};

struct ExperimentResult {
  std::string estimator;
  int dwell = 0;
  Vector error_norm_trace;  // mean over realizations
  double steady_state_error = 0.0;
  std::vector<Vector> per_realization;  // kept on request
};

/// Mean of the trailing ceil(fraction * length) entries.
inline double steady_state_mean(const Vector& trace, double fraction) {
  const auto len = trace.size();
  const auto w = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(fraction * static_cast<double>(len))));
  return trace.tail(std::min(w, len)).mean();
}

/// Traces of every estimator on one realization.
inline std::vector<Vector> run_realization(const ExperimentConfig& cfg, const NoiseModel& noise,
                                           std::uint64_t realization) {
  const SystemModel& m = cfg.bench.model;
  const Trajectory traj = simulate(cfg.bench, noise, cfg.horizon, realization);
  const Vector x_init = cfg.x_init.size() ? cfg.x_init : Vector::Zero(m.n);
  std::vector<Vector> traces;
  for (const auto& est : cfg.estimators) {
    const Matrix V = Matrix::Identity(m.n_y, m.n_y) / est.lambda;
    const RunResult r = run_observer(cfg.bench, traj, est.loss, cfg.weighting.policy(V), cfg.mode, x_init, cfg.detection);
    traces.push_back(r.error_norm);
  }
  return traces;
}

/// One result per (dwell, estimator), dwell-major.
inline std::vector<ExperimentResult> run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ExperimentResult> results;
  const auto R = static_cast<std::size_t>(cfg.realizations);
  const std::size_t E = cfg.estimators.size();
  for (int dwell : cfg.dwells) {
    NoiseModel noise = cfg.noise;
    noise.impulsive.dwell = dwell;
    std::vector<std::vector<Vector>> traces(R);
    std::vector<std::exception_ptr> errors(R);
    auto work = [&](std::size_t begin, std::size_t stride) {
      for (std::size_t r = begin; r < R; r += stride) {
        try {
          traces[r] = run_realization(cfg, noise, r);
        } catch (...) {
          errors[r] = std::current_exception();
        }
      }
    };
    std::size_t nthreads = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                           : std::max(1u, std::thread::hardware_concurrency());
    nthreads = std::min(nthreads, R);
    if (nthreads <= 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < nthreads; ++k) pool.emplace_back(work, k, nthreads);
      for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);

    for (std::size_t k = 0; k < E; ++k) {
      ExperimentResult res;
      res.estimator = cfg.estimators[k].name;
      res.dwell = dwell;
      res.error_norm_trace = Vector::Zero(cfg.horizon);
      for (std::size_t r = 0; r < R; ++r) res.error_norm_trace += traces[r][k];
      res.error_norm_trace /= static_cast<double>(R);
      res.steady_state_error = steady_state_mean(res.error_norm_trace, cfg.steady_fraction);
      if (cfg.keep_realizations)
        for (std::size_t r = 0; r < R; ++r) res.per_realization.push_back(traces[r][k]);
      results.push_back(std::move(res));
    }
  }
  return results;
}

/// Locale-independent %.12g.
inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string result_column(const ExperimentResult& r, bool with_dwell) {
  return with_dwell ? r.estimator + "_dwell" + std::to_string(r.dwell) : r.estimator;
}

/// t followed by one column per result.
inline void write_csv(std::ostream& os, const std::vector<ExperimentResult>& results) {
  require(!results.empty(), ErrorCode::InvalidArgument, "nothing to write");
  bool multi = false;
  for (const auto& r : results) multi = multi || r.dwell != results.front().dwell;
  os << "t";
  for (const auto& r : results) os << ',' << result_column(r, multi);
  os << '\n';
  const Eigen::Index H = results.front().error_norm_trace.size();
  for (Eigen::Index t = 0; t < H; ++t) {
    os << t;
    for (const auto& r : results) os << ',' << format_number(r.error_norm_trace(t));
    os << '\n';
  }
}

}  // namespace proxobs
