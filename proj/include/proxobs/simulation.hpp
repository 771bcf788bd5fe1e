#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "proxobs/benchmarks.hpp"
#include "proxobs/errors.hpp"
#include "proxobs/kalman.hpp"
#include "proxobs/linalg.hpp"
#include "proxobs/noise.hpp"
#include "proxobs/observer.hpp"
#include "proxobs/weighting.hpp"

namespace proxobs {

/// Row t of each matrix is the value at time t = 0..horizon-1.
struct Trajectory {
  Matrix x;
  Matrix y;     // C_t x_t + nu_t + zeta_t
  Matrix w;     // process noise added to x_{t+1}
  Matrix nu;    // dense measurement noise
  Matrix zeta;  // impulsive measurement noise
};

inline Trajectory simulate(const BenchmarkSystem& bench, const NoiseModel& noise, int horizon,
                           std::uint64_t realization = 0) {
  require(horizon >= 1, ErrorCode::InvalidArgument, "horizon must be >= 1");
  const SystemModel& m = bench.model;
  noise.validate(m.n, m.n_y);
  require_dims(bench.x0.size() == m.n, "initial state dimension");
  Trajectory tr;
  tr.w = noise.process_bound.size() ? gen_uniform_noise(noise.process_bound, horizon, noise.seed, realization,
                                                        NoiseStream::Process)
                                    : Matrix::Zero(horizon, m.n);
  tr.nu = noise.measurement_bound.size() ? gen_uniform_noise(noise.measurement_bound, horizon, noise.seed,
                                                             realization, NoiseStream::Measurement)
                                         : Matrix::Zero(horizon, m.n_y);
  tr.zeta = noise.impulsive.enabled ? gen_sparse_noise(m.n_y, horizon, noise.impulsive.std, noise.impulsive.dwell,
                                                       noise.seed, realization, noise.impulsive.rate)
                                    : Matrix::Zero(horizon, m.n_y);
  tr.x.resize(horizon, m.n);
  tr.y.resize(horizon, m.n_y);
  Vector x = bench.x0;
  for (int t = 0; t < horizon; ++t) {
    require(x.allFinite(), ErrorCode::NonFiniteState, "simulated state is not finite at t=" + std::to_string(t));
    const auto tt = static_cast<std::size_t>(t);
    tr.x.row(t) = x.transpose();
    tr.y.row(t) = (m.C(tt) * x).transpose() + tr.nu.row(t) + tr.zeta.row(t);
    x = m.transition(tt, x) + tr.w.row(t).transpose();
  }
  return tr;
}

/// Thresholds of the bad-data detector: T_ti = max(min(T_{t-1,i}, |y_ti - c_ti^T x_t|), eps0).
struct DetectionState {
  Vector thresholds;  // starts at +inf
  double epsilon0 = 0.01;

  static DetectionState initial(int n_y, double epsilon0 = 0.01) {
    return {Vector::Constant(n_y, std::numeric_limits<double>::infinity()), epsilon0};
  }

  void update(const Vector& abs_residual) {
    thresholds = thresholds.cwiseMin(abs_residual).cwiseMax(epsilon0);
  }
};

struct DetectionOptions {
  bool enabled = false;
  double epsilon0 = 0.01;
  // Steady-state Kalman corrector for linear systems.
  double corrector_q = 1e-3;
  double corrector_r = 1e-2;
};

struct RunResult {
  Vector error_norm;  // |x_hat_t - x_t|, t = 0..horizon-1
  Matrix estimates;
  std::optional<Matrix> thresholds;  // detection only
  std::optional<Matrix> flagged;     // 1 where a sensor was dropped
};

namespace detail {

inline std::vector<int> good_rows(const std::vector<bool>& bad) {
  std::vector<int> rows;
  for (std::size_t i = 0; i < bad.size(); ++i)
    if (!bad[i]) rows.push_back(static_cast<int>(i));
  return rows;
}

inline Matrix select_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  return out;
}

inline Vector select(const Vector& v, const std::vector<int>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(rows[k]);
  return out;
}

inline Matrix select_square(const Matrix& m, const std::vector<int>& rows) {
  return select_rows(select_rows(m, rows).transpose(), rows).transpose();
}

}  // namespace detail

/// Drives the observer over a simulated trajectory starting from x_init at t = 0.
///
/// With detection the robust observer runs unchanged and only serves as a
/// detector: a sensor is flagged when its trigger (|phi| for the Lasso loss,
/// the post-update residual otherwise) exceeds the threshold. A second
/// observer with its own state then updates on the unflagged sensors, by a
/// steady-state Kalman gain for linear models and by the same robust update
/// otherwise. Its estimate is the output.
inline RunResult run_observer(const BenchmarkSystem& bench, const Trajectory& traj, const LossSpec& loss,
                              const WeightingPolicy& weights, const UpdateMode& mode, const Vector& x_init,
                              const DetectionOptions& detection = {}) {
  const SystemModel& m = bench.model;
  const auto H = static_cast<int>(traj.x.rows());
  RunResult out;
  out.error_norm.resize(H);
  out.estimates.resize(H, m.n);
  ObserverState obs = ObserverState::initial(m, weights, x_init);
  ObserverState corr = obs;
  out.estimates.row(0) = obs.x_hat.transpose();
  out.error_norm(0) = (obs.x_hat - traj.x.row(0).transpose()).norm();

  std::optional<DetectionState> det;
  Matrix P_ss;
  if (detection.enabled) {
    det = DetectionState::initial(m.n_y, detection.epsilon0);
    out.thresholds = Matrix::Zero(H, m.n_y);
    out.flagged = Matrix::Zero(H, m.n_y);
    if (m.is_linear())
      P_ss = steady_state_prior_covariance(m.A(0), m.C(0), detection.corrector_q * Matrix::Identity(m.n, m.n),
                                           detection.corrector_r * Matrix::Identity(m.n_y, m.n_y));
  }

  for (int t = 1; t < H; ++t) {
    const Vector y = traj.y.row(t).transpose();
    obs = step(obs, y, m, loss, weights, mode);
    if (!det) {
      out.estimates.row(t) = obs.x_hat.transpose();
      out.error_norm(t) = (obs.x_hat - traj.x.row(t).transpose()).norm();
      continue;
    }
    const auto t1 = static_cast<std::size_t>(t);
    const Matrix C = m.C(t1);
    const Vector resid = (y - C * obs.x_hat).cwiseAbs();
    det->update(resid);
    const Vector trigger = obs.phi ? Vector(obs.phi->cwiseAbs()) : resid;
    std::vector<bool> bad(static_cast<std::size_t>(m.n_y));
    for (int i = 0; i < m.n_y; ++i) {
      bad[static_cast<std::size_t>(i)] = trigger(i) > det->thresholds(i);
      (*out.flagged)(t, i) = bad[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    }
    out.thresholds->row(t) = det->thresholds.transpose();

    const Vector x_prior = predict(corr, m);
    const Matrix w_sq = weights.next_w_sq(corr.w_sq, m, corr.t);
    const auto rows = detail::good_rows(bad);
    Vector x_corr = x_prior;
    if (!rows.empty()) {
      const Matrix Cg = detail::select_rows(C, rows);
      const Vector yg = detail::select(y, rows);
      if (m.is_linear()) {
        const Matrix Rg = detection.corrector_r * Matrix::Identity(Cg.rows(), Cg.rows());
        x_corr = x_prior + kalman_gain(P_ss, Cg, Rg) * (yg - Cg * x_prior);
      } else {
        const Matrix Vg = detail::select_square(weights.v_at(t1), rows);
        UpdateMode sub = mode;
        sub.sensor_order.clear();
        x_corr = measurement_update(make_problem(x_prior, yg, Cg, w_sq, Vg, loss), sub).z;
      }
    }
    corr = {t1, x_corr, w_sq, {}};
    out.estimates.row(t) = corr.x_hat.transpose();
    out.error_norm(t) = (corr.x_hat - traj.x.row(t).transpose()).norm();
  }
  return out;
}

}  // namespace proxobs
