#pragma once

// Time-varying Kalman filter, and the weighting recursion under which the
// proximal observer with a quadratic loss reproduces it.

#include <algorithm>
#include <cstddef>

#include "proxobs/errors.hpp"
#include "proxobs/linalg.hpp"
#include "proxobs/system.hpp"

namespace proxobs {

struct KalmanState {
  Vector x_hat;
  Matrix P;
  std::size_t t = 0;
};

struct NoiseCovariances {
  MatrixSequence Q;
  MatrixSequence R;  // R_t = V_t^2
};

namespace detail {

inline Eigen::LLT<Matrix> innovation_factor(const Matrix& P, const Matrix& C, const Matrix& R) {
  Eigen::LLT<Matrix> llt(symmetrize(R + C * P * C.transpose()));
  require(llt.info() == Eigen::Success, ErrorCode::SingularCovariance,
          "innovation covariance is not positive definite");
  return llt;
}

}  // namespace detail

/// Gain K = P C^T (R + C P C^T)^{-1}.
inline Matrix kalman_gain(const Matrix& P, const Matrix& C, const Matrix& R) {
  const auto llt = detail::innovation_factor(P, C, R);
  return llt.solve(C * P).transpose();
}

/// (P^{-1} + C^T R^{-1} C)^{-1}, evaluated in gain form.
inline Matrix posterior_covariance(const Matrix& P, const Matrix& C, const Matrix& R) {
  const auto llt = detail::innovation_factor(P, C, R);
  const Matrix CP = C * P;
  return symmetrize(P - CP.transpose() * llt.solve(CP));
}

/// Measurement update at a given prior.
inline KalmanState kf_update(const Vector& x_prior, const Matrix& P_prior, const Vector& y, const Matrix& C,
                             const Matrix& R, std::size_t t) {
  require_dims(C.cols() == x_prior.size() && C.rows() == y.size(), "measurement dimensions");
  require_dims(P_prior.rows() == x_prior.size() && R.rows() == y.size(), "covariance dimensions");
  require(y.allFinite(), ErrorCode::NonFiniteMeasurement, "measurement contains NaN/Inf");
  const Matrix K = kalman_gain(P_prior, C, R);
  const Eigen::Index n = x_prior.size();
  const Matrix IKC = Matrix::Identity(n, n) - K * C;
  KalmanState out;
  out.x_hat = x_prior + K * (y - C * x_prior);
  out.P = symmetrize(IKC * P_prior * IKC.transpose() + K * R * K.transpose());  // Joseph form
  out.t = t;
  return out;
}

/// Predict with the model at ks.t, then update with the measurement y_{t+1}.
inline KalmanState kf_step(const KalmanState& ks, const Vector& y, const SystemModel& model,
                           const NoiseCovariances& cov) {
  require_dims(ks.x_hat.size() == model.n && ks.P.rows() == model.n, "state dimension");
  const Matrix A = model.A(ks.t);
  const Vector x_prior = model.transition(ks.t, ks.x_hat);
  require(x_prior.allFinite(), ErrorCode::NonFiniteState, "transition produced NaN/Inf");
  const Matrix P_prior = symmetrize(A * ks.P * A.transpose() + cov.Q(ks.t));
  const std::size_t t1 = ks.t + 1;
  return kf_update(x_prior, P_prior, y, model.C(t1), cov.R(t1), t1);
}

/// W_t^2 = A (W_{t-1}^{-2} + C^T V^{-2} C)^{-1} A^T + Q, from W_{t-1}^2.
inline Matrix weight_recursion_sq(const Matrix& W_prev_sq, const Matrix& A, const Matrix& C, const Matrix& Q,
                                  const Matrix& V) {
  const Eigen::Index n = W_prev_sq.rows();
  require_dims(A.rows() == n && A.cols() == n && Q.rows() == n && Q.cols() == n, "weight recursion: A/Q shape");
  require_dims(C.cols() == n && V.rows() == C.rows() && V.cols() == C.rows(), "weight recursion: C/V shape");
  require(is_spd(W_prev_sq), ErrorCode::SingularInput, "previous weight must be SPD");
  require(is_spd(V), ErrorCode::SingularInput, "V must be SPD");
  require(is_symmetric(Q) && Q.allFinite() && min_eigenvalue(Q) >= -kSpdEigenFloor, ErrorCode::SingularInput,
          "Q must be symmetric positive semidefinite");
  const Matrix S = posterior_covariance(W_prev_sq, C, V * V);
  return symmetrize(A * S * A.transpose() + Q);
}

/// Same recursion in terms of the symmetric square roots W_{t-1}, W_t.
inline Matrix weight_recursion(const Matrix& W_prev, const Matrix& A, const Matrix& C, const Matrix& Q,
                               const Matrix& V) {
  require(is_spd(W_prev), ErrorCode::SingularInput, "previous weight must be SPD");
  const Matrix w_sq = weight_recursion_sq(W_prev * W_prev, A, C, Q, V);
  return spd_sqrt(w_sq);
}

/// Fixed point of P <- A (P - P C^T (C P C^T + R)^{-1} C P) A^T + Q, iterated from Q.
inline Matrix steady_state_prior_covariance(const Matrix& A, const Matrix& C, const Matrix& Q, const Matrix& R,
                                            int max_iterations = 100000, double tol = 1e-12) {
  Matrix P = Q;
  for (int k = 0; k < max_iterations; ++k) {
    const Matrix next = symmetrize(A * posterior_covariance(P, C, R) * A.transpose() + Q);
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = next;
    if (change <= tol * std::max(1.0, P.cwiseAbs().maxCoeff())) return P;
  }
  fail(ErrorCode::NoConvergence, "Riccati iteration did not converge");
}

}  // namespace proxobs
