#pragma once

#include <cstddef>

#include "proxobs/errors.hpp"
#include "proxobs/kalman.hpp"
#include "proxobs/linalg.hpp"
#include "proxobs/system.hpp"

namespace proxobs {

/// How W_t and V_t evolve. The observer only ever needs M_t = W_t^2.
struct WeightingPolicy {
  enum class Kind { Identity, FixedSPD, KalmanRecursion };

  Kind kind = Kind::Identity;
  Matrix W0;          // FixedSPD: W_t == W0; KalmanRecursion: initial weight. Empty means identity.
  MatrixSequence V;   // measurement weights V_t
  MatrixSequence Q;   // KalmanRecursion only

  static WeightingPolicy identity(const Matrix& V) { return {Kind::Identity, {}, constant_sequence(V), {}}; }
  static WeightingPolicy fixed(const Matrix& W, const Matrix& V) {
    return {Kind::FixedSPD, W, constant_sequence(V), {}};
  }
  static WeightingPolicy kalman(const Matrix& W0, const Matrix& V, const Matrix& Q) {
    return {Kind::KalmanRecursion, W0, constant_sequence(V), constant_sequence(Q)};
  }

  Matrix v_at(std::size_t t) const {
    require(static_cast<bool>(V), ErrorCode::InvalidArgument, "weighting policy has no V");
    return V(t);
  }

  Matrix initial_w_sq(int n) const {
    if (kind == Kind::Identity || W0.size() == 0) return Matrix::Identity(n, n);
    require_dims(W0.rows() == n && W0.cols() == n, "W0 must be n x n");
    require_spd(W0, ErrorCode::SingularInput, "W0");
    return symmetrize(W0 * W0);
  }

  /// M_{t+1} from M_t, using the model's (A_t, C_t) and V_t, Q_t.
  Matrix next_w_sq(const Matrix& w_sq, const SystemModel& model, std::size_t t) const {
    if (kind != Kind::KalmanRecursion) return w_sq;
    require(static_cast<bool>(Q), ErrorCode::InvalidArgument, "Kalman weighting needs Q");
    return weight_recursion_sq(w_sq, model.A(t), model.C(t), Q(t), v_at(t));
  }
};

}  // namespace proxobs
