#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "proxobs/errors.hpp"
#include "proxobs/linalg.hpp"

namespace proxobs {

using MatrixSequence = std::function<Matrix(std::size_t)>;
using InputSignal = std::function<Vector(std::size_t)>;

inline MatrixSequence constant_sequence(Matrix m) {
  return [m = std::move(m)](std::size_t) { return m; };
}

/// x_{t+1} = transition(t, x_t) + w_t,  y_t = observation(t) x_t + v_t.
///
/// jacobian(t) is A_t for linear models (or a linearization); it is only
/// needed by the Kalman weighting recursion and the certificates.
struct SystemModel {
  int n = 0;
  int n_y = 0;
  std::function<Vector(std::size_t, const Vector&)> transition;
  MatrixSequence observation;
  MatrixSequence jacobian;

  bool is_linear() const { return static_cast<bool>(jacobian); }

  Matrix C(std::size_t t) const {
    Matrix c = observation(t);
    require_dims(c.rows() == n_y && c.cols() == n, "observation matrix has the wrong shape");
    return c;
  }

  Matrix A(std::size_t t) const {
    require(is_linear(), ErrorCode::InvalidArgument, "model has no transition matrix");
    Matrix a = jacobian(t);
    require_dims(a.rows() == n && a.cols() == n, "transition matrix has the wrong shape");
    return a;
  }
};

/// Linear time-invariant model x' = A x + B u_t, y = C x. An empty input means u = 0.
inline SystemModel make_linear(const Matrix& A, const Matrix& B, const Matrix& C, InputSignal input = {}) {
  require_dims(A.rows() == A.cols(), "A must be square");
  require_dims(C.cols() == A.rows(), "C must have n columns");
  require_dims(B.size() == 0 || B.rows() == A.rows(), "B must have n rows");
  SystemModel m;
  m.n = static_cast<int>(A.rows());
  m.n_y = static_cast<int>(C.rows());
  m.transition = [A, B, input](std::size_t t, const Vector& x) -> Vector {
    Vector next = A * x;
    if (B.size() > 0 && input) next += B * input(t);
    return next;
  };
  m.observation = constant_sequence(C);
  m.jacobian = constant_sequence(A);
  return m;
}

}  // namespace proxobs
