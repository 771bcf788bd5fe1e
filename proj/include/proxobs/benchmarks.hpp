#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "proxobs/linalg.hpp"
#include "proxobs/scalar_prox.hpp"
#include "proxobs/system.hpp"

namespace proxobs {

struct BenchmarkSystem {
  std::string name;
  SystemModel model;
  Vector x0;
  InputSignal input;
  Matrix B;  // input matrix of linear benchmarks
};

namespace detail {

inline Matrix example_A() { return (Matrix(3, 3) << -1, 1, 0, -1, 0, 0, 0, -1, -1).finished(); }
inline Matrix example_B() { return (Matrix(3, 1) << -1, 0, 0).finished(); }
inline Vector example_x0() { return (Vector(3) << 10, 5, 5).finished(); }

/// u_t = sin(2 pi nu0 t Ts), nu0 = 0.1 Hz, Ts = 0.1 s.
inline InputSignal example_input() {
  return [](std::size_t t) { return Vector::Constant(1, std::sin(2.0 * std::numbers::pi * 0.1 * static_cast<double>(t) * 0.1)); };
}

}  // namespace detail

/// Third-order LTI system with eigenvalues on the unit circle and two sensors.
inline BenchmarkSystem linear_example() {
  const Matrix C = (Matrix(2, 3) << 1, 0, 0, 0, 0, 1).finished();
  const auto u = detail::example_input();
  return {"linear_example", make_linear(detail::example_A(), detail::example_B(), C, u), detail::example_x0(), u,
          detail::example_B()};
}

/// f(x) = A x + B u + F(x), F = [sin(x1 + x2), sin x1 cos x2, Sat_1(x3)], y = x1 + x2 + x3.
inline BenchmarkSystem nonlinear_example() {
  const Matrix A = detail::example_A(), B = detail::example_B();
  const auto u = detail::example_input();
  SystemModel m;
  m.n = 3;
  m.n_y = 1;
  m.transition = [A, B, u](std::size_t t, const Vector& x) -> Vector {
    Vector F(3);
    F << std::sin(x(0) + x(1)), std::sin(x(0)) * std::cos(x(1)), sat(x(2), 1.0);
    return A * x + B * u(t) + F;
  };
  m.observation = constant_sequence(Matrix::Ones(1, 3));
  return {"nonlinear_example", m, detail::example_x0(), u, B};
}

/// Linear benchmark with A rescaled to the given spectral radius.
inline BenchmarkSystem with_spectral_radius(const BenchmarkSystem& bench, double radius) {
  require(bench.model.is_linear(), ErrorCode::InvalidArgument, "rescaling needs a linear model");
  require(radius > 0.0, ErrorCode::InvalidArgument, "spectral radius must be positive");
  const Matrix A = bench.model.A(0);
  const Matrix A_scaled = A * (radius / spectral_radius(A));
  BenchmarkSystem out = bench;
  out.model = make_linear(A_scaled, bench.B, bench.model.C(0), bench.input);
  out.name = bench.name + "_scaled";
  return out;
}

}  // namespace proxobs
