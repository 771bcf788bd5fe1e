#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "proxobs/proxobs.hpp"

namespace {

using namespace proxobs;

Matrix I(int n) { return Matrix::Identity(n, n); }
Matrix m1(double x) { return Matrix::Constant(1, 1, x); }
Vector v1(double x) { return Vector::Constant(1, x); }

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

CertificateSystem example_system(const Matrix& w_sq, const Matrix& V) {
  const auto bench = linear_example();
  return CertificateSystem::lti(bench.model.A(0), bench.model.C(0), w_sq, V);
}

TEST(EvalD, Examples) {
  const auto sys = example_system(I(3), I(2) / 0.1);
  const LossSpec abs = LossSpec::absolute(1);
  EXPECT_EQ(eval_D(Vector::Zero(3), 1, sys, abs), 0.0);

  // A e = (-1, -1, 0) for e = e_1, so e^T (A^T A - I) e = 1; C e = (1, 0) gives psi = 0.1.
  const Vector e = Vector::Unit(3, 0);
  EXPECT_NEAR(eval_D(e, 1, sys, abs), 1.0 - 2 * 0.1, 1e-15);

  std::mt19937_64 rng(1);
  const Matrix C = oracle::random_matrix(rng, 2, 3);
  const auto id = CertificateSystem::lti(I(3), C, I(3), I(2) / 0.3);
  for (int k = 0; k < 20; ++k) {
    const Vector v = oracle::random_vector(rng, 3);
    EXPECT_NEAR(eval_D(v, 1, id, abs), -2 * 0.3 * (C * v).cwiseAbs().sum(), 1e-12);
  }
  expect_code(ErrorCode::InvalidArgument, [&] { eval_D(e, 0, sys, abs); });
}

TEST(DConditionCheck, Examples) {
  const Matrix C = (Matrix(1, 2) << 1, 1).finished();
  const Matrix A_small = (Matrix(2, 2) << 0.5, 0.2, -0.1, 0.4).finished();
  ASSERT_LT(spectral_norm(A_small), 1.0);
  for (LossKind kind : fixtures::kRobustKinds) {
    std::mt19937_64 rng(2);
    const auto rep = check_D_condition(CertificateSystem::lti(A_small, C, I(2), m1(1)),
                                       fixtures::random_loss(rng, kind), 50, 10.0);
    EXPECT_TRUE(rep.satisfied) << to_string(kind);
    EXPECT_FALSE(rep.witness.has_value());
  }

  const auto bad = check_D_condition(CertificateSystem::lti(2 * I(2), C, I(2), m1(1e6)), LossSpec::absolute(1), 50, 1.0);
  EXPECT_FALSE(bad.satisfied);
  ASSERT_TRUE(bad.witness.has_value());
  EXPECT_GT(eval_D(*bad.witness, 1, CertificateSystem::lti(2 * I(2), C, I(2), m1(1e6)), LossSpec::absolute(1)), 0.0);
  EXPECT_NEAR(bad.margin, 3.0 - 2e-6 * std::sqrt(2.0), 0.05);
}

TEST(DConditionCheck, KalmanWeightingWithQuadraticLoss) {
  const auto bench = linear_example();
  const Matrix V = 0.5 * I(2);
  const auto weights = WeightingPolicy::kalman(I(3), V, 0.1 * I(3));
  const auto ws = weight_sequence(bench.model, weights, 30);
  const CertificateSystem sys{bench.model.jacobian, bench.model.observation, from_vector(ws), weights.V};
  const auto rep = check_D_condition(sys, LossSpec::quadratic(), 40, 10.0, 30);
  EXPECT_TRUE(rep.satisfied) << rep.margin;
}

TEST(SolveXi, Examples) {
  const LossSpec abs = LossSpec::absolute(1);
  EXPECT_NEAR(solve_xi(v1(5), m1(1), m1(1), abs, m1(1)).xi(0), 1.0, 1e-12);
  EXPECT_NEAR(solve_xi(v1(0.5), m1(1), m1(1), abs, m1(1)).xi(0), 0.5, 1e-12);
  std::mt19937_64 rng(3);
  for (LossKind kind : fixtures::kRobustKinds) {
    const auto r = solve_xi(Vector::Zero(3), oracle::random_matrix(rng, 2, 3), I(2), fixtures::random_loss(rng, kind),
                            oracle::random_spd(rng, 3, 0.1));
    EXPECT_LT(r.xi.norm(), 1e-14) << to_string(kind);
  }
}

TEST(SolveXi, MembershipHoldsOnRandomInputs) {
  std::mt19937_64 rng(4);
  for (LossKind kind : {LossKind::Absolute, LossKind::Huber, LossKind::AbsLog, LossKind::Vapnik, LossKind::Quadratic}) {
    for (int k = 0; k < 60; ++k) {
      const LossSpec loss = kind == LossKind::Quadratic ? LossSpec::quadratic(fixtures::log_uniform(rng, 0.1, 10))
                                                        : fixtures::random_loss(rng, kind);
      const Matrix C = oracle::random_matrix(rng, 2, 3);
      const Matrix V = Vector(oracle::random_vector(rng, 2).cwiseAbs().array() + 0.3).asDiagonal();
      const Matrix W2 = oracle::random_spd(rng, 3, 0.1);
      const Vector x = oracle::random_vector(rng, 3, 5);
      const auto r = solve_xi(x, C, V, loss, W2);
      EXPECT_LE(r.membership_residual, 1e-8);
      EXPECT_LT((r.z_star - (x - W2 * r.xi)).norm(), 1e-9 * std::max(1.0, x.norm()));
    }
  }
}

TEST(SolveXi, ContinuousInX) {
  std::mt19937_64 rng(5);
  for (LossKind kind : fixtures::kRobustKinds) {
    for (int k = 0; k < 20; ++k) {
      const LossSpec loss = fixtures::random_loss(rng, kind);
      const Matrix C = oracle::random_matrix(rng, 2, 3);
      const Matrix W2 = oracle::random_spd(rng, 3, 0.2);
      const Vector x = oracle::random_vector(rng, 3, 3);
      const Vector d = 1e-6 * oracle::random_vector(rng, 3).normalized();
      const Vector a = solve_xi(x, C, I(2), loss, W2).xi, b = solve_xi(x + d, C, I(2), loss, W2).xi;
      // xi = W^{-2}(x - prox(x)) is Lipschitz with constant 2 |W^{-2}|.
      EXPECT_LE((a - b).norm(), 2.0 * spd_inverse(W2).norm() * 1e-6 + 1e-9) << to_string(kind);
    }
  }
}

TEST(EvalG, Examples) {
  const auto sys = example_system(2 * I(3), I(2) / 0.1);
  const LossSpec abs = LossSpec::absolute(1);
  EXPECT_EQ(eval_G(Vector::Zero(3), 4, sys, abs, Vector::Zero(3)), 0.0);
  const Vector e = (Vector(3) << 1, 2, -2).finished();
  EXPECT_NEAR(eval_G(e, 0, sys, abs, Vector::Ones(3)), e.squaredNorm() / 2, 1e-14);
  const Vector xi = (Vector(3) << 0.1, 0, 0.3).finished();
  EXPECT_NEAR(eval_G(e, 1, sys, abs, xi), 4.5 + 2 * 0.1 * (1 + 2) + 2 * xi.squaredNorm(), 1e-14);
}

TEST(EvalSigma, ZeroErrorGivesZero) {
  const auto sys = example_system(I(3), I(2) / 0.1);
  EXPECT_EQ(eval_Sigma(Vector::Zero(3), 3, 3, sys, LossSpec::absolute(1)), 0.0);
  expect_code(ErrorCode::InvalidArgument, [&] { eval_Sigma(Vector::Ones(3), 2, 3, sys, LossSpec::absolute(1)); });
}

TEST(EvalSigma, QuadraticMatchesExplicitRecursion) {
  const auto bench = linear_example();
  std::mt19937_64 rng(6);
  for (int k = 0; k < 20; ++k) {
    const Matrix W2 = oracle::random_spd(rng, 3, 0.2), V = oracle::random_spd(rng, 2, 0.3);
    const Matrix A = bench.model.A(0), C = bench.model.C(0);
    const auto sys = CertificateSystem::lti(A, C, W2, V);
    const Vector e = oracle::random_vector(rng, 3);
    // xi_k = Omega e_k with Omega = C^T V^-2 C, and (I + W^2 Omega) e_k = A e_{k-1}.
    const Matrix Omega = C.transpose() * (V * V).inverse() * C;
    const Matrix M = I(3) + W2 * Omega;
    Vector ek = e;
    double expected = (Omega * ek).dot(W2 * Omega * ek);
    for (int j = 0; j < 4; ++j) {
      ek = M.lu().solve(A * ek);
      expected += (Omega * ek).dot(W2 * Omega * ek);
    }
    EXPECT_NEAR(eval_Sigma(e, 6, 4, sys, LossSpec::quadratic()), expected, 1e-9 * std::max(1.0, expected));
  }
}

TEST(EvalSigma, PositiveOnUnitVectors) {
  const auto sys = example_system(I(3), I(2) / 0.1);
  for (int i = 0; i < 3; ++i)
    for (double sgn : {1.0, -1.0}) EXPECT_GT(eval_Sigma(sgn * Vector::Unit(3, i), 3, 3, sys, LossSpec::absolute(1)), 0.0);
}

TEST(MinNormSubgradient, PicksSmallestElement) {
  // At e with C e = 0 the subdifferential of |.| contains 0.
  const Matrix C = (Matrix(2, 2) << 1, 1, 1, -1).finished();
  EXPECT_LT(min_norm_subgradient(Vector::Zero(2), C, I(2), LossSpec::absolute(1)).norm(), 1e-15);
  // Off the kinks the subgradient is unique.
  const Vector e = (Vector(2) << 2, 1).finished();
  const Vector expected = C.transpose() * (C * e).cwiseSign();
  EXPECT_LT((min_norm_subgradient(e, C, I(2), LossSpec::absolute(1)) - expected).norm(), 1e-14);
}

TEST(Grammian, Examples) {
  const auto g = uco_grammian(constant_sequence(I(3)), constant_sequence(I(3)), 0, 2);
  EXPECT_EQ(g.matrix, 3 * I(3));
  EXPECT_EQ(uco_grammian(constant_sequence(I(3)), constant_sequence(Matrix::Zero(1, 3)), 0, 2).matrix,
            Matrix::Zero(3, 3));
  EXPECT_FALSE(uco_grammian(constant_sequence(I(3)), constant_sequence(Matrix::Zero(1, 3)), 0, 2).positive_definite());
  const auto bench = linear_example();
  const auto ex = uco_grammian(bench.model.jacobian, bench.model.observation, 0, 2);
  EXPECT_GT(ex.min_eigenvalue(), 0.5);
  EXPECT_TRUE(ex.positive_definite());
}

TEST(Grammian, MonotoneInHorizon) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    const Matrix A = oracle::random_matrix(rng, 3, 3), C = oracle::random_matrix(rng, 1, 3);
    for (std::size_t T = 0; T < 6; ++T) {
      const Matrix d = uco_grammian(constant_sequence(A), constant_sequence(C), 2, T + 1).matrix -
                       uco_grammian(constant_sequence(A), constant_sequence(C), 2, T).matrix;
      EXPECT_GE(min_eigenvalue(d), -1e-12 * std::max(1.0, d.norm()));
    }
  }
}

TEST(UcoEquivalence, ZeroGainGivesIdenticalGrammians) {
  const auto bench = linear_example();
  const auto rep = uco_equivalence_check(bench.model.jacobian, bench.model.observation,
                                         constant_sequence(Matrix::Zero(3, 2)), 0, 4);
  EXPECT_TRUE(rep.satisfied);
  double open = 0, closed = 0;
  for (const auto& [k, v] : rep.values) {
    if (k == "open_min_eig") open = v;
    if (k == "closed_min_eig") closed = v;
  }
  EXPECT_EQ(open, closed);
}

TEST(UcoEquivalence, KalmanGains) {
  const auto bench = linear_example();
  const Matrix Q = 0.1 * I(3), R = 0.5 * I(2);
  const NoiseCovariances cov{constant_sequence(Q), constant_sequence(R)};
  std::vector<Matrix> gains{Matrix::Zero(3, 2)};
  KalmanState ks{Vector::Zero(3), I(3), 0};
  for (int t = 0; t < 60; ++t) {
    const Matrix A = bench.model.A(ks.t);
    gains.push_back(kalman_gain(A * ks.P * A.transpose() + Q, bench.model.C(ks.t + 1), R));
    ks = kf_step(ks, Vector::Zero(2), bench.model, cov);
  }
  for (std::size_t t0 = 0; t0 + 3 < 50; t0 += 5) {
    const auto rep = uco_equivalence_check(bench.model.jacobian, bench.model.observation, from_vector(gains), t0, 3);
    EXPECT_TRUE(rep.satisfied);
    EXPECT_GT(rep.margin, 0.0);
  }
}

TEST(UcoEquivalence, SingularFRaises) {
  const Matrix C = (Matrix(1, 2) << 1, 0).finished();
  const Matrix L = (Matrix(2, 1) << 1, 0).finished();  // I - C L = 0
  expect_code(ErrorCode::UnboundedF,
              [&] { uco_equivalence_check(constant_sequence(I(2)), constant_sequence(C), constant_sequence(L), 0, 3); });
}

TEST(RobustnessBound, Examples) {
  const auto b = robustness_bound(m1(1), m1(1), m1(1), LossSpec::absolute(1), 1.0, 0.5, 0.0);
  EXPECT_DOUBLE_EQ(b.delta_psi, 1.0);
  EXPECT_DOUBLE_EQ(b.q, 2.0);
  EXPECT_DOUBLE_EQ(b.R, 2.0);
  EXPECT_DOUBLE_EQ(b.total, 2.0);
  const auto scaled = robustness_bound(m1(1), m1(1), m1(10), LossSpec::absolute(1), 1.0, 0.5, 0.0);
  EXPECT_NEAR(scaled.R, 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(robustness_bound(m1(1), m1(1), m1(1), LossSpec::vapnik(1, 0), 1.0, 0.5, 3.0).total, 8.0);
}

TEST(RobustnessBound, Errors) {
  expect_code(ErrorCode::InvalidDecay,
              [] { robustness_bound(m1(1), m1(1), m1(1), LossSpec::absolute(1), 1.0, 1.0, 0.0); });
  expect_code(ErrorCode::InvalidDecay,
              [] { robustness_bound(m1(1), m1(1), m1(1), LossSpec::absolute(1), 1.0, 0.0, 0.0); });
  expect_code(ErrorCode::InvalidArgument,
              [] { robustness_bound(m1(1), m1(1), m1(1), LossSpec::huber(1, 0.1), 1.0, 0.5, 0.0); });
}

TEST(EstimateDecay, BoundsPowers) {
  const auto d = estimate_decay(0.5 * I(2));
  EXPECT_DOUBLE_EQ(d.lambda, 0.75);
  EXPECT_DOUBLE_EQ(d.c, 1.0);
  const Matrix A = (Matrix(2, 2) << 0.9, 5, 0, 0.8).finished();
  const auto e = estimate_decay(A);
  Matrix Ak = I(2);
  for (int k = 1; k <= 200; ++k) {
    Ak = A * Ak;
    EXPECT_LE(spectral_norm(Ak), e.c * std::pow(e.lambda, k) * (1 + 1e-12));
  }
  expect_code(ErrorCode::InvalidDecay, [] { estimate_decay(I(2)); });
}

TEST(InBandClosedLoop, ProjectsOutMeasuredDirections) {
  const Matrix C = (Matrix(2, 3) << 1, 0, 0, 0, 0, 1).finished();
  const Matrix F = in_band_closed_loop(linear_example().model.A(0), C, I(3));
  EXPECT_LT((C * F).norm(), 1e-15);
}

}  // namespace
