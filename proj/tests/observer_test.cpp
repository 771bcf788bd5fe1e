#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "proxobs/proxobs.hpp"

namespace {

using namespace proxobs;

Matrix I(int n) { return Matrix::Identity(n, n); }
Vector v1(double x) { return Vector::Constant(1, x); }
Matrix m1(double x) { return Matrix::Constant(1, 1, x); }

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

/// Orthogonal A (rotation about the third axis, then a swap): D_t <= 0 with W = I.
Matrix rotation_A() {
  const double c = std::cos(0.7), s = std::sin(0.7);
  Matrix R(3, 3);
  R << c, -s, 0, s, c, 0, 0, 0, 1;
  Matrix P(3, 3);
  P << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  return P * R;
}

TEST(Predict, Examples) {
  SystemModel id;
  id.n = 3;
  id.n_y = 1;
  id.transition = [](std::size_t, const Vector& x) { return x; };
  const Vector x = (Vector(3) << 1, 2, 3).finished();
  EXPECT_EQ(predict({0, x, I(3), {}}, id), x);

  const auto lin = linear_example();
  const Vector x0 = (Vector(3) << 10, 5, 5).finished();
  // u_0 = sin(0) = 0, so the prediction is A x0 = (-5, -10, -10).
  EXPECT_EQ(predict({0, x0, I(3), {}}, lin.model), (Vector(3) << -5, -10, -10).finished());

  const auto nl = nonlinear_example();
  EXPECT_EQ(predict({0, Vector::Zero(3), I(3), {}}, nl.model), Vector::Zero(3));
}

TEST(Predict, RejectsNonFiniteTransition) {
  SystemModel bad;
  bad.n = 1;
  bad.n_y = 1;
  bad.transition = [](std::size_t, const Vector& x) { return Vector(x.array() / 0.0); };
  expect_code(ErrorCode::NonFiniteState, [&] { predict({0, v1(0.0), I(1), {}}, bad); });
}

TEST(UpdateComponentwise, Examples) {
  const LossSpec abs = LossSpec::absolute(1.0);
  const Matrix V = m1(1 / 0.1);
  // Sat_1(5 / 0.1) = 1, so the correction is lambda = 0.1.
  EXPECT_NEAR(update_componentwise(v1(0), v1(5), m1(1), I(1), V, abs).first(0), 0.1, 1e-15);
  // 0.05 / 0.1 = 0.5 is inside the band: exact correction.
  EXPECT_NEAR(update_componentwise(v1(0), v1(0.05), m1(1), I(1), V, abs).first(0), 0.05, 1e-15);

  const auto bench = linear_example();
  const Matrix C = bench.model.C(0);
  const Vector z = (Vector(3) << 1, -2, 0.5).finished();
  const auto [z2, phi] = update_componentwise(z, C * z, C, I(3), I(2) * 0.5, LossSpec::lasso(1, 0.1));
  EXPECT_EQ(z2, z);
  ASSERT_TRUE(phi.has_value());
  EXPECT_EQ(*phi, Vector::Zero(2));
}

TEST(UpdateComponentwise, Errors) {
  const Matrix C = (Matrix(2, 2) << 1, 0, 0, 1).finished();
  const Matrix Vfull = (Matrix(2, 2) << 1, 0.2, 0.2, 1).finished();
  expect_code(ErrorCode::NonDiagonalV,
              [&] { update_componentwise(Vector::Zero(2), Vector::Ones(2), C, I(2), Vfull, LossSpec::absolute(1)); });
  const Matrix Czero = (Matrix(2, 2) << 1, 0, 0, 0).finished();
  expect_code(ErrorCode::ZeroRow,
              [&] { update_componentwise(Vector::Zero(2), Vector::Ones(2), Czero, I(2), I(2), LossSpec::absolute(1)); });
  Vector y = Vector::Ones(2);
  y(1) = std::nan("");
  expect_code(ErrorCode::NonFiniteMeasurement,
              [&] { update_componentwise(Vector::Zero(2), y, C, I(2), I(2), LossSpec::absolute(1)); });
  expect_code(ErrorCode::InvalidArgument, [&] {
    update_componentwise(Vector::Zero(2), Vector::Ones(2), C, I(2), I(2), LossSpec::absolute(1), {0, 0});
  });
}

TEST(UpdateFull, QuadraticMatchesRidge) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const Matrix C = oracle::random_matrix(rng, 2, 3);
    const Vector x = oracle::random_vector(rng, 3), y = oracle::random_vector(rng, 2);
    const Vector ridge = (I(3) + C.transpose() * C).ldlt().solve(x + C.transpose() * y);
    EXPECT_LT((update_full(x, y, C, I(3), I(2), LossSpec::quadratic()) - ridge).norm(), 1e-10);
  }
}

TEST(UpdateFull, QuadraticAcceptsNonDiagonalV) {
  std::mt19937_64 rng(2);
  const Matrix C = oracle::random_matrix(rng, 2, 3);
  const Matrix V = oracle::random_spd(rng, 2, 0.5), W2 = oracle::random_spd(rng, 3, 0.5);
  const Vector x = oracle::random_vector(rng, 3), y = oracle::random_vector(rng, 2);
  // Normal equations of 1/2 (z-x)^T W^-2 (z-x) + 1/2 |V^-1 (y - C z)|^2.
  const Matrix Vi2 = (V * V).inverse();
  const Vector z = (W2.inverse() + C.transpose() * Vi2 * C).ldlt().solve(W2.inverse() * x + C.transpose() * Vi2 * y);
  EXPECT_LT((update_full(x, y, C, W2, V, LossSpec::quadratic()) - z).norm(), 1e-10);
}

TEST(UpdateFull, SingleSensorEqualsComponentwise) {
  std::mt19937_64 rng(3);
  for (LossKind kind : fixtures::kRobustKinds) {
    for (int k = 0; k < 100; ++k) {
      const LossSpec loss = fixtures::random_loss(rng, kind);
      const Matrix C = oracle::random_matrix(rng, 1, 3);
      const Matrix W2 = oracle::random_spd(rng, 3, 0.2);
      const Matrix V = m1(fixtures::log_uniform(rng, 0.1, 10));
      const Vector x = oracle::random_vector(rng, 3, 2), y = oracle::random_vector(rng, 1, 3);
      const Vector zc = update_componentwise(x, y, C, W2, V, loss).first;
      const Vector zf = update_full(x, y, C, W2, V, loss);
      EXPECT_LT((zc - zf).norm(), 1e-9) << to_string(kind);
    }
  }
}

TEST(UpdateFull, SingleSensorMatchesWeightedOracle) {
  // u = W^{-1} z turns the W-weighted update into the plain prox of l(-W c^T u + y) at W^{-1} x.
  std::mt19937_64 rng(4);
  for (LossKind kind : fixtures::kRobustKinds) {
    for (int k = 0; k < 50; ++k) {
      const LossSpec loss = fixtures::random_loss(rng, kind);
      const Matrix C = oracle::random_matrix(rng, 1, 2);
      const Matrix W2 = oracle::random_spd(rng, 2, 0.3);
      const Matrix W = spd_sqrt(W2);
      const Vector x = oracle::random_vector(rng, 2, 2), y = oracle::random_vector(rng, 1, 2);
      const double lam = 0.7;
      const LossSpec scaled = loss.scaled_by(lam);
      const auto num = prox_oracle_1d(W.inverse() * x, {-(W * C.row(0).transpose()), y(0)}, scaled);
      const Vector zf = update_full(x, y, C, W2, m1(1 / lam), loss);
      EXPECT_LT((zf - W * num.z_star).norm(), 1e-6) << to_string(kind);
    }
  }
}

TEST(UpdateFull, ZeroResidualKeepsPrior) {
  const auto bench = linear_example();
  const Matrix C = bench.model.C(0);
  const Vector x = (Vector(3) << 0.3, -1, 2).finished();
  for (LossKind kind : fixtures::kRobustKinds) {
    std::mt19937_64 rng(5);
    EXPECT_LT((update_full(x, C * x, C, I(3), I(2), fixtures::random_loss(rng, kind)) - x).norm(), 1e-14);
  }
}

TEST(UpdateFull, IsStationaryAndBeatsRelaxation) {
  std::mt19937_64 rng(6);
  for (LossKind kind : fixtures::kRobustKinds) {
    for (int k = 0; k < 40; ++k) {
      const LossSpec loss = fixtures::random_loss(rng, kind);
      const Matrix C = oracle::random_matrix(rng, 3, 3);
      const Matrix W2 = oracle::random_spd(rng, 3, 0.3);
      const Matrix V = Vector(oracle::random_vector(rng, 3).cwiseAbs().array() + 0.2).asDiagonal();
      const Vector x = oracle::random_vector(rng, 3, 2), y = oracle::random_vector(rng, 3, 5);
      const auto prob = make_problem(x, y, C, W2, V, loss);
      const auto full = full_update(prob, natural_order(3), {1e-12, 100000});
      const auto relaxed = componentwise_update(prob, natural_order(3));
      EXPECT_LE(full.objective, relaxed.objective + 1e-12);
      for (int d = 0; d < 20; ++d) {
        const Vector dir = oracle::random_vector(rng, 3).normalized();
        for (double h : {1e-2, 1e-4})
          EXPECT_GE(prob.objective(full.z + h * dir), full.objective - 1e-10) << to_string(kind);
      }
    }
  }
}

TEST(Step, KalmanEquivalenceNoiseFree) {
  const auto bench = linear_example();
  const Matrix Q = 0.05 * I(3), V = 0.3 * I(2);
  const auto weights = WeightingPolicy::kalman(I(3), V, Q);
  const Trajectory traj = simulate(bench, NoiseModel{}, 60);
  ObserverState obs = ObserverState::initial(bench.model, weights, Vector::Zero(3));
  KalmanState kf{obs.x_hat, posterior_covariance(obs.w_sq, bench.model.C(0), V * V), 0};
  const NoiseCovariances cov{constant_sequence(Q), constant_sequence(Matrix(V * V))};
  for (int t = 1; t < 60; ++t) {
    const Vector y = traj.y.row(t).transpose();
    obs = step(obs, y, bench.model, LossSpec::quadratic(), weights, UpdateMode::full_numeric());
    kf = kf_step(kf, y, bench.model, cov);
    EXPECT_LT((obs.x_hat - kf.x_hat).cwiseAbs().maxCoeff(), 1e-9) << t;
  }
}

TEST(Step, ImpulseCorrectionIsCapped) {
  const auto bench = linear_example();
  const Matrix V = I(2) / 0.1;
  const auto weights = WeightingPolicy::identity(V);
  const Vector x = (Vector(3) << 1, 2, 3).finished();
  const ObserverState obs{0, x, I(3), {}};
  const Vector clean = bench.model.C(1) * bench.model.transition(0, x);
  Vector y = clean;
  y(0) += 100.0;
  const auto a = step(obs, clean, bench.model, LossSpec::absolute(1), weights, UpdateMode::componentwise());
  const auto b = step(obs, y, bench.model, LossSpec::absolute(1), weights, UpdateMode::componentwise());
  const Vector c1 = bench.model.C(1).row(0).transpose();
  EXPECT_LE((b.x_hat - a.x_hat).norm(), 0.1 * c1.norm() + 1e-15);
}

TEST(Step, ConsistentMeasurementIsFixedPoint) {
  const auto bench = linear_example();
  const auto weights = WeightingPolicy::identity(I(2) / 0.1);
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    const Vector x = oracle::random_vector(rng, 3, 5);
    const std::size_t t = static_cast<std::size_t>(k);
    const Vector next = bench.model.transition(t, x);
    for (LossKind kind : fixtures::kRobustKinds) {
      const auto s = step({t, x, I(3), {}}, bench.model.C(t + 1) * next, bench.model,
                          fixtures::random_loss(rng, kind), weights, UpdateMode::componentwise());
      EXPECT_EQ(s.x_hat, next);
    }
  }
}

TEST(Step, AdvancesTimeAndWeights) {
  const auto bench = linear_example();
  const auto weights = WeightingPolicy::kalman(I(3), I(2), I(3));
  const auto s0 = ObserverState::initial(bench.model, weights, Vector::Zero(3));
  const auto s1 = step(s0, Vector::Zero(2), bench.model, LossSpec::quadratic(), weights, UpdateMode::full_numeric());
  EXPECT_EQ(s1.t, 1u);
  const Matrix A = bench.model.A(0), C = bench.model.C(0);
  const Matrix expected = A * (I(3) + C.transpose() * C).inverse() * A.transpose() + I(3);
  EXPECT_LT((s1.w_sq - expected).norm(), 1e-12);
}

TEST(ObserverProperties, SaturationCapHoldsForHugeMeasurements) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> mag(-1e6, 1e6);
  for (int k = 0; k < 500; ++k) {
    const Matrix C = oracle::random_matrix(rng, 3, 4);
    const Matrix W2 = oracle::random_spd(rng, 4, 0.1);
    const Vector lam = oracle::random_vector(rng, 3).cwiseAbs().array() + 0.01;
    const Matrix V = lam.cwiseInverse().asDiagonal();
    Vector y(3);
    for (int i = 0; i < 3; ++i) y(i) = mag(rng);
    const auto prob = make_problem(oracle::random_vector(rng, 4), y, C, W2, V, LossSpec::absolute(1));
    const auto r = componentwise_update(prob, natural_order(3));
    for (int i = 0; i < 3; ++i) {
      const Vector Mc = W2 * C.row(i).transpose();
      EXPECT_LE((r.theta(i) * Mc).norm(), lam(i) * Mc.norm() * (1 + 1e-14));
    }
  }
}

TEST(ObserverProperties, DeterministicForFixedOrder) {
  std::mt19937_64 rng(10);
  const Matrix C = oracle::random_matrix(rng, 4, 3);
  const Vector x = oracle::random_vector(rng, 3), y = oracle::random_vector(rng, 4, 10);
  for (LossKind kind : fixtures::kRobustKinds) {
    const LossSpec loss = fixtures::random_loss(rng, kind);
    const std::vector<int> order{2, 0, 3, 1};
    const auto a = update_componentwise(x, y, C, I(3), I(4), loss, order);
    const auto b = update_componentwise(x, y, C, I(3), I(4), loss, order);
    EXPECT_EQ(a.first, b.first);
  }
}

TEST(ObserverProperties, NoiseFreeFixedPointAlongTrajectory) {
  const auto bench = linear_example();
  const auto weights = WeightingPolicy::identity(I(2) / 0.1);
  const Trajectory traj = simulate(bench, NoiseModel{}, 50);
  ObserverState obs = ObserverState::initial(bench.model, weights, bench.x0);
  for (int t = 1; t < 50; ++t) {
    obs = step(obs, traj.y.row(t).transpose(), bench.model, LossSpec::absolute(1), weights, UpdateMode::componentwise());
    EXPECT_EQ(obs.x_hat, Vector(traj.x.row(t).transpose()));
  }
}

/// G_t(e_t) along a noise-free run with xi_t = W_t^{-2}(A e_{t-1} - e_t).
std::vector<double> g_sequence(const SystemModel& model, const WeightingPolicy& weights, const LossSpec& loss,
                               const UpdateMode& mode, const Vector& x0, const Vector& x_init, int horizon) {
  BenchmarkSystem bench{"test", model, x0, {}, {}};
  const Trajectory traj = simulate(bench, NoiseModel{}, horizon);
  const auto ws = weight_sequence(model, weights, static_cast<std::size_t>(horizon));
  const CertificateSystem sys{model.jacobian, model.observation, from_vector(ws), weights.V};
  ObserverState obs = ObserverState::initial(model, weights, x_init);
  Vector e = obs.x_hat - x0;
  std::vector<double> G{eval_G(e, 0, sys, loss, Vector::Zero(model.n))};
  for (int t = 1; t < horizon; ++t) {
    const auto tt = static_cast<std::size_t>(t);
    obs = step(obs, traj.y.row(t).transpose(), model, loss, weights, mode);
    const Vector e_new = obs.x_hat - traj.x.row(t).transpose();
    const Vector xi = ws[tt].llt().solve(model.A(tt - 1) * e - e_new);
    G.push_back(eval_G(e_new, tt, sys, loss, xi));
    e = e_new;
  }
  return G;
}

TEST(ObserverProperties, GDecreasesWhenCertificateHolds) {
  const Matrix A = rotation_A();
  const Matrix C = (Matrix(1, 3) << 1, 0.5, 0).finished();
  const SystemModel model = make_linear(A, Matrix(), C);
  const auto weights = WeightingPolicy::identity(m1(1 / 0.3));
  const CertificateSystem sys = CertificateSystem::lti(A, C, I(3), weights.V(0));
  ASSERT_TRUE(check_D_condition(sys, LossSpec::absolute(1), 64, 10.0).satisfied);
  const Vector x0 = (Vector(3) << 3, -2, 1).finished();
  const auto G = g_sequence(model, weights, LossSpec::absolute(1), UpdateMode::componentwise(), x0,
                            Vector::Zero(3), 400);
  for (std::size_t t = 1; t < G.size(); ++t) EXPECT_LE(G[t], G[t - 1] + 1e-12) << t;
  EXPECT_LT(G.back(), 1e-3 * G.front());
}

TEST(ObserverProperties, GDecreasesForKalmanWeighting) {
  const auto bench = linear_example();
  const Matrix V = 0.5 * I(2);
  const auto weights = WeightingPolicy::kalman(I(3), V, 0.1 * I(3));
  const auto G = g_sequence(bench.model, weights, LossSpec::quadratic(), UpdateMode::full_numeric(), bench.x0,
                            Vector::Zero(3), 200);
  for (std::size_t t = 2; t < G.size(); ++t) EXPECT_LE(G[t], G[t - 1] + 1e-12 * std::max(1.0, G[t - 1])) << t;
}

}  // namespace
