// With a quadratic loss and the Kalman weight recursion the proximal observer is the Kalman filter.
#include <algorithm>
#include <cstdio>

#include "proxobs/proxobs.hpp"

int main() {
  using namespace proxobs;
  const BenchmarkSystem bench = linear_example();
  NoiseModel noise;
  noise.process_bound = Vector::Constant(3, 0.1);
  noise.measurement_bound = Vector::Constant(2, 0.1);
  const Trajectory traj = simulate(bench, noise, 100);

  const Matrix Q = 1e-2 * Matrix::Identity(3, 3), V = 0.1 * Matrix::Identity(2, 2);
  const WeightingPolicy weights = WeightingPolicy::kalman(Matrix::Identity(3, 3), V, Q);
  ObserverState obs = ObserverState::initial(bench.model, weights, Vector::Zero(3));
  KalmanState kf{obs.x_hat, posterior_covariance(obs.w_sq, bench.model.C(0), V * V), 0};
  const NoiseCovariances cov{constant_sequence(Q), constant_sequence(Matrix(V * V))};

  double worst = 0.0;
  for (int t = 1; t < 100; ++t) {
    const Vector y = traj.y.row(t).transpose();
    obs = step(obs, y, bench.model, LossSpec::quadratic(), weights, UpdateMode::full_numeric());
    kf = kf_step(kf, y, bench.model, cov);
    worst = std::max(worst, (obs.x_hat - kf.x_hat).cwiseAbs().maxCoeff());
  }
  std::printf("max |x_observer - x_kalman| over 100 steps: %.3g\n", worst);
}
