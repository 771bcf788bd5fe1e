// Absolute-loss observer on the linear benchmark with sparse impulses on both sensors.
#include <cstdio>

#include "proxobs/proxobs.hpp"

int main() {
  using namespace proxobs;
  const BenchmarkSystem bench = linear_example();
  NoiseModel noise;
  noise.impulsive = {true, 10.0, 5, 1.0};
  noise.seed = 42;
  const Trajectory traj = simulate(bench, noise, 500);

  const Matrix V = Matrix::Identity(2, 2) / 0.1;
  const RunResult run = run_observer(bench, traj, LossSpec::absolute(1.0), WeightingPolicy::identity(V),
                                     UpdateMode::componentwise(), Vector::Zero(3));
  for (int t = 0; t < 500; t += 50) std::printf("t=%3d  |e|=%.6g\n", t, run.error_norm(t));
  std::printf("t=499  |e|=%.6g\n", run.error_norm(499));
}
