#pragma once

// Dense (uniform) and sparse impulsive (Gaussian, dwell-limited) noise.
// Every channel draws from its own generator keyed by
// (master seed, realization, stream, channel), so realizations can be
// produced in any order.

#include <cstdint>
#include <random>

#include "proxobs/errors.hpp"
#include "proxobs/linalg.hpp"

namespace proxobs {

enum class NoiseStream : std::uint32_t { Process = 1, Measurement = 2, Impulsive = 3 };

inline std::mt19937_64 noise_engine(std::uint64_t master, std::uint64_t realization, NoiseStream stream,
                                    std::uint64_t channel) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(realization), static_cast<std::uint32_t>(realization >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(channel)};
  return std::mt19937_64(seq);
}

struct ImpulsiveNoise {
  bool enabled = false;
  double std = 10.0;
  int dwell = 5;
  double rate = 1.0;  // probability that an instant is a spike candidate
};

struct NoiseModel {
  Vector process_bound;      // w_t ~ U[-b, b] per state channel; empty disables
  Vector measurement_bound;  // nu_t ~ U[-b, b] per output channel; empty disables
  ImpulsiveNoise impulsive;
  std::uint64_t seed = 0;

  void validate(int n, int n_y) const {
    require_dims(process_bound.size() == 0 || process_bound.size() == n, "process noise bound size");
    require_dims(measurement_bound.size() == 0 || measurement_bound.size() == n_y, "measurement noise bound size");
    require((process_bound.array() >= 0).all() && (measurement_bound.array() >= 0).all(), ErrorCode::InvalidArgument,
            "noise bounds must be nonnegative");
    require(impulsive.dwell >= 1, ErrorCode::InvalidArgument, "dwell must be >= 1");
    require(impulsive.std >= 0.0, ErrorCode::InvalidArgument, "impulse std must be >= 0");
    require(impulsive.rate >= 0.0 && impulsive.rate <= 1.0, ErrorCode::InvalidArgument, "impulse rate must be in [0,1]");
  }
};

/// horizon x n_y matrix of dwell-limited Gaussian spikes.
///
/// Every instant is a candidate with probability `rate`; candidates are kept
/// left to right when at least `dwell` samples after the previous spike.
/// Draws do not depend on std, so std only rescales the same realization.
inline Matrix gen_sparse_noise(int n_y, int horizon, double std, int dwell, std::uint64_t seed,
                               std::uint64_t realization = 0, double rate = 1.0) {
  require(dwell >= 1, ErrorCode::InvalidArgument, "dwell must be >= 1");
  require(std >= 0.0 && horizon >= 0 && n_y >= 0, ErrorCode::InvalidArgument, "invalid sparse noise request");
  Matrix out = Matrix::Zero(horizon, n_y);
  for (int i = 0; i < n_y; ++i) {
    auto rng = noise_engine(seed, realization, NoiseStream::Impulsive, static_cast<std::uint64_t>(i));
    std::bernoulli_distribution candidate(rate);
    std::normal_distribution<double> gauss(0.0, 1.0);
    long last = -static_cast<long>(dwell);
    for (int t = 0; t < horizon; ++t) {
      const bool c = candidate(rng);
      const double g = gauss(rng);
      if (c && t - last >= dwell) {
        out(t, i) = std * g;
        last = t;
      }
    }
  }
  return out;
}

/// horizon x bounds.size() matrix of independent U[-b_i, b_i] samples.
inline Matrix gen_uniform_noise(const Vector& bounds, int horizon, std::uint64_t seed, std::uint64_t realization,
                                NoiseStream stream) {
  Matrix out = Matrix::Zero(horizon, bounds.size());
  for (Eigen::Index i = 0; i < bounds.size(); ++i) {
    if (bounds(i) == 0.0) continue;
    auto rng = noise_engine(seed, realization, stream, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> u(-bounds(i), bounds(i));
    for (int t = 0; t < horizon; ++t) out(t, i) = u(rng);
  }
  return out;
}

/// Smallest gap between consecutive nonzero entries of each column (horizon if fewer than two).
inline int min_spike_gap(const Matrix& noise) {
  int gap = static_cast<int>(noise.rows());
  for (Eigen::Index i = 0; i < noise.cols(); ++i) {
    long last = -1;
    for (Eigen::Index t = 0; t < noise.rows(); ++t) {
      if (noise(t, i) == 0.0) continue;
      if (last >= 0) gap = std::min(gap, static_cast<int>(t - last));
      last = t;
    }
  }
  return gap;
}

}  // namespace proxobs
