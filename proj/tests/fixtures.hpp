#pragma once

#include <random>

#include "proxobs/scalar_prox.hpp"

namespace fixtures {

inline constexpr proxobs::LossKind kRobustKinds[] = {proxobs::LossKind::Absolute, proxobs::LossKind::Lasso,
                                                    proxobs::LossKind::Huber, proxobs::LossKind::AbsLog,
                                                    proxobs::LossKind::Vapnik};

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

/// Random parameters spanning several orders of magnitude.
inline proxobs::LossSpec random_loss(std::mt19937_64& rng, proxobs::LossKind kind) {
  using proxobs::LossSpec;
  std::uniform_real_distribution<double> eps(0.0, 1.0);
  switch (kind) {
    case proxobs::LossKind::Quadratic: return LossSpec::quadratic(log_uniform(rng, 0.01, 10));
    case proxobs::LossKind::Absolute: return LossSpec::absolute(log_uniform(rng, 0.01, 10));
    case proxobs::LossKind::Lasso: return LossSpec::lasso(log_uniform(rng, 0.05, 20), log_uniform(rng, 0.01, 5));
    case proxobs::LossKind::Huber: return LossSpec::huber(log_uniform(rng, 0.01, 10), log_uniform(rng, 0.01, 10));
    case proxobs::LossKind::AbsLog: return LossSpec::abslog(log_uniform(rng, 0.01, 10), log_uniform(rng, 0.01, 1000));
    case proxobs::LossKind::Vapnik: {
      const double e = eps(rng) < 0.1 ? 0.0 : eps(rng);
      return LossSpec::vapnik(log_uniform(rng, 0.01, 10), e);
    }
  }
  return LossSpec::absolute(1.0);
}

}  // namespace fixtures
