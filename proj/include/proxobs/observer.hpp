#pragma once

// Proximal observer: prediction through the model, then a measurement update
// that minimizes 1/2|W_t^{-1}(z - x_prior)|^2 + psi(V_t^{-1}(y_t - C_t z)).

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "proxobs/errors.hpp"
#include "proxobs/linalg.hpp"
#include "proxobs/measurement.hpp"
#include "proxobs/scalar_prox.hpp"
#include "proxobs/system.hpp"
#include "proxobs/weighting.hpp"

namespace proxobs {

struct ObserverState {
  std::size_t t = 0;
  Vector x_hat;
  Matrix w_sq;                // W_t^2
  std::optional<Vector> phi;  // sparse-noise estimates, Lasso only

  /// Estimate at t = 0; no measurement has been processed yet.
  static ObserverState initial(const SystemModel& model, const WeightingPolicy& weights, const Vector& x0) {
    require_dims(x0.size() == model.n, "initial estimate has the wrong dimension");
    return {0, x0, weights.initial_w_sq(model.n), std::nullopt};
  }
};

struct UpdateMode {
  enum class Kind { FullNumeric, ComponentWise };

  Kind kind = Kind::ComponentWise;
  std::vector<int> sensor_order;  // empty: natural order
  FullUpdateOptions full;

  static UpdateMode componentwise(std::vector<int> order = {}) { return {Kind::ComponentWise, std::move(order), {}}; }
  static UpdateMode full_numeric(double tol = 1e-10) { return {Kind::FullNumeric, {}, {tol, 100000}}; }

  std::vector<int> order_for(int n_y) const { return sensor_order.empty() ? natural_order(n_y) : sensor_order; }
};

/// V^{-1}; exact reciprocals when V is diagonal.
inline Matrix weight_inverse(const Matrix& V) {
  if (is_diagonal(V)) {
    require((V.diagonal().array() > 0.0).all(), ErrorCode::SingularInput, "V must have a positive diagonal");
    return V.diagonal().cwiseInverse().asDiagonal();
  }
  require_spd(V, ErrorCode::SingularInput, "V");
  return spd_inverse(V);
}

/// x_{t+1|t} = f_t(x_hat_t).
inline Vector predict(const ObserverState& obs, const SystemModel& model) {
  require_dims(obs.x_hat.size() == model.n, "estimate has the wrong dimension");
  Vector x = model.transition(obs.t, obs.x_hat);
  require(x.allFinite(), ErrorCode::NonFiniteState, "transition produced NaN/Inf");
  return x;
}

inline MeasurementProblem make_problem(const Vector& x_prior, const Vector& y, const Matrix& C, const Matrix& w_sq,
                                       const Matrix& V, const LossSpec& loss) {
  require_dims(V.rows() == y.size() && V.cols() == y.size(), "V must be n_y x n_y");
  return {x_prior, y, C, w_sq, weight_inverse(V), loss};
}

inline std::pair<Vector, std::optional<Vector>> update_componentwise(const Vector& x_prior, const Vector& y,
                                                                     const Matrix& C, const Matrix& w_sq,
                                                                     const Matrix& V, const LossSpec& loss,
                                                                     const std::vector<int>& order = {}) {
  const auto prob = make_problem(x_prior, y, C, w_sq, V, loss);
  auto r = componentwise_update(prob, order.empty() ? natural_order(static_cast<int>(y.size())) : order);
  return {std::move(r.z), std::move(r.phi)};
}

inline Vector update_full(const Vector& x_prior, const Vector& y, const Matrix& C, const Matrix& w_sq,
                          const Matrix& V, const LossSpec& loss, double tol = 1e-10) {
  const auto prob = make_problem(x_prior, y, C, w_sq, V, loss);
  return full_update(prob, natural_order(static_cast<int>(y.size())), {tol, 100000}).z;
}

inline MeasurementUpdate measurement_update(const MeasurementProblem& prob, const UpdateMode& mode) {
  const auto order = mode.order_for(static_cast<int>(prob.y.size()));
  if (mode.kind == UpdateMode::Kind::FullNumeric) return full_update(prob, order, mode.full);
  return componentwise_update(prob, order);
}

/// One prediction + update: consumes y_{t+1} and returns the state at t+1.
inline ObserverState step(const ObserverState& obs, const Vector& y, const SystemModel& model, const LossSpec& loss,
                          const WeightingPolicy& weights, const UpdateMode& mode) {
  const Vector x_prior = predict(obs, model);
  const std::size_t t1 = obs.t + 1;
  ObserverState next;
  next.t = t1;
  next.w_sq = weights.next_w_sq(obs.w_sq, model, obs.t);
  require_dims(y.size() == model.n_y, "measurement has the wrong dimension");
  auto r = measurement_update(make_problem(x_prior, y, model.C(t1), next.w_sq, weights.v_at(t1), loss), mode);
  next.x_hat = std::move(r.z);
  next.phi = std::move(r.phi);
  require(next.x_hat.allFinite(), ErrorCode::NonFiniteState, "update produced NaN/Inf");
  return next;
}

}  // namespace proxobs
