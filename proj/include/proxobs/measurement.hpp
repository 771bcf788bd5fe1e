#pragma once

// Measurement-update engine shared by the observer and the certificates.
//
// Solves  min_z 1/2 (z - x)^T M^{-1} (z - x) + psi(V^{-1}(y - C z))  with M = W^2.
// For the robust losses psi(V^{-1} r) = sum_i l_i(r_i), where l_i is the loss
// scaled by lambda_i = (V^{-1})_ii, so V must be diagonal. The quadratic loss
// is alpha/2 |V^{-1} r|^2 for any SPD V.
//
// A single sensor is a prox in the metric M: substituting u = W^{-1} z turns
// it into the affine prox of scalar_prox with a = -W c_i, b = y_i, hence
//   z <- z + s * M c_i,   s from p = y_i - c_i^T z and |a|^2 = c_i^T M c_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "proxobs/errors.hpp"
#include "proxobs/linalg.hpp"
#include "proxobs/scalar_prox.hpp"

namespace proxobs {

/// Per-sensor loss l_i for a diagonal V^{-1}.
inline std::vector<LossSpec> sensor_losses(const LossSpec& loss, const Matrix& v_inv) {
  loss.validate();
  require(is_diagonal(v_inv), ErrorCode::NonDiagonalV, "component-wise losses need a diagonal V");
  std::vector<LossSpec> out;
  out.reserve(static_cast<std::size_t>(v_inv.rows()));
  for (Eigen::Index i = 0; i < v_inv.rows(); ++i) {
    const double w = v_inv(i, i);
    require(w > 0.0 && std::isfinite(w), ErrorCode::SingularInput, "V must have a positive diagonal");
    out.push_back(loss.kind == LossKind::Quadratic ? loss.scaled_by(w * w) : loss.scaled_by(w));
  }
  return out;
}

/// psi(V^{-1}(y - C z)).
inline double measurement_penalty(const LossSpec& loss, const Matrix& v_inv, const Vector& residual) {
  if (loss.kind == LossKind::Quadratic) return 0.5 * *loss.alpha * (v_inv * residual).squaredNorm();
  const auto specs = sensor_losses(loss, v_inv);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < residual.size(); ++i) sum += loss_value(specs[static_cast<std::size_t>(i)], residual(i));
  return sum;
}

inline std::vector<int> natural_order(int n_y) {
  std::vector<int> order(static_cast<std::size_t>(n_y));
  std::iota(order.begin(), order.end(), 0);
  return order;
}

inline void validate_order(const std::vector<int>& order, int n_y) {
  std::vector<bool> seen(static_cast<std::size_t>(n_y), false);
  require(static_cast<int>(order.size()) == n_y, ErrorCode::InvalidArgument, "sensor order is not a permutation");
  for (int i : order) {
    require(i >= 0 && i < n_y && !seen[static_cast<std::size_t>(i)], ErrorCode::InvalidArgument,
            "sensor order is not a permutation");
    seen[static_cast<std::size_t>(i)] = true;
  }
}

struct MeasurementUpdate {
  Vector z;
  Vector theta;                // z = x + M C^T theta (robust losses)
  std::optional<Vector> phi;   // Lasso only
  int sweeps = 0;
  double objective = 0.0;
};

/// Everything the update needs at one time step.
struct MeasurementProblem {
  Vector x;       // prior
  Vector y;
  Matrix C;
  Matrix w_sq;    // M = W^2
  Matrix v_inv;
  LossSpec loss;

  void validate() const {
    const Eigen::Index n = x.size();
    require(x.allFinite(), ErrorCode::NonFiniteState, "prior contains NaN/Inf");
    require(y.allFinite(), ErrorCode::NonFiniteMeasurement, "measurement contains NaN/Inf");
    require_dims(C.cols() == n && C.rows() == y.size(), "C must be n_y x n");
    require_dims(w_sq.rows() == n && w_sq.cols() == n, "W must be n x n");
    require_dims(v_inv.rows() == y.size() && v_inv.cols() == y.size(), "V must be n_y x n_y");
    loss.validate();
  }

  double objective(const Vector& z) const {
    const Vector d = z - x;
    return 0.5 * d.dot(w_sq.llt().solve(d)) + measurement_penalty(loss, v_inv, y - C * z);
  }
};

namespace detail {

struct SensorPrecomp {
  std::vector<LossSpec> specs;
  Matrix MCt;     // columns M c_i
  Vector norm_sq; // c_i^T M c_i
};

inline SensorPrecomp precompute(const MeasurementProblem& prob) {
  SensorPrecomp pc;
  pc.specs = sensor_losses(prob.loss, prob.v_inv);
  pc.MCt = prob.w_sq * prob.C.transpose();
  pc.norm_sq.resize(prob.C.rows());
  for (Eigen::Index i = 0; i < prob.C.rows(); ++i) {
    require(prob.C.row(i).cwiseAbs().maxCoeff() > 0.0, ErrorCode::ZeroRow,
            "row " + std::to_string(i) + " of C is zero");
    pc.norm_sq(i) = prob.C.row(i).dot(pc.MCt.col(i));
  }
  return pc;
}

}  // namespace detail

/// One pass over the sensors in the given order (the component-wise relaxation).
inline MeasurementUpdate componentwise_update(const MeasurementProblem& prob, const std::vector<int>& order) {
  prob.validate();
  validate_order(order, static_cast<int>(prob.y.size()));
  const auto pc = detail::precompute(prob);
  MeasurementUpdate out;
  out.z = prob.x;
  out.theta = Vector::Zero(prob.y.size());
  if (prob.loss.kind == LossKind::Lasso) out.phi = Vector::Zero(prob.y.size());
  for (int i : order) {
    const auto k = static_cast<std::size_t>(i);
    const double p = prob.y(i) - prob.C.row(i).dot(out.z);
    const ScalarStep step = prox_coefficient(pc.specs[k], p, pc.norm_sq(i));
    out.z += step.coefficient * pc.MCt.col(i);
    out.theta(i) = step.coefficient;
    if (out.phi) (*out.phi)(i) = *step.phi;
  }
  out.sweeps = 1;
  out.objective = prob.objective(out.z);
  return out;
}

/// Exact minimizer for the quadratic loss: x + M C^T (V^2/alpha + C M C^T)^{-1} (y - C x).
inline MeasurementUpdate quadratic_update(const MeasurementProblem& prob) {
  prob.validate();
  require(prob.loss.kind == LossKind::Quadratic, ErrorCode::InvalidArgument, "quadratic_update needs a quadratic loss");
  const double alpha = *prob.loss.alpha;
  MeasurementUpdate out;
  out.sweeps = 0;
  if (alpha == 0.0) {
    out.z = prob.x;
    out.theta = Vector::Zero(prob.y.size());
    out.objective = 0.0;
    return out;
  }
  const Matrix V = spd_inverse(prob.v_inv);
  const Matrix MCt = prob.w_sq * prob.C.transpose();
  Eigen::LLT<Matrix> llt(symmetrize(V * V / alpha + prob.C * MCt));
  require(llt.info() == Eigen::Success, ErrorCode::SingularCovariance, "innovation matrix is singular");
  out.theta = llt.solve(prob.y - prob.C * prob.x);
  out.z = prob.x + MCt * out.theta;
  out.objective = prob.objective(out.z);
  return out;
}

struct FullUpdateOptions {
  double tol = 1e-10;
  int max_sweeps = 100000;
};

/// Minimizer of the full measurement objective.
///
/// Robust losses: cyclic dual coordinate ascent. Each sensor removes its own
/// contribution to z and re-solves its scalar prox, so the first sweep equals
/// the component-wise pass. Stops when the largest step and the objective
/// change both drop below tol (relative to the size of x and of the objective).
inline MeasurementUpdate full_update(const MeasurementProblem& prob, const std::vector<int>& order,
                                     const FullUpdateOptions& opt = {}) {
  if (prob.loss.kind == LossKind::Quadratic) return quadratic_update(prob);
  prob.validate();
  validate_order(order, static_cast<int>(prob.y.size()));
  const auto pc = detail::precompute(prob);
  const Eigen::Index m = prob.y.size();
  Vector theta = Vector::Zero(m);
  Vector phi = Vector::Zero(m);
  Vector z = prob.x;
  // tol is relative to the magnitude of the prior.
  const double scale = std::max(1.0, prob.x.cwiseAbs().maxCoeff());
  double prev_obj = prob.objective(z);
  MeasurementUpdate best{z, theta, {}, 0, prev_obj};
  if (prob.loss.kind == LossKind::Lasso) best.phi = phi;
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    double max_step = 0.0;
    for (int i : order) {
      const auto k = static_cast<std::size_t>(i);
      const Vector z_free = z - theta(i) * pc.MCt.col(i);
      const double p = prob.y(i) - prob.C.row(i).dot(z_free);
      const ScalarStep step = prox_coefficient(pc.specs[k], p, pc.norm_sq(i));
      const double delta = step.coefficient - theta(i);
      max_step = std::max(max_step, std::abs(delta) * pc.MCt.col(i).cwiseAbs().maxCoeff());
      theta(i) = step.coefficient;
      if (step.phi) phi(i) = *step.phi;
      z = z_free + theta(i) * pc.MCt.col(i);
    }
    // Rebuild from theta so z carries no accumulated round-off.
    z = prob.x + pc.MCt * theta;
    const double obj = prob.objective(z);
    if (obj <= best.objective) {
      best = {z, theta, {}, sweep, obj};
      if (prob.loss.kind == LossKind::Lasso) best.phi = phi;
    }
    if (max_step < opt.tol * scale && std::abs(prev_obj - obj) < opt.tol * (1.0 + std::abs(obj))) {
      // Near the optimum the objective is flat to rounding, so the earlier
      // best-so-far can hold a less converged theta. Keep the last iterate
      // unless it is worse by more than rounding.
      if (obj <= best.objective + 1e-14 * (1.0 + std::abs(obj))) {
        best = {z, theta, {}, sweep, obj};
        if (prob.loss.kind == LossKind::Lasso) best.phi = phi;
      }
      best.sweeps = sweep;
      return best;
    }
    prev_obj = obj;
  }
  fail(ErrorCode::NoConvergence, "measurement update did not converge");
}

}  // namespace proxobs
