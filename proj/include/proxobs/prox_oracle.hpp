#pragma once

// Numerical reference for the closed-form proxes. It only evaluates loss
// values: the minimizer of 1/2|z - x|^2 + l(a^T z + b) lies on the line
// z = x - s a, so the problem reduces to a convex 1-D search in s (nested
// with a search in phi for the Lasso loss).

#include <cmath>
#include <functional>
#include <utility>

#include "proxobs/errors.hpp"
#include "proxobs/scalar_prox.hpp"

namespace proxobs {

struct OracleOptions {
  double tol = 1e-10;
  int max_expansions = 200;
  int max_iterations = 500;
};

/// Returns [lo, hi] containing a minimizer of the convex function f.
inline std::pair<double, double> bracket_minimum(const std::function<double(double)>& f, double start,
                                                 double step, int max_expansions) {
  const double f0 = f(start);
  double dir = 1.0;
  double f1 = f(start + step);
  if (!(f1 < f0)) {
    const double fm = f(start - step);
    if (!(fm < f0)) return {start - step, start + step};
    dir = -1.0;
    f1 = fm;
  }
  double prev = start, cur = start + dir * step, fcur = f1;
  for (int k = 0; k < max_expansions; ++k) {
    step *= 2.0;
    const double next = cur + dir * step;
    const double fnext = f(next);
    if (!(fnext < fcur)) return dir > 0 ? std::pair{prev, next} : std::pair{next, prev};
    prev = cur;
    cur = next;
    fcur = fnext;
  }
  fail(ErrorCode::NoConvergence, "bracket expansion exceeded its bound");
}

/// Golden-section search for the minimizer of a convex f on [lo, hi].
inline double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                                      double tol, int max_iterations) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iterations && hi - lo > tol; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

inline double minimize_convex_1d(const std::function<double(double)>& f, double start, double step,
                                 const OracleOptions& opt) {
  const auto [lo, hi] = bracket_minimum(f, start, step, opt.max_expansions);
  return golden_section_minimize(f, lo, hi, opt.tol, opt.max_iterations);
}

/// Numerical prox of z -> l(a^T z + b) at x.
inline ProxResult prox_oracle_1d(const Vector& x, const AffineForm& form, const LossSpec& spec,
                                 const OracleOptions& opt = {}) {
  spec.validate();
  require_dims(form.a.size() == x.size(), "affine direction and point differ in length");
  const double nsq = form.a.squaredNorm();
  require(nsq > 0.0, ErrorCode::ZeroDirection, "affine direction must be nonzero");
  const double p = form.eval(x);
  const double step = 1.0 + std::abs(p) / nsq;

  if (spec.kind != LossKind::Lasso) {
    auto objective = [&](double s) { return 0.5 * s * s * nsq + loss_value(spec, p - s * nsq); };
    const double s = minimize_convex_1d(objective, 0.0, step, opt);
    return {x - s * form.a, {}};
  }

  auto best_phi = [&](double s) {
    const double e = p - s * nsq;
    auto inner = [&](double phi) { return lasso_joint_value(spec, e, phi); };
    return minimize_convex_1d(inner, 0.0, 1.0 + std::abs(e), opt);
  };
  auto outer = [&](double s) {
    const double phi = best_phi(s);
    return 0.5 * s * s * nsq + lasso_joint_value(spec, p - s * nsq, phi);
  };
  const double s = minimize_convex_1d(outer, 0.0, step, opt);
  return {x - s * form.a, best_phi(s)};
}

}  // namespace proxobs
