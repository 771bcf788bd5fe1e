#pragma once

// Saturation/deadzone nonlinearities and closed-form proximal operators for
// g(z) = l(a^T z + b), l one of the scalar losses below.
//
// Every closed form has the shape prox_g(x) = x - s * a for a scalar
// coefficient s that depends on x only through p = a^T x + b and on a only
// through |a|^2. prox_coefficient() computes s; the vector entry points are
// thin wrappers. The observer reuses prox_coefficient() in a weighted metric.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "proxobs/errors.hpp"
#include "proxobs/linalg.hpp"

namespace proxobs {

/// Sat_alpha(e): identity on [-alpha, alpha], clipped to +-alpha outside.
inline double sat(double e, double alpha = 1.0) {
  require(alpha > 0.0, ErrorCode::InvalidArgument, "saturation level must be positive");
  if (std::abs(e) > alpha) return alpha * sign(e);
  return e;
}

/// dz_1(e) = e - Sat_1(e).
inline double deadzone(double e) { return e - sat(e, 1.0); }

enum class LossKind { Quadratic, Absolute, Lasso, Huber, AbsLog, Vapnik };

constexpr std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Quadratic: return "quadratic";
    case LossKind::Absolute: return "absolute";
    case LossKind::Lasso: return "lasso";
    case LossKind::Huber: return "huber";
    case LossKind::AbsLog: return "abslog";
    case LossKind::Vapnik: return "vapnik";
  }
  return "unknown";
}

inline LossKind loss_kind_from_string(std::string_view name) {
  for (LossKind k : {LossKind::Quadratic, LossKind::Absolute, LossKind::Lasso, LossKind::Huber,
                     LossKind::AbsLog, LossKind::Vapnik}) {
    if (name == to_string(k)) return k;
  }
  if (name == "abs") return LossKind::Absolute;
  if (name == "ablog" || name == "abs-log" || name == "logabs") return LossKind::AbsLog;
  fail(ErrorCode::InvalidArgument, "unknown loss '" + std::string(name) + "'");
}

/// A scalar loss with its parameters. Only the parameters used by `kind` are set.
///
/// Quadratic: alpha e^2 / 2            Absolute: alpha |e|
/// Huber:     alpha h_mu(e)            AbsLog:   alpha (|e| - ln(1 + mu|e|)/mu)
/// Vapnik:    alpha max(|e| - eps, 0)
/// Lasso:     (lambda/2)(e - phi)^2 + gamma |phi|, jointly in an auxiliary phi;
///            as a function of e alone it is the envelope gamma h_{gamma/lambda}(e).
struct LossSpec {
  LossKind kind = LossKind::Absolute;
  std::optional<double> lambda;
  std::optional<double> gamma;
  std::optional<double> mu;
  std::optional<double> epsilon;
  std::optional<double> alpha;

  static LossSpec quadratic(double alpha = 1.0) { return {LossKind::Quadratic, {}, {}, {}, {}, alpha}; }
  static LossSpec absolute(double alpha) { return {LossKind::Absolute, {}, {}, {}, {}, alpha}; }
  static LossSpec lasso(double lambda, double gamma) { return {LossKind::Lasso, lambda, gamma, {}, {}, {}}; }
  static LossSpec huber(double alpha, double mu) { return {LossKind::Huber, {}, {}, mu, {}, alpha}; }
  static LossSpec abslog(double alpha, double mu) { return {LossKind::AbsLog, {}, {}, mu, {}, alpha}; }
  static LossSpec vapnik(double alpha, double epsilon) { return {LossKind::Vapnik, {}, {}, {}, epsilon, alpha}; }

  void validate() const {
    auto positive = [](const std::optional<double>& v) { return v && std::isfinite(*v) && *v > 0.0; };
    auto nonneg = [](const std::optional<double>& v) { return v && std::isfinite(*v) && *v >= 0.0; };
    const std::string name(to_string(kind));
    auto check = [&](bool ok, const char* what) {
      require(ok, ErrorCode::InvalidArgument, name + " loss: " + what);
    };
    switch (kind) {
      case LossKind::Quadratic:
      case LossKind::Absolute:
        check(nonneg(alpha), "alpha must be >= 0");
        check(!lambda && !gamma && !mu && !epsilon, "unexpected parameter");
        break;
      case LossKind::Lasso:
        check(positive(lambda), "lambda must be > 0");
        check(positive(gamma), "gamma must be > 0");
        check(!mu && !epsilon && !alpha, "unexpected parameter");
        break;
      case LossKind::Huber:
      case LossKind::AbsLog:
        check(nonneg(alpha), "alpha must be >= 0");
        check(positive(mu), "mu must be > 0");
        check(!lambda && !gamma && !epsilon, "unexpected parameter");
        break;
      case LossKind::Vapnik:
        check(nonneg(alpha), "alpha must be >= 0");
        check(nonneg(epsilon), "epsilon must be >= 0");
        check(!lambda && !gamma && !mu, "unexpected parameter");
        break;
    }
  }

  /// The same loss multiplied by w > 0 (for Lasso, the quadratic weight lambda scales).
  LossSpec scaled_by(double w) const {
    LossSpec out = *this;
    if (kind == LossKind::Lasso)
      out.lambda = *lambda * w;
    else
      out.alpha = alpha.value_or(1.0) * w;
    return out;
  }
};

inline double huber(double e, double mu) {
  const double ae = std::abs(e);
  return ae <= mu ? e * e / (2.0 * mu) : ae - 0.5 * mu;
}

/// Value of the scalar loss at e (Lasso: minimized over phi).
inline double loss_value(const LossSpec& spec, double e) {
  const double ae = std::abs(e);
  switch (spec.kind) {
    case LossKind::Quadratic: return *spec.alpha * 0.5 * e * e;
    case LossKind::Absolute: return *spec.alpha * ae;
    case LossKind::Huber: return *spec.alpha * huber(e, *spec.mu);
    case LossKind::AbsLog: return *spec.alpha * (ae - std::log1p(*spec.mu * ae) / *spec.mu);
    case LossKind::Vapnik: return *spec.alpha * std::max(ae - *spec.epsilon, 0.0);
    case LossKind::Lasso: return *spec.gamma * huber(e, *spec.gamma / *spec.lambda);
  }
  return 0.0;
}

/// Lasso objective in (e, phi) before eliminating phi.
inline double lasso_joint_value(const LossSpec& spec, double e, double phi) {
  const double r = e - phi;
  return 0.5 * *spec.lambda * r * r + *spec.gamma * std::abs(phi);
}

/// One-sided derivatives [l'(e-), l'(e+)]; the subdifferential is the closed interval between them.
inline std::pair<double, double> derivative_interval(const LossSpec& spec, double e) {
  switch (spec.kind) {
    case LossKind::Quadratic: return {*spec.alpha * e, *spec.alpha * e};
    case LossKind::Absolute: {
      const double a = *spec.alpha;
      if (e > 0.0) return {a, a};
      if (e < 0.0) return {-a, -a};
      return {-a, a};
    }
    case LossKind::Huber: {
      const double d = *spec.alpha * sat(e / *spec.mu);
      return {d, d};
    }
    case LossKind::AbsLog: {
      const double mu = *spec.mu;
      const double d = *spec.alpha * mu * e / (1.0 + mu * std::abs(e));
      return {d, d};
    }
    case LossKind::Vapnik: {
      const double a = *spec.alpha, eps = *spec.epsilon;
      const double left = e > eps ? a : (e > -eps ? 0.0 : -a);
      const double right = e >= eps ? a : (e >= -eps ? 0.0 : -a);
      if (eps == 0.0 && e == 0.0) return {-a, a};
      return {left, right};
    }
    case LossKind::Lasso: {
      const double g = *spec.gamma;
      const double d = g * sat(e * *spec.lambda / g);
      return {d, d};
    }
  }
  return {0.0, 0.0};
}

/// Derivative interval over [e - delta, e + delta]; absorbs round-off next to kinks.
inline std::pair<double, double> derivative_interval(const LossSpec& spec, double e, double delta) {
  return {derivative_interval(spec, e - delta).first, derivative_interval(spec, e + delta).second};
}

/// Largest absolute subgradient of the loss (Lipschitz constant), infinite for Quadratic.
inline double subgradient_bound(const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::Quadratic: return std::numeric_limits<double>::infinity();
    case LossKind::Lasso: return *spec.gamma;
    default: return *spec.alpha;
  }
}

struct AffineForm {
  Vector a;
  double b = 0.0;

  double eval(const Vector& z) const { return a.dot(z) + b; }
};

struct ProxResult {
  Vector z_star;
  std::optional<double> phi_star;
};

/// prox_g(x) = x - coefficient * a; phi is the Lasso auxiliary minimizer.
struct ScalarStep {
  double coefficient = 0.0;
  std::optional<double> phi;
};

namespace detail {

inline ScalarStep absolute_step(double alpha, double p, double nsq) {
  if (alpha == 0.0) return {0.0, {}};
  return {alpha * sat(p / (alpha * nsq)), {}};
}

inline ScalarStep abslog_step(double alpha, double mu, double p, double nsq) {
  const double s = sign(p);
  if (s == 0.0 || alpha == 0.0) return {0.0, {}};
  const double r = mu * p - s * (1.0 + alpha * mu * nsq);
  const double root = std::sqrt(r * r + 4.0 * mu * std::abs(p));
  // omega is the residual a^T z* + b at the optimum; pick the cancellation-free
  // expression for the same root.
  const double omega = s * r >= 0.0 ? (r + s * root) / (2.0 * mu) : 2.0 * std::abs(p) / (s * root - r);
  return {alpha * mu * omega / (1.0 + s * mu * omega), {}};
}

inline ScalarStep vapnik_step(double alpha, double eps, double p, double nsq) {
  if (eps == 0.0) return absolute_step(alpha, p, nsq);
  if (alpha == 0.0) return {0.0, {}};
  const double ap = std::abs(p);
  const double sigma = eps + alpha * nsq;
  double d;
  if (ap > sigma)
    d = sign(p);
  else if (ap < eps)
    d = 0.0;
  else
    d = (p - eps * sign(p)) / (sigma - eps);
  return {alpha * d, {}};
}

inline ScalarStep lasso_step(double lambda, double gamma, double p, double nsq) {
  const double eta = gamma * (1.0 / lambda + nsq);
  const double rho = p / eta;
  return {gamma * sat(rho), eta * deadzone(rho)};
}

}  // namespace detail

/// Closed-form prox coefficient for l(a^T z + b) at x, given p = a^T x + b and |a|^2.
inline ScalarStep prox_coefficient(const LossSpec& spec, double p, double norm_sq) {
  require(norm_sq > 0.0 && std::isfinite(norm_sq), ErrorCode::ZeroDirection,
          "affine direction must be nonzero");
  switch (spec.kind) {
    case LossKind::Quadratic: {
      const double a = *spec.alpha;
      return {a * p / (1.0 + a * norm_sq), {}};
    }
    case LossKind::Absolute: return detail::absolute_step(*spec.alpha, p, norm_sq);
    case LossKind::Huber: {
      const double a = *spec.alpha;
      if (a == 0.0) return {0.0, {}};
      return {a * sat(p / (*spec.mu + a * norm_sq)), {}};
    }
    case LossKind::AbsLog: return detail::abslog_step(*spec.alpha, *spec.mu, p, norm_sq);
    case LossKind::Vapnik: return detail::vapnik_step(*spec.alpha, *spec.epsilon, p, norm_sq);
    case LossKind::Lasso: return detail::lasso_step(*spec.lambda, *spec.gamma, p, norm_sq);
  }
  return {};
}

/// prox of z -> l(a^T z + b) at x for any supported loss.
inline ProxResult prox(const Vector& x, const AffineForm& form, const LossSpec& spec) {
  spec.validate();
  require_dims(form.a.size() == x.size(), "affine direction and point differ in length");
  const ScalarStep step = prox_coefficient(spec, form.eval(x), form.a.squaredNorm());
  return {x - step.coefficient * form.a, step.phi};
}

inline ProxResult prox_absolute(const Vector& x, const AffineForm& form, double alpha) {
  return prox(x, form, LossSpec::absolute(alpha));
}

inline ProxResult prox_lasso(const Vector& x, const AffineForm& form, double lambda, double gamma) {
  return prox(x, form, LossSpec::lasso(lambda, gamma));
}

inline ProxResult prox_huber(const Vector& x, const AffineForm& form, double alpha, double mu) {
  return prox(x, form, LossSpec::huber(alpha, mu));
}

inline ProxResult prox_ablog(const Vector& x, const AffineForm& form, double alpha, double mu) {
  return prox(x, form, LossSpec::abslog(alpha, mu));
}

inline ProxResult prox_vapnik(const Vector& x, const AffineForm& form, double alpha, double epsilon) {
  return prox(x, form, LossSpec::vapnik(alpha, epsilon));
}

inline ProxResult prox_quadratic(const Vector& x, const AffineForm& form, double alpha) {
  return prox(x, form, LossSpec::quadratic(alpha));
}

/// Objective 1/2|z - x|^2 + l(a^T z + b) (Lasso: with phi, or minimized over phi when absent).
inline double prox_objective(const Vector& x, const AffineForm& form, const LossSpec& spec, const Vector& z,
                             std::optional<double> phi = std::nullopt) {
  const double e = form.eval(z);
  const double loss = (spec.kind == LossKind::Lasso && phi) ? lasso_joint_value(spec, e, *phi)
                                                           : loss_value(spec, e);
  return 0.5 * (z - x).squaredNorm() + loss;
}

}  // namespace proxobs
