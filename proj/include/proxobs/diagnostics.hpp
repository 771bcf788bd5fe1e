#pragma once

// Stability and robustness certificates: D_t, G_t and Sigma_t along the
// error dynamics e_t = A_{t-1} e_{t-1} - W_t^2 xi_t, the implicit subgradient
// xi solving xi in df(x - W^2 xi), observability grammians, and the
// steady-state bound for saturated observers.
//
// Here f_t(e) = psi(V_t^{-1} C_t e) is the noise-free measurement penalty.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "proxobs/errors.hpp"
#include "proxobs/linalg.hpp"
#include "proxobs/measurement.hpp"
#include "proxobs/observer.hpp"
#include "proxobs/scalar_prox.hpp"
#include "proxobs/system.hpp"

namespace proxobs {

struct CertificateReport {
  std::string name;
  bool satisfied = true;
  std::optional<Vector> witness;  // present iff !satisfied
  double margin = 0.0;
  std::vector<std::pair<std::string, double>> values;  // extra figures for reports
};

/// Time-indexed matrices entering the certificates. w_sq(t) is W_t^2.
struct CertificateSystem {
  MatrixSequence A, C, w_sq, V;

  static CertificateSystem lti(const Matrix& A, const Matrix& C, const Matrix& w_sq, const Matrix& V) {
    return {constant_sequence(A), constant_sequence(C), constant_sequence(w_sq), constant_sequence(V)};
  }
};

/// W_0^2 .. W_{horizon}^2 under the given policy.
inline std::vector<Matrix> weight_sequence(const SystemModel& model, const WeightingPolicy& weights,
                                           std::size_t horizon) {
  std::vector<Matrix> out{weights.initial_w_sq(model.n)};
  for (std::size_t t = 0; t < horizon; ++t) out.push_back(weights.next_w_sq(out.back(), model, t));
  return out;
}

inline MatrixSequence from_vector(std::vector<Matrix> seq) {
  return [seq = std::move(seq)](std::size_t t) { return seq.at(t); };
}

/// psi(V^{-1} C e).
inline double noise_free_penalty(const LossSpec& loss, const Matrix& C, const Matrix& V, const Vector& e) {
  return measurement_penalty(loss, weight_inverse(V), -(C * e));
}

/// D_t(e) = e^T (A_{t-1}^T W_t^{-2} A_{t-1} - W_{t-1}^{-2}) e - 2 psi(V_{t-1}^{-1} C_{t-1} e).
inline double eval_D(const Vector& e, std::size_t t, const CertificateSystem& sys, const LossSpec& loss) {
  require(t >= 1, ErrorCode::InvalidArgument, "D_t is defined for t >= 1");
  const Matrix A = sys.A(t - 1);
  const Vector Ae = A * e;
  const double now = Ae.dot(sys.w_sq(t).llt().solve(Ae));
  const double before = e.dot(sys.w_sq(t - 1).llt().solve(e));
  return now - before - 2.0 * noise_free_penalty(loss, sys.C(t - 1), sys.V(t - 1), e);
}

/// Sampling-based falsifier for D_t(e) <= 0 over t = 1..t_max.
inline CertificateReport check_D_condition(const CertificateSystem& sys, const LossSpec& loss, int sample_count,
                                           double radius, std::size_t t_max = 1, std::uint64_t seed = 0) {
  require(sample_count >= 1, ErrorCode::InvalidArgument, "sample_count must be >= 1");
  require(radius > 0.0, ErrorCode::InvalidArgument, "radius must be positive");
  const Eigen::Index n = sys.A(0).rows();
  std::vector<Vector> dirs;
  for (Eigen::Index i = 0; i < n; ++i) {
    dirs.push_back(Vector::Unit(n, i));
    dirs.push_back(-Vector::Unit(n, i));
  }
  // Golden-ratio lattice on the cube, then random Gaussian directions.
  const double g = 0.6180339887498949;
  for (int k = 1; k <= sample_count; ++k) {
    Vector d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = std::fmod(k * std::pow(g, static_cast<double>(i + 1)), 1.0);
      d(i) = 2.0 * u - 1.0;
    }
    if (d.norm() > 0) dirs.push_back(d.normalized());
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int k = 0; k < sample_count; ++k) {
    Vector d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = N(rng);
    if (d.norm() > 0) dirs.push_back(d.normalized());
  }
  CertificateReport rep{"D_condition", true, std::nullopt, -std::numeric_limits<double>::infinity(), {}};
  Vector worst;
  for (std::size_t t = 1; t <= t_max; ++t)
    for (const Vector& d : dirs)
      for (double s : {1e-3, 1e-2, 1e-1, 1.0}) {
        const Vector e = radius * s * d;
        const double v = eval_D(e, t, sys, loss);
        if (v > rep.margin) {
          rep.margin = v;
          worst = e;
        }
      }
  rep.satisfied = rep.margin <= 1e-10;
  if (!rep.satisfied) rep.witness = worst;
  rep.values.push_back({"samples", static_cast<double>(dirs.size() * 4 * t_max)});
  return rep;
}

struct XiResult {
  Vector xi;
  Vector z_star;  // x - W^2 xi
  Vector theta;   // per-sensor multipliers, xi = -C^T theta (robust losses)
  double membership_residual = 0.0;
};

inline double interval_distance(double v, std::pair<double, double> iv) {
  if (v < iv.first) return iv.first - v;
  if (v > iv.second) return v - iv.second;
  return 0.0;
}

/// Largest violation of xi in df(z) for f(z) = psi(V^{-1}(y - C z)); theta certifies the robust case.
inline double membership_residual(const Vector& xi, const Vector& z, const Vector& theta, const Vector& y,
                                  const Matrix& C, const Matrix& v_inv, const LossSpec& loss, double delta = 1e-9) {
  const Vector r = y - C * z;
  if (loss.kind == LossKind::Quadratic) {
    const Vector grad = -*loss.alpha * C.transpose() * (v_inv.transpose() * (v_inv * r));
    return (xi - grad).cwiseAbs().maxCoeff();
  }
  const auto specs = sensor_losses(loss, v_inv);
  double worst = (xi + C.transpose() * theta).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < r.size(); ++i)
    worst = std::max(worst, interval_distance(theta(i), derivative_interval(specs[static_cast<std::size_t>(i)], r(i), delta)));
  return worst;
}

/// The unique xi with xi in df(x - W^2 xi): z* = prox of f in the W^2 metric, xi = W^{-2}(x - z*).
inline XiResult solve_xi(const Vector& x, const Matrix& C, const Matrix& V, const LossSpec& loss, const Matrix& w_sq,
                         double tol = 1e-13) {
  require_spd(w_sq, ErrorCode::SingularInput, "W^2");
  const Vector y = Vector::Zero(C.rows());
  const auto prob = make_problem(x, y, C, w_sq, V, loss);
  const MeasurementUpdate u = full_update(prob, natural_order(static_cast<int>(C.rows())), {tol, 200000});
  XiResult out;
  out.z_star = u.z;
  out.theta = u.theta;
  out.xi = w_sq.llt().solve(x - u.z);
  out.membership_residual = membership_residual(out.xi, out.z_star, out.theta, y, C, prob.v_inv, loss);
  require(out.membership_residual <= 1e-8, ErrorCode::NoConvergence,
          "xi fails the subgradient test: residual " + [&] {
            std::ostringstream os;
            os << out.membership_residual;
            return os.str();
          }());
  return out;
}

/// Minimum-norm element of df(e).
inline Vector min_norm_subgradient(const Vector& e, const Matrix& C, const Matrix& V, const LossSpec& loss) {
  const Matrix v_inv = weight_inverse(V);
  if (loss.kind == LossKind::Quadratic) return *loss.alpha * C.transpose() * (v_inv.transpose() * (v_inv * (C * e)));
  const auto specs = sensor_losses(loss, v_inv);
  const Vector r = -(C * e);
  const Eigen::Index m = C.rows();
  std::vector<std::pair<double, double>> box;
  Vector g(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    box.push_back(derivative_interval(specs[static_cast<std::size_t>(i)], r(i)));
    g(i) = std::clamp(0.0, box.back().first, box.back().second);
  }
  // Coordinate descent on 1/2 |C^T g|^2 over the box.
  Vector s = C.transpose() * g;
  for (int sweep = 0; sweep < 10000; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double nsq = C.row(i).squaredNorm();
      require(nsq > 0.0, ErrorCode::ZeroRow, "row of C is zero");
      const Vector rest = s - g(i) * C.row(i).transpose();
      const auto k = static_cast<std::size_t>(i);
      const double gi = std::clamp(-rest.dot(C.row(i)) / nsq, box[k].first, box[k].second);
      change = std::max(change, std::abs(gi - g(i)));
      g(i) = gi;
      s = rest + gi * C.row(i).transpose();
    }
    if (change < 1e-15) break;
  }
  return -(C.transpose() * g);
}

/// G_t(e) = e^T W_t^{-2} e + 2 psi(V_t^{-1} C_t e) + xi^T W_t^2 xi, and G_0(e) = e^T W_0^{-2} e.
inline double eval_G(const Vector& e, std::size_t t, const CertificateSystem& sys, const LossSpec& loss,
                     const Vector& xi) {
  const Matrix w_sq = sys.w_sq(t);
  const double quad = e.dot(w_sq.llt().solve(e));
  if (t == 0) return quad;
  return quad + 2.0 * noise_free_penalty(loss, sys.C(t), sys.V(t), e) + xi.dot(w_sq * xi);
}

/// Sigma_t(e): sum of xi_k^T W_k^2 xi_k, k = t-T..t, along the noise-free error recursion from e_{t-T} = e.
/// The first term uses the minimum-norm subgradient at e.
inline double eval_Sigma(const Vector& e, std::size_t t, std::size_t T, const CertificateSystem& sys,
                         const LossSpec& loss) {
  require(t >= T, ErrorCode::InvalidArgument, "Sigma_t needs t >= T");
  const std::size_t k0 = t - T;
  Vector ek = e;
  Vector xi = min_norm_subgradient(ek, sys.C(k0), sys.V(k0), loss);
  double sum = xi.dot(sys.w_sq(k0) * xi);
  for (std::size_t k = k0 + 1; k <= t; ++k) {
    const Vector x = sys.A(k - 1) * ek;
    const Matrix w_sq = sys.w_sq(k);
    const XiResult r = solve_xi(x, sys.C(k), sys.V(k), loss, w_sq);
    ek = r.z_star;
    sum += r.xi.dot(w_sq * r.xi);
  }
  return sum;
}

struct Grammian {
  Matrix matrix;
  std::size_t horizon = 0;
  std::size_t t0 = 0;

  double min_eigenvalue() const { return proxobs::min_eigenvalue(matrix); }
  /// min eigenvalue > 1e-10 * trace.
  bool positive_definite() const {
    const double tr = matrix.trace();
    return tr > 0.0 && min_eigenvalue() > 1e-10 * tr;
  }
};

/// sum_{k=t0}^{t0+T} Phi(k,t0)^T C_k^T C_k Phi(k,t0).
inline Grammian uco_grammian(const MatrixSequence& A, const MatrixSequence& C, std::size_t t0, std::size_t T) {
  const Eigen::Index n = A(t0).rows();
  Matrix phi = Matrix::Identity(n, n);
  Matrix g = Matrix::Zero(n, n);
  for (std::size_t k = t0; k <= t0 + T; ++k) {
    const Matrix block = C(k) * phi;
    g += block.transpose() * block;
    if (k < t0 + T) phi = A(k) * phi;
  }
  return {symmetrize(g), T, t0};
}

struct SingularValueBracket {
  double lower = 1e-8;
  double upper = 1e8;
};

/// Open-loop (A, C) versus closed-loop ((I - L_{k+1} C_{k+1}) A_k, C) grammians.
inline CertificateReport uco_equivalence_check(const MatrixSequence& A, const MatrixSequence& C,
                                               const MatrixSequence& L, std::size_t t0, std::size_t T,
                                               SingularValueBracket bracket = {}) {
  double sv_min = std::numeric_limits<double>::infinity(), sv_max = 0.0;
  for (std::size_t k = t0; k <= t0 + T + 1; ++k) {
    const Matrix Ck = C(k);
    const Matrix F = Matrix::Identity(Ck.rows(), Ck.rows()) - Ck * L(k);
    const Vector sv = Eigen::JacobiSVD<Matrix>(F).singularValues();
    sv_min = std::min(sv_min, sv.minCoeff());
    sv_max = std::max(sv_max, sv.maxCoeff());
  }
  require(sv_min >= bracket.lower && sv_max <= bracket.upper, ErrorCode::UnboundedF,
          "singular values of I - C_k L_k leave [" + std::to_string(bracket.lower) + ", " +
              std::to_string(bracket.upper) + "]");
  MatrixSequence closed = [&A, &C, &L](std::size_t k) -> Matrix {
    const Matrix Ak = A(k);
    const Eigen::Index n = Ak.rows();
    return (Matrix::Identity(n, n) - L(k + 1) * C(k + 1)) * Ak;
  };
  const Grammian open_g = uco_grammian(A, C, t0, T);
  const Grammian closed_g = uco_grammian(closed, C, t0, T);
  CertificateReport rep;
  rep.name = "uco_equivalence";
  const bool open_pd = open_g.positive_definite(), closed_pd = closed_g.positive_definite();
  rep.satisfied = open_pd == closed_pd;
  rep.margin = std::min(open_g.min_eigenvalue() / open_g.matrix.trace(),
                        closed_g.min_eigenvalue() / closed_g.matrix.trace());
  rep.values = {{"open_min_eig", open_g.min_eigenvalue()},
                {"closed_min_eig", closed_g.min_eigenvalue()},
                {"F_sv_min", sv_min},
                {"F_sv_max", sv_max}};
  if (!rep.satisfied) {
    const Matrix& bad = open_pd ? closed_g.matrix : open_g.matrix;
    Eigen::SelfAdjointEigenSolver<Matrix> es(bad);
    rep.witness = es.eigenvectors().col(0);
  }
  return rep;
}

struct DecayEstimate {
  double c = 1.0;
  double lambda = 0.5;
  double spectral_radius = 0.0;
};

/// (c, lambda) with |A^k| <= c lambda^k: lambda halfway between rho(A) and 1,
/// c the worst observed ratio over k <= k_max.
inline DecayEstimate estimate_decay(const Matrix& A, int k_max = 200) {
  const double rho = spectral_radius(A);
  require(rho < 1.0, ErrorCode::InvalidDecay, "A is not Schur stable (spectral radius " + std::to_string(rho) + ")");
  DecayEstimate d;
  d.spectral_radius = rho;
  d.lambda = 0.5 * (rho + 1.0);
  Matrix Ak = Matrix::Identity(A.rows(), A.cols());
  double lam_k = 1.0;
  d.c = 1.0;
  for (int k = 1; k <= k_max; ++k) {
    Ak = A * Ak;
    lam_k *= d.lambda;
    d.c = std::max(d.c, spectral_norm(Ak) / lam_k);
  }
  return d;
}

struct RobustnessBound {
  double delta_psi = 0.0;
  double q = 0.0;
  double R = 0.0;
  double gamma_w = 0.0;
  double total = 0.0;
};

/// R = q delta_psi sqrt(n) |W^2 C^T V^{-1}|_2 with q = c / (1 - lambda); total = q w_max + R.
/// delta_psi needs psi to satisfy the triangle inequality, so only Absolute and Vapnik with eps = 0.
inline RobustnessBound robustness_bound(const Matrix& w_sq, const Matrix& C, const Matrix& V, const LossSpec& loss,
                                        double c, double lambda, double w_max) {
  loss.validate();
  require(lambda > 0.0 && lambda < 1.0, ErrorCode::InvalidDecay, "lambda must lie in (0, 1)");
  require(c > 0.0, ErrorCode::InvalidArgument, "c must be positive");
  require(w_max >= 0.0, ErrorCode::InvalidArgument, "w_max must be nonnegative");
  const bool triangle = loss.kind == LossKind::Absolute || (loss.kind == LossKind::Vapnik && *loss.epsilon == 0.0);
  require(triangle, ErrorCode::InvalidArgument, "bound needs a loss satisfying the triangle inequality");
  RobustnessBound b;
  b.delta_psi = std::max(loss_value(loss, 1.0), loss_value(loss, -1.0));
  b.q = c / (1.0 - lambda);
  const double gain = spectral_norm(w_sq * C.transpose() * weight_inverse(V));
  b.R = b.q * b.delta_psi * std::sqrt(static_cast<double>(w_sq.rows())) * gain;
  b.gamma_w = b.q * w_max;
  b.total = b.gamma_w + b.R;
  return b;
}

/// Error propagation of the component-wise update while every sensor stays
/// inside its linear band: each sensor projects onto c_i^T e = 0 in the W^2 metric.
inline Matrix in_band_closed_loop(const Matrix& A, const Matrix& C, const Matrix& w_sq,
                                  const std::vector<int>& order = {}) {
  const Eigen::Index n = A.rows();
  Matrix P = Matrix::Identity(n, n);
  for (int i : order.empty() ? natural_order(static_cast<int>(C.rows())) : order) {
    const Vector Mc = w_sq * C.row(i).transpose();
    P = (Matrix::Identity(n, n) - Mc * C.row(i) / C.row(i).dot(Mc)) * P;
  }
  return P * A;
}

/// Largest eigenvalue of A^T (Q + A S A^T)^{-1} A - S^{-1}; nonpositive for SPD S, Q.
inline double information_contraction_margin(const Matrix& S, const Matrix& Q, const Matrix& A) {
  Eigen::LLT<Matrix> outer(symmetrize(Q + A * S * A.transpose()));
  require(outer.info() == Eigen::Success, ErrorCode::SingularInput, "Q + A S A^T is not SPD");
  Eigen::LLT<Matrix> inner(symmetrize(S));
  require(inner.info() == Eigen::Success, ErrorCode::SingularInput, "S is not SPD");
  const Matrix lhs = A.transpose() * outer.solve(A);
  const Matrix s_inv = inner.solve(Matrix::Identity(S.rows(), S.cols()));
  return max_eigenvalue(symmetrize(lhs - s_inv));
}

}  // namespace proxobs
