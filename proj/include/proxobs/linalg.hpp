#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "proxobs/errors.hpp"

namespace proxobs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Minimum eigenvalue a matrix must exceed to be accepted as SPD.
inline constexpr double kSpdEigenFloor = 1e-12;

/// sign(0) == 0.
inline double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline bool is_finite(const Vector& v) { return v.allFinite(); }

inline bool is_symmetric(const Matrix& m, double tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline bool is_diagonal(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

inline Vector symmetric_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eigenvalue(const Matrix& m) { return symmetric_eigenvalues(m).minCoeff(); }
inline double max_eigenvalue(const Matrix& m) { return symmetric_eigenvalues(m).maxCoeff(); }

inline bool is_spd(const Matrix& m) {
  return m.rows() == m.cols() && m.rows() > 0 && is_symmetric(m) && m.allFinite() &&
         min_eigenvalue(m) > kSpdEigenFloor;
}

inline void require_spd(const Matrix& m, ErrorCode code, const std::string& name) {
  require(is_spd(m), code, name + " must be symmetric positive definite");
}

/// Symmetric square root via eigendecomposition, optionally raised to the power -1.
inline Matrix spd_power_half(const Matrix& m, bool inverse) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > kSpdEigenFloor,
          ErrorCode::SingularInput, "matrix square root needs an SPD argument");
  Vector d = es.eigenvalues().cwiseSqrt();
  if (inverse) d = d.cwiseInverse();
  return symmetrize(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

inline Matrix spd_sqrt(const Matrix& m) { return spd_power_half(m, false); }
inline Matrix spd_inv_sqrt(const Matrix& m) { return spd_power_half(m, true); }

inline Matrix spd_inverse(const Matrix& m) {
  Eigen::LLT<Matrix> llt(symmetrize(m));
  require(llt.info() == Eigen::Success, ErrorCode::SingularInput, "SPD inverse failed");
  return symmetrize(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

inline double spectral_radius(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline void require_dims(bool ok, const std::string& what) {
  require(ok, ErrorCode::DimensionMismatch, what);
}

}  // namespace proxobs
