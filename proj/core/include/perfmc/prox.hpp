#pragma once

#include <cmath>
#include <complex>

#include <Eigen/Core>

namespace perfmc {

using MatrixXcd = Eigen::MatrixXcd;

/// Singular value thresholding U max(S - threshold, 0) V^*.
/// Uses a thin SVD, so the cost is linear in the long dimension.
/// Throws NumericalError when the SVD does not converge. If `nuclear` is
/// given it receives the nuclear norm of the result.
MatrixXcd svt(const MatrixXcd& m, double threshold, double* nuclear = nullptr);
Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double threshold, double* nuclear = nullptr);

/// Singular values of `m`, descending.
Eigen::VectorXd singular_values(const MatrixXcd& m);
double nuclear_norm(const MatrixXcd& m);

inline double soft_threshold(double x, double threshold) {
  if (x > threshold) return x - threshold;
  if (x < -threshold) return x + threshold;
  return 0.0;
}

/// Shrinks the magnitude and keeps the phase.
inline std::complex<double> soft_threshold(std::complex<double> x, double threshold) {
  const double a2 = x.real() * x.real() + x.imag() * x.imag();
  if (a2 <= threshold * threshold) return {};
  const double a = std::sqrt(a2);
  return x * ((a - threshold) / a);
}

template <typename Derived>
typename Derived::PlainObject soft_threshold(const Eigen::MatrixBase<Derived>& m, double threshold) {
  return m.unaryExpr([threshold](const typename Derived::Scalar& v) { return soft_threshold(v, threshold); });
}

}  // namespace perfmc
