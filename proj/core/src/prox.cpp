#include "perfmc/prox.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <string>

#include "perfmc/error.hpp"

namespace perfmc {

namespace {

// Tall-skinny path: eigen-decompose the small Gram matrix m^H m = V S^2 V^H and
// apply the shrinkage as m V diag(max(0, 1 - threshold / s)) V^H. Singular
// values below ~1e-7 of the largest are not resolved, which is harmless unless
// the threshold is that small.
template <typename Matrix>
bool svt_gram(const Matrix& m, double threshold, double* nuclear, Matrix& out) {
  Matrix gram = Matrix::Zero(m.cols(), m.cols());
  gram.template selfadjointView<Eigen::Lower>().rankUpdate(m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) return false;
  // Eigenvalues ascend, so the retained directions are the trailing columns.
  const Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Index t = s.size();
  const double smax = t ? s(t - 1) : 0.0;
  if (threshold < 1e-6 * smax) return false;
  Eigen::Index rank = 0;
  while (rank < t && s(t - 1 - rank) > threshold) ++rank;
  double nn = 0.0;
  Eigen::VectorXd shrink(rank);
  for (Eigen::Index k = 0; k < rank; ++k) {
    const double sk = s(t - rank + k);
    shrink(k) = 1.0 - threshold / sk;
    nn += sk - threshold;
  }
  if (nuclear != nullptr) *nuclear = nn;
  if (rank == 0) {
    out = Matrix::Zero(m.rows(), m.cols());
    return true;
  }
  const auto v = eig.eigenvectors().rightCols(rank);
  out = (m * v) * (shrink.asDiagonal() * v.adjoint());
  return true;
}

template <typename Matrix>
Matrix svt_impl(const Matrix& m, double threshold, double* nuclear) {
  if (!(threshold >= 0.0)) throw ConfigError("svt: threshold must be nonnegative");
  if (nuclear != nullptr) *nuclear = 0.0;
  if (m.size() == 0) return m;
  if (m.rows() >= 4 * m.cols()) {
    Matrix out;
    if (svt_gram(m, threshold, nuclear, out)) return out;
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw NumericalError("svt: SVD failed to converge on a " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " matrix");
  Eigen::VectorXd s = (svd.singularValues().array() - threshold).max(0.0).matrix();
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > 0.0) ++rank;
  if (nuclear != nullptr) *nuclear = s.head(rank).sum();
  if (rank == 0) return Matrix::Zero(m.rows(), m.cols());
  return svd.matrixU().leftCols(rank) * s.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).adjoint();
}

}  // namespace

MatrixXcd svt(const MatrixXcd& m, double threshold, double* nuclear) { return svt_impl(m, threshold, nuclear); }
Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double threshold, double* nuclear) {
  return svt_impl(m, threshold, nuclear);
}

Eigen::VectorXd singular_values(const MatrixXcd& m) {
  if (m.size() == 0) return {};
  Eigen::BDCSVD<MatrixXcd> svd(m);
  if (svd.info() != Eigen::Success) throw NumericalError("singular_values: SVD failed to converge");
  return svd.singularValues();
}

double nuclear_norm(const MatrixXcd& m) { return singular_values(m).sum(); }

}  // namespace perfmc
