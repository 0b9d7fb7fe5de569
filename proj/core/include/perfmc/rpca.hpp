#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "perfmc/array.hpp"

namespace perfmc {

enum class SolverVariant { gauss_seidel, jacobian, prox_jacobian, ls_baseline };

std::string to_string(SolverVariant v);
SolverVariant parse_solver_variant(std::string_view name);

/// Parameters of the stable robust-PCA problem
///
///   min  lambda_l ||L||_* + lambda_s ||S||_1 + 1/(2 mu) ||F_u Z||_F^2   s.t.  L + S + Z = M
///
/// and of the ADMM iteration used to solve it. `tau` is the weight of the
/// proximal terms (tau*beta/2)||X - X_k||^2 in the prox-Jacobian scheme; the
/// three-block scheme is guaranteed to converge for tau > 2.
struct SolverConfig {
  double lambda_l = 0.005;
  double lambda_s = 0.004;
  double mu = 1.0;
  double beta = 0.5;
  double tau = 2.001;
  int max_iters = 500;
  double tol = 1e-6;
  SolverVariant variant = SolverVariant::prox_jacobian;
  /// Run the three Jacobian block updates on separate threads. Results are
  /// identical either way.
  bool parallel_blocks = true;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double constraint_violation = 0.0;
};

enum class SolverStatus { converged, max_iterations, diverged };
std::string to_string(SolverStatus s);

/// The observed Casorati matrix M and, for undersampled data, the sampling
/// mask that restricts the noise penalty to measured k-space entries.
class RpcaProblem {
 public:
  /// Fully sampled observation: the noise penalty is (1/2mu)||Z||_F^2.
  explicit RpcaProblem(const ComplexSeries& observed);
  /// Undersampled observation: M is the zero-filled image F_u^H D and Z is
  /// free on unmeasured k-space entries.
  explicit RpcaProblem(const KSpaceData& data);

  const Shape& shape() const { return shape_; }
  const Eigen::MatrixXcd& observed() const { return m_; }
  double observed_norm() const { return m_norm_; }
  bool masked() const { return mask_.has_value(); }

  /// argmin_Z (1/2mu)||F_u Z||^2 + (beta/2)||Z - v||^2.
  /// Without a mask this is v * mu*beta/(1 + mu*beta).
  Eigen::MatrixXcd noise_prox(const Eigen::MatrixXcd& v, double mu, double beta) const;
  /// ||F_u Z||_F^2 (||Z||_F^2 without a mask).
  double noise_energy(const Eigen::MatrixXcd& z) const;

 private:
  Shape shape_;
  Eigen::MatrixXcd m_;
  double m_norm_ = 0.0;
  std::optional<SamplingMask> mask_;
};

/// ADMM iterate. L, S, Z, Y are n x t Casorati matrices.
struct SolverState {
  Eigen::MatrixXcd L, S, Z, Y;
  int iteration = 0;
  double nuclear_norm_l = 0.0;  // ||L||_*, tracked from the last SVT
};

SolverState zero_state(const RpcaProblem& problem);

/// One sweep of the sequential (Gauss-Seidel) ADMM: each block sees the
/// freshest iterates.
SolverState step_gauss_seidel(const SolverState& state, const RpcaProblem& problem, const SolverConfig& cfg);

/// One sweep of the Jacobian ADMM: all primal blocks read only iteration-k values.
SolverState step_jacobian(const SolverState& state, const RpcaProblem& problem, const SolverConfig& cfg);

/// Jacobian ADMM with proximal terms (tau*beta/2)||X - X_k||^2 on every block:
///   X_{k+1} = prox_{f_X / (beta(1+tau))}((Y_k/beta + M - sum_{other} X'_k + tau X_k) / (1 + tau)).
/// tau = 0 is exactly step_jacobian.
SolverState step_prox_jacobian(const SolverState& state, const RpcaProblem& problem, const SolverConfig& cfg);

enum class Block { low_rank, sparse, noise };

namespace detail {
/// Jacobian sweep with an explicit primal evaluation order (used to check
/// order independence).
SolverState jacobian_sweep(const SolverState& state, const RpcaProblem& problem, const SolverConfig& cfg, double tau,
                           std::array<Block, 3> order, bool parallel);
}  // namespace detail

/// lambda_l ||L||_* + lambda_s ||S||_1 + (1/2mu)||F_u Z||^2.
double objective(const SolverState& state, const RpcaProblem& problem, const SolverConfig& cfg);
/// ||L + S + Z - M||_F / ||M||_F (absolute when M = 0).
double constraint_violation(const SolverState& state, const RpcaProblem& problem);

struct Decomposition {
  ComplexSeries L, S, Z;
  Eigen::MatrixXcd Y;
  std::vector<IterationRecord> history;
  SolverStatus status = SolverStatus::max_iterations;
  SolverVariant variant = SolverVariant::prox_jacobian;

  int iterations() const { return static_cast<int>(history.size()); }
  bool converged() const { return status == SolverStatus::converged; }
  /// L + S; the reconstructed image series without the noise term.
  ComplexSeries reconstruction() const { return L + S; }
};

/// Runs the ADMM variant selected by cfg.variant from the zero state until the
/// relative constraint violation drops to cfg.tol or cfg.max_iters is reached.
/// NaN/Inf iterates throw NumericalError except for the Jacobian variant, whose
/// divergence is reported through `status` and `history`.
Decomposition solve_stable_rpca(const RpcaProblem& problem, const SolverConfig& cfg);
Decomposition solve_stable_rpca(const ComplexSeries& m, const SolverConfig& cfg);
Decomposition solve_stable_rpca(const KSpaceData& d, const SolverConfig& cfg);

/// L+S baseline: alternating SVT / soft thresholding followed by re-insertion
/// of the measured k-space samples. Z is identically zero. The history records
/// the objective lambda_l||L||_* + lambda_s||S||_1 + 1/2||F_u(L+S) - D||^2 and
/// the relative data residual ||F_u(L+S) - D|| / ||D||; the run stops when the
/// relative change of the data-consistent iterate drops to cfg.tol.
Decomposition solve_ls_baseline(const KSpaceData& d, const SolverConfig& cfg);

/// Dispatches on cfg.variant, including the baseline.
Decomposition reconstruct(const KSpaceData& d, const SolverConfig& cfg);

void write_history_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& history);

}  // namespace perfmc
