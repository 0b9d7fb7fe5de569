#include "perfmc/rpca.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>

#include "perfmc/fourier.hpp"
#include "perfmc/prox.hpp"

namespace perfmc {

using Eigen::MatrixXcd;

std::string to_string(SolverVariant v) {
  switch (v) {
    case SolverVariant::gauss_seidel: return "gauss_seidel";
    case SolverVariant::jacobian: return "jacobian";
    case SolverVariant::prox_jacobian: return "prox_jacobian";
    case SolverVariant::ls_baseline: return "ls_baseline";
  }
  return "?";
}

SolverVariant parse_solver_variant(std::string_view name) {
  if (name == "gauss_seidel") return SolverVariant::gauss_seidel;
  if (name == "jacobian") return SolverVariant::jacobian;
  if (name == "prox_jacobian") return SolverVariant::prox_jacobian;
  if (name == "ls_baseline") return SolverVariant::ls_baseline;
  throw ConfigError("unknown solver variant '" + std::string(name) + "'");
}

std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iterations: return "max_iterations";
    case SolverStatus::diverged: return "diverged";
  }
  return "?";
}

void SolverConfig::validate() const {
  const auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("solver config: ") + msg);
  };
  require(lambda_l >= 0.0 && std::isfinite(lambda_l), "lambda_l must be finite and >= 0");
  require(lambda_s >= 0.0 && std::isfinite(lambda_s), "lambda_s must be finite and >= 0");
  require(mu > 0.0 && std::isfinite(mu), "mu must be finite and > 0");
  require(beta > 0.0 && std::isfinite(beta), "beta must be finite and > 0");
  require(tau >= 0.0 && std::isfinite(tau), "tau must be finite and >= 0");
  require(tol > 0.0, "tol must be > 0");
  require(max_iters >= 1, "max_iters must be >= 1");
}

// ---------------------------------------------------------------------------
// Problem

namespace {

ComplexSeries as_series(Shape shape, const MatrixXcd& m) { return ComplexSeries::from_casorati(shape, m); }

}  // namespace

RpcaProblem::RpcaProblem(const ComplexSeries& observed) : shape_(observed.shape()), m_(observed.casorati()) {
  m_norm_ = m_.norm();
}

RpcaProblem::RpcaProblem(const KSpaceData& data) : shape_(data.shape()), mask_(data.mask) {
  require_same_shape(data.samples, data.mask.keep, "RpcaProblem");
  m_ = adjoint_undersample(data).casorati();
  m_norm_ = m_.norm();
}

MatrixXcd RpcaProblem::noise_prox(const MatrixXcd& v, double mu, double beta) const {
  const double gain = mu * beta / (1.0 + mu * beta);
  if (!mask_) return v * gain;
  ComplexSeries k = as_series(shape_, v);
  fft2_frames(k);
  auto data = k.data();
  const auto keep = mask_->keep.data();
  for (std::size_t i = 0; i < data.size(); ++i)
    if (keep[i] != 0) data[i] *= gain;
  ifft2_frames(k);
  return k.casorati();
}

double RpcaProblem::noise_energy(const MatrixXcd& z) const {
  if (!mask_) return z.squaredNorm();
  ComplexSeries k = as_series(shape_, z);
  fft2_frames(k);
  apply_mask(k, *mask_);
  return k.casorati().squaredNorm();
}

SolverState zero_state(const RpcaProblem& problem) {
  const auto n = problem.shape().pixels();
  const auto t = problem.shape().t;
  SolverState s;
  s.L = MatrixXcd::Zero(n, t);
  s.S = MatrixXcd::Zero(n, t);
  s.Z = MatrixXcd::Zero(n, t);
  s.Y = MatrixXcd::Zero(n, t);
  return s;
}

double objective(const SolverState& state, const RpcaProblem& problem, const SolverConfig& cfg) {
  return cfg.lambda_l * state.nuclear_norm_l + cfg.lambda_s * state.S.cwiseAbs().sum() +
         problem.noise_energy(state.Z) / (2.0 * cfg.mu);
}

double constraint_violation(const SolverState& state, const RpcaProblem& problem) {
  const double r = (state.L + state.S + state.Z - problem.observed()).norm();
  return problem.observed_norm() > 0.0 ? r / problem.observed_norm() : r;
}

// ---------------------------------------------------------------------------
// Steps

namespace {

void update_multiplier(SolverState& next, const RpcaProblem& problem, const SolverConfig& cfg) {
  next.Y -= cfg.beta * (next.L + next.S + next.Z - problem.observed());
}

}  // namespace

SolverState step_gauss_seidel(const SolverState& state, const RpcaProblem& problem, const SolverConfig& cfg) {
  const MatrixXcd& M = problem.observed();
  const MatrixXcd base = state.Y / cfg.beta + M;
  SolverState next;
  next.L = svt(MatrixXcd(base - state.S - state.Z), cfg.lambda_l / cfg.beta, &next.nuclear_norm_l);
  next.S = soft_threshold(base - next.L - state.Z, cfg.lambda_s / cfg.beta);
  next.Z = problem.noise_prox(base - next.L - next.S, cfg.mu, cfg.beta);
  next.Y = state.Y;
  next.iteration = state.iteration + 1;
  update_multiplier(next, problem, cfg);
  return next;
}

namespace detail {

SolverState jacobian_sweep(const SolverState& state, const RpcaProblem& problem, const SolverConfig& cfg, double tau,
                           std::array<Block, 3> order, bool parallel) {
  const MatrixXcd base = state.Y / cfg.beta + problem.observed();
  const double scale = 1.0 + tau;
  const double beta_eff = cfg.beta * scale;

  SolverState next;
  // Each block only reads iteration-k values, so the three updates commute.
  const auto update = [&](Block b) {
    switch (b) {
      case Block::low_rank:
        next.L = svt(MatrixXcd((base - state.S - state.Z + tau * state.L) / scale), cfg.lambda_l / beta_eff, &next.nuclear_norm_l);
        break;
      case Block::sparse:
        next.S = soft_threshold((base - state.L - state.Z + tau * state.S) / scale, cfg.lambda_s / beta_eff);
        break;
      case Block::noise:
        next.Z = problem.noise_prox((base - state.L - state.S + tau * state.Z) / scale, cfg.mu, beta_eff);
        break;
    }
  };

  if (parallel) {
    auto first = std::async(std::launch::async, update, order[0]);
    auto second = std::async(std::launch::async, update, order[1]);
    update(order[2]);
    first.get();
    second.get();
  } else {
    for (Block b : order) update(b);
  }

  next.Y = state.Y;
  next.iteration = state.iteration + 1;
  update_multiplier(next, problem, cfg);
  return next;
}

}  // namespace detail

SolverState step_jacobian(const SolverState& state, const RpcaProblem& problem, const SolverConfig& cfg) {
  return detail::jacobian_sweep(state, problem, cfg, 0.0, {Block::low_rank, Block::sparse, Block::noise},
                                cfg.parallel_blocks);
}

SolverState step_prox_jacobian(const SolverState& state, const RpcaProblem& problem, const SolverConfig& cfg) {
  return detail::jacobian_sweep(state, problem, cfg, cfg.tau, {Block::low_rank, Block::sparse, Block::noise},
                                cfg.parallel_blocks);
}

// ---------------------------------------------------------------------------
// Drivers

namespace {

Decomposition package(const SolverState& state, const RpcaProblem& problem, std::vector<IterationRecord> history,
                      SolverStatus status, SolverVariant variant) {
  Decomposition d;
  d.L = as_series(problem.shape(), state.L);
  d.S = as_series(problem.shape(), state.S);
  d.Z = as_series(problem.shape(), state.Z);
  d.Y = state.Y;
  d.history = std::move(history);
  d.status = status;
  d.variant = variant;
  return d;
}

// Jacobian runs whose violation grows past this are reported as diverged.
constexpr double kDivergedViolation = 1e6;

}  // namespace

Decomposition solve_stable_rpca(const RpcaProblem& problem, const SolverConfig& cfg) {
  cfg.validate();
  if (cfg.variant == SolverVariant::ls_baseline)
    throw ConfigError("solve_stable_rpca: ls_baseline needs k-space data, use solve_ls_baseline");

  SolverState state = zero_state(problem);
  std::vector<IterationRecord> history;
  history.reserve(static_cast<std::size_t>(cfg.max_iters));
  SolverStatus status = SolverStatus::max_iterations;

  for (int k = 1; k <= cfg.max_iters; ++k) {
    SolverState next;
    try {
      switch (cfg.variant) {
        case SolverVariant::gauss_seidel: next = step_gauss_seidel(state, problem, cfg); break;
        case SolverVariant::jacobian: next = step_jacobian(state, problem, cfg); break;
        default: next = step_prox_jacobian(state, problem, cfg); break;
      }
    } catch (const NumericalError& e) {
      if (cfg.variant == SolverVariant::jacobian) {
        status = SolverStatus::diverged;
        break;
      }
      throw NumericalError(std::string(e.what()) + " (iteration " + std::to_string(k) + ", variant " +
                           to_string(cfg.variant) + ")");
    }

    const double cv = constraint_violation(next, problem);
    const double obj = objective(next, problem, cfg);
    const bool finite = std::isfinite(cv) && std::isfinite(obj) && std::isfinite(next.Y.norm());
    if (!finite) {
      if (cfg.variant == SolverVariant::jacobian) {
        history.push_back({k, obj, cv});
        status = SolverStatus::diverged;
        break;
      }
      throw NumericalError("divergence: non-finite iterate at iteration " + std::to_string(k) + " (variant " +
                           to_string(cfg.variant) + ")");
    }
    history.push_back({k, obj, cv});
    state = std::move(next);
    if (cv <= cfg.tol) {
      status = SolverStatus::converged;
      break;
    }
    if (cfg.variant == SolverVariant::jacobian && cv > kDivergedViolation) {
      status = SolverStatus::diverged;
      break;
    }
  }
  return package(state, problem, std::move(history), status, cfg.variant);
}

Decomposition solve_stable_rpca(const ComplexSeries& m, const SolverConfig& cfg) {
  validate_series(m, "solve_stable_rpca");
  return solve_stable_rpca(RpcaProblem(m), cfg);
}

Decomposition solve_stable_rpca(const KSpaceData& d, const SolverConfig& cfg) {
  validate_series(d.samples, "solve_stable_rpca");
  return solve_stable_rpca(RpcaProblem(d), cfg);
}

Decomposition solve_ls_baseline(const KSpaceData& d, const SolverConfig& cfg) {
  cfg.validate();
  validate_series(d.samples, "solve_ls_baseline");
  const Shape shape = d.shape();
  const double d_norm = d.samples.casorati().norm();

  MatrixXcd M = adjoint_undersample(d).casorati();
  MatrixXcd L_prev = M;
  MatrixXcd L = M;
  MatrixXcd S = MatrixXcd::Zero(M.rows(), M.cols());
  std::vector<IterationRecord> history;
  SolverStatus status = SolverStatus::max_iterations;

  for (int k = 1; k <= cfg.max_iters; ++k) {
    double nuclear = 0.0;
    try {
      L = svt(MatrixXcd(M - S), cfg.lambda_l, &nuclear);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (iteration " + std::to_string(k) + ", variant ls_baseline)");
    }
    S = soft_threshold(M - L_prev, cfg.lambda_s);

    // Data consistency: replace the measured entries of F(L + S) by D.
    ComplexSeries residual = as_series(shape, L + S);
    fft2_frames(residual);
    apply_mask(residual, d.mask);
    residual.casorati() -= d.samples.casorati();
    const double data_residual = residual.casorati().norm();
    ifft2_frames(residual);
    MatrixXcd M_next = L + S - residual.casorati();

    const double change = (M_next - M).norm();
    const double m_norm = M.norm();
    const double obj = cfg.lambda_l * nuclear + cfg.lambda_s * S.cwiseAbs().sum() + 0.5 * data_residual * data_residual;
    const double cv = d_norm > 0.0 ? data_residual / d_norm : data_residual;
    if (!std::isfinite(obj) || !std::isfinite(change))
      throw NumericalError("divergence: non-finite iterate at iteration " + std::to_string(k) + " (variant ls_baseline)");
    history.push_back({k, obj, cv});

    M = std::move(M_next);
    L_prev = L;
    if (change <= cfg.tol * m_norm) {
      status = SolverStatus::converged;
      break;
    }
  }

  Decomposition out;
  out.L = as_series(shape, L);
  out.S = as_series(shape, S);
  out.Z = ComplexSeries(shape);
  out.Y = MatrixXcd::Zero(shape.pixels(), shape.t);
  out.history = std::move(history);
  out.status = status;
  out.variant = SolverVariant::ls_baseline;
  return out;
}

Decomposition reconstruct(const KSpaceData& d, const SolverConfig& cfg) {
  if (cfg.variant == SolverVariant::ls_baseline) return solve_ls_baseline(d, cfg);
  return solve_stable_rpca(d, cfg);
}

void write_history_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "iter,objective,constraint_violation\n";
  out << std::setprecision(17);
  for (const auto& r : history) out << r.iter << ',' << r.objective << ',' << r.constraint_violation << '\n';
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace perfmc
