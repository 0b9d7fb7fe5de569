#include <random>

#include <benchmark/benchmark.h>

#include "perfmc/fourier.hpp"
#include "perfmc/periodicity.hpp"
#include "perfmc/phantom.hpp"
#include "perfmc/prox.hpp"
#include "perfmc/registration.hpp"
#include "perfmc/rpca.hpp"
#include "perfmc/sampling.hpp"

using namespace perfmc;

namespace {

Eigen::MatrixXcd random_casorati(Index n, Index t, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(n, t);
  for (Index j = 0; j < t; ++j)
    for (Index i = 0; i < n; ++i) m(i, j) = {g(rng), g(rng)};
  return m;
}

const Phantom& desk_phantom() {
  static const Phantom ph = generate_phantom(PhantomSpec::desk());
  return ph;
}

}  // namespace

static void BM_Svt(benchmark::State& state) {
  const Index side = state.range(0);
  const Eigen::MatrixXcd m = random_casorati(side * side, 32, 1);
  for (auto _ : state) benchmark::DoNotOptimize(svt(m, 5.0));
}
BENCHMARK(BM_Svt)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_Fft2Frames(benchmark::State& state) {
  const Index side = state.range(0);
  ComplexSeries x = ComplexSeries::from_casorati({side, side, 32}, random_casorati(side * side, 32, 2));
  for (auto _ : state) {
    fft2_frames(x);
    ifft2_frames(x);
  }
}
BENCHMARK(BM_Fft2Frames)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_SoftThreshold(benchmark::State& state) {
  const Eigen::MatrixXcd m = random_casorati(64 * 64, 32, 3);
  for (auto _ : state) benchmark::DoNotOptimize(soft_threshold(m, 0.5));
}
BENCHMARK(BM_SoftThreshold)->Unit(benchmark::kMillisecond);

static void BM_SolverStep(benchmark::State& state) {
  const auto variant = static_cast<SolverVariant>(state.range(0));
  const KSpaceData d = undersample_phantom(desk_phantom().noisy, 4.0, 7);
  const RpcaProblem problem(d);
  SolverConfig cfg;
  cfg.variant = variant;
  SolverState s = zero_state(problem);
  for (int k = 0; k < 5; ++k) s = step_prox_jacobian(s, problem, cfg);
  for (auto _ : state) {
    SolverState next = variant == SolverVariant::gauss_seidel ? step_gauss_seidel(s, problem, cfg)
                                                              : step_prox_jacobian(s, problem, cfg);
    benchmark::DoNotOptimize(next.L.data());
  }
  state.SetLabel(to_string(variant));
}
BENCHMARK(BM_SolverStep)
    ->Arg(static_cast<int>(SolverVariant::gauss_seidel))
    ->Arg(static_cast<int>(SolverVariant::prox_jacobian))
    ->Unit(benchmark::kMillisecond);

static void BM_Objective(benchmark::State& state) {
  const KSpaceData d = undersample_phantom(desk_phantom().noisy, 4.0, 7);
  const RpcaProblem problem(d);
  SolverConfig cfg;
  SolverState s = zero_state(problem);
  for (int k = 0; k < 5; ++k) s = step_prox_jacobian(s, problem, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(objective(s, problem, cfg));
}
BENCHMARK(BM_Objective)->Unit(benchmark::kMillisecond);

static void BM_PeriodicSplit(benchmark::State& state) {
  const RealSeries s = real_part(desk_phantom().truth.clean);
  for (auto _ : state) benchmark::DoNotOptimize(split_sparse_component(s, 3, 0.05));
}
BENCHMARK(BM_PeriodicSplit)->Unit(benchmark::kMillisecond);

static void BM_DemonsPair(benchmark::State& state) {
  const RealSeries s = real_part(desk_phantom().truth.clean);
  const Image fixed = frame_image(s, 0);
  const Image moving = frame_image(s, 1);
  RegistrationConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(register_pair(fixed, moving, cfg));
}
BENCHMARK(BM_DemonsPair)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
