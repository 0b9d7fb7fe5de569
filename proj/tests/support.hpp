#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "perfmc/array.hpp"
#include "perfmc/rpca.hpp"

namespace perfmc::test {

inline ComplexSeries random_series(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ComplexSeries s(shape);
  for (auto& v : s.data()) v = {g(rng), g(rng)};
  return s;
}

inline RealSeries random_real(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  RealSeries s(shape);
  for (auto& v : s.data()) v = g(rng);
  return s;
}

/// M = L0 + S0 + Z0 on a 64x64x32 grid: L0 is rank 2 (smooth spatial and
/// temporal profiles), S0 has 5% random support with magnitudes in
/// [0.5, 1]*scale and random sign, Z0 is Gaussian with sigma 1e-3.
struct Synthetic {
  ComplexSeries M, L0, S0, Z0;
  double scale = 0.2;
  double noise_sigma = 1e-3;
};

inline Synthetic make_synthetic(std::uint64_t seed, double scale = 0.2) {
  const Shape shape{64, 64, 32};
  const Index n = shape.pixels();
  const Index t = shape.t;
  Synthetic s;
  s.scale = scale;
  s.L0 = ComplexSeries(shape);
  s.S0 = ComplexSeries(shape);
  s.Z0 = ComplexSeries(shape);
  auto L = s.L0.casorati();
  for (Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n - 1);
    const double u1 = std::sin(2 * std::numbers::pi * x) + 1.5;
    const double u2 = std::cos(3 * std::numbers::pi * x);
    for (Index f = 0; f < t; ++f) {
      const double tt = static_cast<double>(f) / static_cast<double>(t - 1);
      L(i, f) = scale * (u1 * (1 + 0.5 * tt) + 0.5 * u2 * std::exp(-3 * tt));
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> g;
  for (auto& v : s.S0.data()) {
    if (u01(rng) >= 0.05) continue;
    const double sign = u01(rng) < 0.5 ? -1.0 : 1.0;
    v = sign * scale * (0.5 + 0.5 * u01(rng));
  }
  for (auto& v : s.Z0.data()) v = s.noise_sigma * g(rng);
  s.M = s.L0 + s.S0 + s.Z0;
  return s;
}

// Weights tuned to the scale of the synthetic suite (see make_synthetic).
inline SolverConfig synthetic_config(SolverVariant v = SolverVariant::prox_jacobian) {
  SolverConfig c;
  c.lambda_l = 0.2;
  c.lambda_s = 0.003125;
  c.mu = 0.2;
  c.beta = 0.25;
  c.tau = 2.001;
  c.max_iters = 500;
  c.variant = v;
  return c;
}

/// F1 score of the support of `s` against `s0`, both thresholded at `threshold`.
inline double support_f1(const ComplexSeries& s, const ComplexSeries& s0, double threshold) {
  Index tp = 0, fp = 0, fn = 0;
  for (Index k = 0; k < s.size(); ++k) {
    const bool est = std::abs(s.data()[k]) > threshold;
    const bool truth = std::abs(s0.data()[k]) > threshold;
    tp += est && truth;
    fp += est && !truth;
    fn += !est && truth;
  }
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("perfmc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace perfmc::test
