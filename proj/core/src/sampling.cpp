#include "perfmc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace perfmc {

SamplingMask variable_density_mask(Shape shape, double rate, std::uint64_t seed, const MaskOptions& options) {
  if (!(rate >= 1.0)) throw ConfigError("sampling rate must be >= 1");
  if (shape.n1 < 2 || shape.n2 < 1 || shape.t < 1) throw DimensionError("mask shape " + to_string(shape));
  if (rate == 1.0) return full_mask(shape);

  const Index n1 = shape.n1;
  const Index total = std::max<Index>(shape.t, std::llround(static_cast<double>(n1 * shape.t) / rate));
  const double k_max = static_cast<double>(n1) / 2.0;

  SamplingMask mask{Series<std::uint8_t>(shape, 0), rate};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  for (Index f = 0; f < shape.t; ++f) {
    const Index lines = std::min(n1, total / shape.t + (f < total % shape.t ? 1 : 0));
    const Index center = std::clamp<Index>(std::min(options.center_lines, lines / 2), 1, lines);

    std::vector<bool> chosen(static_cast<std::size_t>(n1), false);
    for (Index c = 0; c < center; ++c) {
      const Index k = c - center / 2;
      chosen[static_cast<std::size_t>((k + n1) % n1)] = true;
    }

    // Weighted sampling without replacement by repeated inverse-CDF draws.
    std::vector<double> weight(static_cast<std::size_t>(n1));
    for (Index i = 0; i < n1; ++i) {
      const double k = std::abs(static_cast<double>(signed_frequency(i, n1)));
      weight[static_cast<std::size_t>(i)] = chosen[static_cast<std::size_t>(i)] ? 0.0
                                                                                  : std::pow(1.0 + k / k_max, -options.density_power);
    }
    for (Index picked = center; picked < lines; ++picked) {
      double sum = 0.0;
      for (double w : weight) sum += w;
      double r = uniform(rng) * sum;
      Index pick = -1;
      for (Index i = 0; i < n1; ++i) {
        const double w = weight[static_cast<std::size_t>(i)];
        if (w == 0.0) continue;
        pick = i;
        if (r < w) break;
        r -= w;
      }
      chosen[static_cast<std::size_t>(pick)] = true;
      weight[static_cast<std::size_t>(pick)] = 0.0;
    }

    for (Index i = 0; i < n1; ++i) {
      if (!chosen[static_cast<std::size_t>(i)]) continue;
      for (Index j = 0; j < shape.n2; ++j) mask.keep(i, j, f) = 1;
    }
  }
  return mask;
}

}  // namespace perfmc
