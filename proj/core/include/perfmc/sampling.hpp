#pragma once

#include <cstdint>

#include "perfmc/array.hpp"

namespace perfmc {

struct MaskOptions {
  Index center_lines = 8;      // fully sampled low-frequency band, capped by the per-frame line budget
  double density_power = 4.0;  // selection probability ~ (1 + |k|/k_max)^-power
};

/// Cartesian variable-density mask. Whole phase-encode lines (rows, axis 0) are
/// kept; every frame gets a fresh random draw from a generator seeded with `seed`.
/// The total line count is round(n1*t/rate), spread as evenly as possible over
/// frames, so the achieved acceleration matches `rate` up to rounding.
/// rate == 1 yields the full mask.
SamplingMask variable_density_mask(Shape shape, double rate, std::uint64_t seed, const MaskOptions& options = {});

/// Signed frequency index of row `i` in unshifted FFT order.
inline Index signed_frequency(Index i, Index n) { return i < (n + 1) / 2 ? i : i - n; }

}  // namespace perfmc
