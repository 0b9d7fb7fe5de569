#pragma once

#include "perfmc/array.hpp"

namespace perfmc {

/// Per-frame unitary 2-D DFT, scaled by 1/sqrt(n1*n2) in both directions.
/// Spectra are stored unshifted: DC sits at index (0, 0).
void fft2_frames(ComplexSeries& x);
void ifft2_frames(ComplexSeries& x);

/// F_u: unitary spectrum of every frame with unsampled entries set to zero.
KSpaceData forward_undersample(const ComplexSeries& x, const SamplingMask& mask);

/// F_u^H: zero-filled inverse transform of the measured samples.
ComplexSeries adjoint_undersample(const KSpaceData& d);

/// Zeroes every entry of `k` outside the mask.
void apply_mask(ComplexSeries& k, const SamplingMask& mask);

}  // namespace perfmc
