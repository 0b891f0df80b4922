#pragma once

#include <span>

#include "cinerecon/tensor.hpp"

namespace cinerecon {

/// Centered orthonormal 2D DFT applied to every (frame, coil) plane:
/// ifftshift, forward DFT, fftshift, scaled by 1/sqrt(rows*cols).
/// The pixel at (rows/2, cols/2) (floor) is the phase origin and maps to DC at the same index.
ComplexCine fft2c(const ComplexCine& image);

/// Inverse (and adjoint) of fft2c.
ComplexCine ifft2c(const ComplexCine& kspace);

/// Plane-level transforms. `in` and `out` may alias.
void fft2c_plane(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols);
void ifft2c_plane(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols);

/// out[t,h,w] = sqrt(sum_c |x[t,c,h,w]|^2).
RealImageSequence rss_combine(const ComplexCine& image);

/// Elementwise magnitude of a single-coil cine.
RealImageSequence magnitude(const ComplexCine& image);

}  // namespace cinerecon
