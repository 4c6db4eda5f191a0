#pragma once

#include "dublid/grid.hpp"

namespace dublid {

/// Scaling of the transform pair. `Backward` (the project-wide default) is
/// the unnormalized forward DFT with a 1/(HW) inverse; `Ortho` scales both
/// directions by 1/sqrt(HW).
enum class DftNorm { Backward, Ortho };

ComplexGrid dft2(const RealGrid& g, DftNorm norm = DftNorm::Backward);
ComplexGrid dft2(const ComplexGrid& g, DftNorm norm = DftNorm::Backward);

/// Inverse transform keeping the real part. When `max_imag` is given it
/// receives the largest discarded imaginary magnitude.
RealGrid idft2(const ComplexGrid& spectrum, double* max_imag = nullptr,
               DftNorm norm = DftNorm::Backward);
ComplexGrid idft2_complex(const ComplexGrid& spectrum, DftNorm norm = DftNorm::Backward);

/// Circular convolution of `a` with `small` zero-padded to a's grid (top-left
/// tap at the origin).
RealGrid circular_convolve(const RealGrid& a, const RealGrid& small);

/// Spectrum of a small array zero-padded (top-left anchored) to h x w.
ComplexGrid padded_spectrum(const RealGrid& small, std::size_t h, std::size_t w);

}  // namespace dublid
