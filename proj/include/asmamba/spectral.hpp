#pragma once

#include <complex>
#include <vector>

#include "asmamba/autograd.hpp"

// Real 2D DFT in the half-spectrum layout (H, W/2 + 1), unnormalized forward
// and 1/(HW)-normalized inverse. Backed by FFTW.
namespace asmamba::spectral {

using Complex = std::complex<double>;

int half_width(int width);

/// Forward transform of one H x W plane.
std::vector<Complex> rfft2(const double* x, int height, int width);
/// Full complex forward transform (reference layout, H x W).
std::vector<Complex> fft2(const double* x, int height, int width);
/// Inverse of a half spectrum: the real part of the full inverse transform
/// after Hermitian extension of the columns v > W/2.
void irfft2(const Complex* z, int height, int width, double* out);

struct Spectrum {
  Tensor amplitude;  // (C, H, W/2+1), >= 0
  Tensor phase;      // (C, H, W/2+1), in (-pi, pi]
  int width = 0;     // spatial width of the source
};

Spectrum amplitude_phase_split(const Tensor& x);
Tensor recombine(const Spectrum& s);

/// Wraps an angle difference into (-pi, pi].
double wrap_angle(double a);

// Differentiable pieces. Complex maps use a packed (2C, H, Wh) layout with
// the real parts in the first C channels and the imaginary parts after.
Var rfft2(const Var& x);
Var irfft2(const Var& z, int width);
Var magnitude(const Var& z);
/// z / |z|, with (1, 0) where |z| == 0.
Var phasor(const Var& z);
/// amp (C, H, Wh) times a packed unit phasor (2C, H, Wh).
Var polar_mul(const Var& amp, const Var& unit);

}  // namespace asmamba::spectral
