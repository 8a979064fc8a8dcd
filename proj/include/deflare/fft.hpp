#pragma once

#include "deflare/tensor.hpp"

namespace deflare {

// Orthonormal 2-D real DFT of each channel: S(u,v) = sum_{h,w} x(h,w)
// e^{-2*pi*j(uh/H + vw/W)} / sqrt(HW), stored as the non-redundant
// H x (W/2 + 1) half-spectrum. Throws std::invalid_argument on non-finite
// input.
CTensor rdft2(const Tensor& x);

// Inverse of rdft2 under the same 1/sqrt(HW) normalization. The spectrum is
// extended by conjugate symmetry for the missing columns; imaginary parts of
// self-conjugate bins are ignored. Throws on shape mismatch with
// (height, width).
Tensor irdft2(const CTensor& s, int height, int width);

// Multiplicity of a stored half-spectrum column under conjugate symmetry:
// 1 for the DC column and (even W) the Nyquist column, else 2.
inline double column_multiplicity(int w_full, int vi) {
    return (vi == 0 || (w_full % 2 == 0 && vi == w_full / 2)) ? 1.0 : 2.0;
}

inline bool self_conjugate_bin(int h, int w_full, int ui, int vi) {
    return (2 * ui) % h == 0 && (2 * vi) % w_full == 0;
}

// Total spectral energy with conjugate-symmetric bins counted twice; equals
// the spatial energy ||x||^2 under the orthonormal convention.
double spectral_energy(const CTensor& s);

// Vector-Jacobian products for the two transforms, viewed as R-linear maps.
// rdft2_vjp: given dL/dS, returns dL/dx.  irdft2_vjp: given dL/dy, returns
// dL/dS (imaginary cotangents on self-conjugate bins are zero by convention,
// matching irdft2 ignoring them).
Tensor rdft2_vjp(const CTensor& grad_spectrum, int height, int width);
CTensor irdft2_vjp(const Tensor& grad_spatial);

}  // namespace deflare
