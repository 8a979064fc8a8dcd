#pragma once

#include <optional>

#include "deflare/tensor.hpp"

namespace deflare {

// 10*log10(1 / MSE) for images in [0,1], capped at 100 dB (the documented
// value for identical images).
double psnr(const Tensor& pred, const Tensor& target);

// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, averaged over channels. Throws if the image is smaller than the
// window.
double ssim(const Tensor& pred, const Tensor& target);

// PSNR with the MSE averaged only over mask-positive pixels (all channels).
// An empty mask yields nullopt rather than a number.
std::optional<double> masked_psnr(const Tensor& pred, const Tensor& target,
                                  const Tensor& mask);

// log(1 + |centered amplitude spectrum|) of the luminance channel. Normalized
// min-max over the non-DC bins (the DC pixel is clamped into [0,1]) so that
// adding a constant to the image only changes the center pixel.
Tensor spectrum_image(const Tensor& image);

// Mean log(1 + amplitude) over spectrum bins farther than
// radius_fraction * min(H, W) from the centered DC bin.
double mean_log_magnitude_outside(const Tensor& image, double radius_fraction);

}  // namespace deflare
