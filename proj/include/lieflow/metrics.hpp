#pragma once

#include "lieflow/image.hpp"

namespace lieflow {

/// -10 log10(MSE), capped at 99 dB when MSE < 1e-10.
double psnr(const Image& img, const Image& ref);

/// Structural similarity with the standard 11x11 Gaussian window
/// (sigma 1.5, k1 = 0.01, k2 = 0.03, dynamic range 1), averaged over the
/// three channels and all valid window positions.
double ssim(const Image& img, const Image& ref);

double mse(const Image& img, const Image& ref);

}  // namespace lieflow
