#pragma once

#include "m2m/image.hpp"

namespace m2m::metrics {

// 10*log10(peak^2 / MSE); +inf for identical images.
double psnr(const Image& ref, const Image& test, double peak = 1.0);

// Mean structural similarity over valid windows: 11x11 Gaussian window with
// sigma 1.5, k1 = 0.01, k2 = 0.03. Both images must be at least 11x11.
double ssim(const Image& ref, const Image& test, double peak = 1.0);

}  // namespace m2m::metrics
