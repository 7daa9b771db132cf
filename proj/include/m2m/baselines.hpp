#pragma once

#include "m2m/image.hpp"
#include "m2m/trainer.hpp"

namespace m2m::baselines {

// Competing pair constructions used for comparisons.
//   CheckerboardSqueeze : split by checkerboard parity, squeeze each row's
//                         phase pixels leftward -> two H x W/2 images
//   DiagonalMeans2x2    : per 2x2 cell, x1 = mean of the main diagonal,
//                         x2 = mean of the anti-diagonal -> H/2 x W/2
enum class BaselineKind { CheckerboardSqueeze, DiagonalMeans2x2 };

struct ImagePair {
    Image x1, x2;
};

// Requires even width (checkerboard) or even dims (2x2 means); callers pad.
ImagePair baseline_sample(const Image& noisy, BaselineKind kind);

// Mirror-extends odd dimensions on the bottom/right to the next even size.
Image pad_to_even(const Image& img);

// Reference ZS-N2N-style denoiser: one network trained on the fixed
// 2x2-diagonal-means pair with the same symmetric + consistency objective
// and optimizer settings as the M2M trainer.
train::DenoiseResult zsn2n_denoise(const Image& noisy, const train::TrainConfig& cfg);

}  // namespace m2m::baselines
