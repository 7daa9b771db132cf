#pragma once

#include <cstdint>
#include <vector>

#include "m2m/image.hpp"

namespace m2m::noise {

// Directionally correlated Gaussian noise: i.i.d. base field, 1-D averaging
// along the integer offset (p, q), then scaling to the target level.
struct NoiseConfig {
    int p = 0;              // row step of the correlation direction
    int q = 1;              // column step, q >= 1 (direction in [0, pi))
    int ell = 3;            // averaging kernel length, odd; 1 = i.i.d.
    double sigma_n = 0.1;   // target noise standard deviation
    double sigma0 = 1.0;    // pre-filter standard deviation
    std::uint64_t seed = 0;

    void validate() const;
};

// Reproducible i.i.d. N(0, sigma0^2) field; the value at each pixel depends
// only on (seed, pixel index), not on traversal or threading.
Image gen_iid_gaussian(int h, int w, double sigma0, std::uint64_t seed);

// Averages ell samples spaced (p, q) apart, symmetric padding at the edges.
// Interior variance drops to sigma0^2/ell and lags t along (p,q) correlate
// as (ell-|t|)/ell.
Image directional_average(const Image& x, int p, int q, int ell);

// Multiplies the field so its empirical standard deviation equals sigma_n.
Image scale_to_level(const Image& y, double sigma_n);

// Full synthesis chain for a given shape.
Image make_noise_field(int h, int w, const NoiseConfig& cfg);

// clip(clean + noise, 0, 1)
Image corrupt(const Image& clean, const NoiseConfig& cfg);

// Sample Pearson correlations of a zero-ish-mean field at lags 1..max_lag
// along (p, q) and along the orthogonal direction (-q, p). Pixels closer
// than `border` to the edge are excluded from the pair anchors.
struct LagCorrelations {
    std::vector<double> along;  // along[t-1] = rho at lag t along (p,q)
    std::vector<double> ortho;
};
LagCorrelations estimate_statistics(const Image& field, int p, int q,
                                    int max_lag, int border = 0);

double field_mean(const Image& img);
double field_std(const Image& img);  // population convention

}  // namespace m2m::noise
