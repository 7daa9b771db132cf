#include "m2m/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "m2m/kernels.hpp"
#include "m2m/rng.hpp"

namespace m2m::noise {

void NoiseConfig::validate() const {
    if (q < 1) throw std::invalid_argument("NoiseConfig: q must be >= 1");
    if (ell < 1 || ell % 2 == 0) {
        throw std::invalid_argument("NoiseConfig: ell must be odd and >= 1");
    }
    if (sigma_n < 0.0) throw std::invalid_argument("NoiseConfig: sigma_n must be >= 0");
    if (sigma0 <= 0.0) throw std::invalid_argument("NoiseConfig: sigma0 must be > 0");
    if (std::gcd(std::abs(p), q) != 1) {
        throw std::invalid_argument(
            "NoiseConfig: (p,q) must be the reduced offset vector, gcd(|p|,q)=1");
    }
}

double field_mean(const Image& img) {
    double s = 0.0;
    for (double v : img.data) s += v;
    return s / static_cast<double>(img.pixel_count());
}

double field_std(const Image& img) {
    const double m = field_mean(img);
    double s = 0.0;
    for (double v : img.data) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(img.pixel_count()));
}

Image gen_iid_gaussian(int h, int w, double sigma0, std::uint64_t seed) {
    if (h < 1 || w < 1) throw std::invalid_argument("gen_iid_gaussian: empty shape");
    Image out(h, w);
    const std::size_t n = out.pixel_count();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        out.data[i] = sigma0 * rng::normal_at(seed, rng::kTagNoise, i);
    }
    return out;
}

Image directional_average(const Image& x, int p, int q, int ell) {
    if (ell < 1 || ell % 2 == 0) {
        throw std::invalid_argument("directional_average: ell must be odd");
    }
    if (ell == 1) return x;
    const int r = (ell - 1) / 2;
    const int reach = r * std::max(std::abs(p), q);
    if (x.height <= reach || x.width <= reach) {
        throw std::invalid_argument(
            "directional_average: field too small for symmetric padding");
    }
    Image y(x.height, x.width);
    kernels::directional_average(x.data.data(), x.height, x.width, p, q, ell,
                                 y.data.data());
    return y;
}

Image scale_to_level(const Image& y, double sigma_n) {
    const double sd = field_std(y);
    if (!(sd > 0.0)) {
        throw std::invalid_argument("scale_to_level: field has zero spread");
    }
    Image out = y;
    const double gain = sigma_n / sd;
    for (double& v : out.data) v *= gain;
    return out;
}

Image make_noise_field(int h, int w, const NoiseConfig& cfg) {
    cfg.validate();
    if (cfg.sigma_n == 0.0) return Image(h, w, 0.0);
    Image x = gen_iid_gaussian(h, w, cfg.sigma0, cfg.seed);
    Image y = directional_average(x, cfg.p, cfg.q, cfg.ell);
    return scale_to_level(y, cfg.sigma_n);
}

Image corrupt(const Image& clean, const NoiseConfig& cfg) {
    Image noise = make_noise_field(clean.height, clean.width, cfg);
    Image out = clean;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = std::clamp(out.data[i] + noise.data[i], 0.0, 1.0);
    }
    return out;
}

namespace {

double pair_correlation(const Image& f, int di, int dj, int border) {
    const int i0 = std::max(border, -di), i1 = std::min(f.height - border, f.height - di);
    const int j0 = std::max(border, -dj), j1 = std::min(f.width - border, f.width - dj);
    if (i0 >= i1 || j0 >= j1) {
        throw std::invalid_argument("estimate_statistics: lag exceeds field extent");
    }
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    std::size_t n = 0;
    for (int i = i0; i < i1; ++i) {
        for (int j = j0; j < j1; ++j) {
            const double a = f.at(i, j);
            const double b = f.at(i + di, j + dj);
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
            ++n;
        }
    }
    const double inv = 1.0 / static_cast<double>(n);
    const double cov = sab * inv - (sa * inv) * (sb * inv);
    const double va = saa * inv - (sa * inv) * (sa * inv);
    const double vb = sbb * inv - (sb * inv) * (sb * inv);
    return cov / std::sqrt(va * vb);
}

}  // namespace

LagCorrelations estimate_statistics(const Image& field, int p, int q,
                                    int max_lag, int border) {
    if (max_lag < 1) throw std::invalid_argument("estimate_statistics: max_lag < 1");
    LagCorrelations out;
    out.along.reserve(max_lag);
    out.ortho.reserve(max_lag);
    for (int t = 1; t <= max_lag; ++t) {
        out.along.push_back(pair_correlation(field, t * p, t * q, border));
        out.ortho.push_back(pair_correlation(field, t * (-q), t * p, border));
    }
    return out;
}

}  // namespace m2m::noise
