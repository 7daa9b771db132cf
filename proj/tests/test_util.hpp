#pragma once

#include <cmath>

#include "m2m/image.hpp"
#include "m2m/rng.hpp"

namespace testutil {

inline m2m::Image ramp(int h, int w, double lo = 0.1, double hi = 0.9) {
    m2m::Image img(h, w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            img.at(i, j) = lo + (hi - lo) * (i * w + j) / double(h * w - 1);
        }
    }
    return img;
}

inline m2m::Image random_image(int h, int w, std::uint64_t seed,
                               double lo = 0.0, double hi = 1.0) {
    m2m::Image img(h, w);
    m2m::rng::Stream s(seed, 0xABCD);
    for (double& v : img.data) v = lo + (hi - lo) * s.next_unit();
    return img;
}

inline double max_abs_diff(const m2m::Image& a, const m2m::Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    }
    return m;
}

inline bool bit_identical(const m2m::Image& a, const m2m::Image& b) {
    if (a.height != b.height || a.width != b.width) return false;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        if (a.data[i] != b.data[i]) return false;
    }
    return true;
}

}  // namespace testutil
