#include "m2m/phantom.hpp"

#include <algorithm>
#include <cmath>

namespace m2m {

Image make_phantom(int size) {
    const double n = static_cast<double>(size);
    Image img(size, size);
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            const double y = i / n, x = j / n;
            double v = 0.30 + 0.22 * (x + y) / 2.0;  // gentle ramp

            const double dx1 = x - 0.34, dy1 = y - 0.32;
            if (dx1 * dx1 + dy1 * dy1 < 0.22 * 0.22) v = 0.78;  // bright disk

            const double dx2 = x - 0.50, dy2 = y - 0.40;
            if (dx2 * dx2 + dy2 * dy2 < 0.07 * 0.07) v = 0.30;  // inner dark disk

            if (y > 0.58 && y < 0.82 && x > 0.12 && x < 0.38) v = 0.22;  // rectangle

            const double dx3 = x - 0.72, dy3 = y - 0.70;
            v += 0.28 * std::exp(-(dx3 * dx3 + dy3 * dy3) / (2.0 * 0.10 * 0.10));

            // Textured band: crossed sinusoids with a ~6 pixel period.
            if (y > 0.06 && y < 0.24 && x > 0.52 && x < 0.94) {
                v += 0.14 * std::sin(2.0 * 3.14159265358979 * j / 6.0) *
                     std::sin(2.0 * 3.14159265358979 * i / 7.0);
            }
            // Fine checker patch.
            if (y > 0.62 && y < 0.80 && x > 0.55 && x < 0.70) {
                v += ((i / 2 + j / 2) % 2) ? 0.12 : -0.12;
            }

            if (j % 32 == 0 && y > 0.85) v = 0.70;  // thin vertical ticks
            if (i % 32 == 16 && x > 0.88) v = 0.25;  // thin horizontal ticks

            img.at(i, j) = std::clamp(v, 0.15, 0.85);
        }
    }
    return img;
}

}  // namespace m2m
