#include "m2m/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace m2m::metrics {

namespace {

void check_dims(const Image& a, const Image& b, const char* who) {
    if (a.height != b.height || a.width != b.width) {
        throw std::invalid_argument(std::string(who) + ": dimension mismatch");
    }
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::array<double, kWin * kWin> gaussian_window() {
    std::array<double, kWin * kWin> w{};
    const int r = kWin / 2;
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        for (int j = -r; j <= r; ++j) {
            const double g = std::exp(-(i * i + j * j) / (2.0 * kSigma * kSigma));
            w[(i + r) * kWin + (j + r)] = g;
            sum += g;
        }
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

double psnr(const Image& ref, const Image& test, double peak) {
    check_dims(ref, test, "psnr");
    double sse = 0.0;
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        const double d = ref.data[i] - test.data[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(ref.pixel_count());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Image& ref, const Image& test, double peak) {
    check_dims(ref, test, "ssim");
    if (ref.height < kWin || ref.width < kWin) {
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    }
    static const std::array<double, kWin * kWin> w = gaussian_window();
    const double c1 = (kK1 * peak) * (kK1 * peak);
    const double c2 = (kK2 * peak) * (kK2 * peak);

    const int hy = ref.height - kWin + 1;
    const int hx = ref.width - kWin + 1;
    // Per-row partials summed serially afterwards keep the result identical
    // for any thread count.
    std::vector<double> row_total(hy, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < hy; ++y) {
        double total = 0.0;
        for (int x = 0; x < hx; ++x) {
            double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
            for (int i = 0; i < kWin; ++i) {
                for (int j = 0; j < kWin; ++j) {
                    const double wa = w[i * kWin + j];
                    const double a = ref.at(y + i, x + j);
                    const double b = test.at(y + i, x + j);
                    mx += wa * a;
                    my += wa * b;
                    xx += wa * a * a;
                    yy += wa * b * b;
                    xy += wa * a * b;
                }
            }
            const double vx = xx - mx * mx;
            const double vy = yy - my * my;
            const double cxy = xy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
        row_total[y] = total;
    }
    double total = 0.0;
    for (double v : row_total) total += v;
    return total / (static_cast<double>(hy) * hx);
}

}  // namespace m2m::metrics
