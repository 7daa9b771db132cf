// Times the OpenMP kernels against the serial reference implementations on
// the shapes the pipeline actually runs (sub-image and full-image planes).
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <omp.h>

#include "m2m/kernels.hpp"
#include "m2m/rng.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

template <class F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock_type::now();
        fn();
        const auto t1 = clock_type::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

template <class T>
std::vector<T> random_buffer(std::size_t n, std::uint64_t stream) {
    std::vector<T> v(n);
    m2m::rng::Stream s(12345, stream);
    for (auto& x : v) x = static_cast<T>(s.next_unit() - 0.5);
    return v;
}

template <class T>
void bench_conv(const char* label, int h, int w, int ic, int oc, int reps) {
    const auto in = random_buffer<T>(static_cast<std::size_t>(h) * w * ic, 1);
    const auto wts = random_buffer<T>(static_cast<std::size_t>(9) * ic * oc, 2);
    const auto bias = random_buffer<T>(oc, 3);
    std::vector<T> out(static_cast<std::size_t>(h) * w * oc);
    std::vector<T> dw(static_cast<std::size_t>(9) * ic * oc);

    const double mac_fwd = 1e-9 * h * w * ic * oc * 9;  // boundary taps ignored
    const double t_omp = time_best_of(reps, [&] {
        m2m::kernels::conv3x3_forward(in.data(), h, w, ic, wts.data(), bias.data(),
                                      oc, out.data());
    });
    const double t_ref = time_best_of(reps, [&] {
        m2m::kernels::ref::conv3x3_forward(in.data(), h, w, ic, wts.data(),
                                           bias.data(), oc, out.data());
    });
    std::printf("%-28s fwd  omp %8.3f ms (%6.2f GMAC/s)   ref %8.3f ms   speedup %5.2fx\n",
                label, t_omp * 1e3, mac_fwd / t_omp, t_ref * 1e3, t_ref / t_omp);

    const double t_omp_bw = time_best_of(reps, [&] {
        std::fill(dw.begin(), dw.end(), T(0));
        m2m::kernels::conv3x3_backward_weights(in.data(), out.data(), h, w, ic, oc,
                                               dw.data());
    });
    const double t_ref_bw = time_best_of(std::max(1, reps / 4), [&] {
        std::fill(dw.begin(), dw.end(), T(0));
        m2m::kernels::ref::conv3x3_backward_weights(in.data(), out.data(), h, w, ic,
                                                    oc, dw.data());
    });
    std::printf("%-28s dW   omp %8.3f ms (%6.2f GMAC/s)   ref %8.3f ms   speedup %5.2fx\n",
                label, t_omp_bw * 1e3, mac_fwd / t_omp_bw, t_ref_bw * 1e3,
                t_ref_bw / t_omp_bw);
}

void bench_directional(int h, int w, int ell, int reps) {
    const auto in = random_buffer<double>(static_cast<std::size_t>(h) * w, 7);
    std::vector<double> out(in.size());
    const double t_omp = time_best_of(reps, [&] {
        m2m::kernels::directional_average(in.data(), h, w, 0, 1, ell, out.data());
    });
    const double t_ref = time_best_of(reps, [&] {
        m2m::kernels::ref::directional_average(in.data(), h, w, 0, 1, ell, out.data());
    });
    std::printf("dir_avg %dx%d ell=%-2d          omp %8.3f ms                  ref %8.3f ms   speedup %5.2fx\n",
                h, w, ell, t_omp * 1e3, t_ref * 1e3, t_ref / t_omp);
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 5;
    if (argc > 1) reps = std::max(1, std::atoi(argv[1]));
    std::printf("threads: %d\n", omp_get_max_threads());

    bench_conv<double>("conv3x3 43x43 72->72 f64", 43, 43, 72, 72, reps);
    bench_conv<float>("conv3x3 43x43 72->72 f32", 43, 43, 72, 72, reps);
    bench_conv<double>("conv3x3 128x128 72->72 f64", 128, 128, 72, 72, reps);
    bench_conv<float>("conv3x3 128x128 72->72 f32", 128, 128, 72, 72, reps);
    bench_conv<double>("conv3x3 128x128 1->72 f64", 128, 128, 1, 72, reps);
    bench_directional(1024, 1024, 7, reps);
    return 0;
}
