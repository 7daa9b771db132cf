#include "m2m/kernels.hpp"

#include <cassert>
#include <cstddef>

namespace m2m::kernels {

namespace {

constexpr int kMaxChannels = 96;

// 72-lane register accumulator built on GCC vector extensions; keeps the
// whole channel block in vector registers across the tap/input-channel
// loops. Lane arithmetic is elementwise, so results match the generic path
// bit for bit.
typedef double vd8 __attribute__((vector_size(64), aligned(8)));
typedef float vf16 __attribute__((vector_size(64), aligned(4)));
typedef float vf8 __attribute__((vector_size(32), aligned(4)));

template <class V, class T>
inline V load_vec(const T* p) {
    V v;
    __builtin_memcpy(&v, p, sizeof(V));
    return v;
}
template <class V, class T>
inline void store_vec(T* p, V v) {
    __builtin_memcpy(p, &v, sizeof(V));
}

template <class T>
struct Acc72;

template <>
struct Acc72<double> {
    vd8 a[9];
    void load(const double* p) {
        for (int k = 0; k < 9; ++k) a[k] = load_vec<vd8>(p + 8 * k);
    }
    void fma(const double* w, double s) {
        const vd8 vs = vd8{} + s;
        for (int k = 0; k < 9; ++k) a[k] += load_vec<vd8>(w + 8 * k) * vs;
    }
    void store(double* p) const {
        for (int k = 0; k < 9; ++k) store_vec(p + 8 * k, a[k]);
    }
};

template <>
struct Acc72<float> {
    vf16 a[4];
    vf8 tail;
    void load(const float* p) {
        for (int k = 0; k < 4; ++k) a[k] = load_vec<vf16>(p + 16 * k);
        tail = load_vec<vf8>(p + 64);
    }
    void fma(const float* w, float s) {
        const vf16 vs = vf16{} + s;
        const vf8 vs8 = vf8{} + s;
        for (int k = 0; k < 4; ++k) a[k] += load_vec<vf16>(w + 16 * k) * vs;
        tail += load_vec<vf8>(w + 64) * vs8;
    }
    void store(float* p) const {
        for (int k = 0; k < 4; ++k) store_vec(p + 16 * k, a[k]);
        store_vec(p + 64, tail);
    }
};

template <class T>
inline void tap_accumulate_rt(T* __restrict acc, const T* __restrict wts,
                              const T* __restrict px, int ic, int oc) {
    for (int i = 0; i < ic; ++i) {
        const T v = px[i];
        const T* __restrict wr = wts + static_cast<std::size_t>(i) * oc;
        for (int o = 0; o < oc; ++o) acc[o] += v * wr[o];
    }
}

// Horizontal pixel blocking: one weight-row stream feeds several adjacent
// output pixels, which is what keeps the kernel out of the L2-bandwidth
// ceiling. Per-pixel accumulation order (tap asc, in-channel asc) is the
// same in every path.
template <class T>
inline constexpr int kPixelBlock = sizeof(T) == 4 ? 4 : 2;

// kFast72: oc == 72 register-accumulator path.
template <class T, bool kFast72>
void conv3x3_row(const T* in, int h, int w, int ic, const T* wts,
                 const T* bias, int oc, T* out, int y) {
    const std::ptrdiff_t in_row = static_cast<std::ptrdiff_t>(w) * ic;
    const std::ptrdiff_t tap_stride = static_cast<std::ptrdiff_t>(ic) * oc;

    auto pixel = [&](int y0, int x) {
        const int ty0 = (y0 > 0) ? -1 : 0, ty1 = (y0 < h - 1) ? 1 : 0;
        const int tx0 = (x > 0) ? -1 : 0, tx1 = (x < w - 1) ? 1 : 0;
        T* dst = out + (static_cast<std::ptrdiff_t>(y0) * w + x) * oc;
        if constexpr (kFast72) {
            Acc72<T> acc;
            acc.load(bias);
            for (int dy = ty0; dy <= ty1; ++dy) {
                for (int dx = tx0; dx <= tx1; ++dx) {
                    const int tap = (dy + 1) * 3 + (dx + 1);
                    const T* px = in + (y0 + dy) * in_row +
                                  static_cast<std::ptrdiff_t>(x + dx) * ic;
                    const T* wt = wts + tap * tap_stride;
                    for (int i = 0; i < ic; ++i) acc.fma(wt + i * 72, px[i]);
                }
            }
            acc.store(dst);
        } else {
            T acc[kMaxChannels];
            for (int o = 0; o < oc; ++o) acc[o] = bias[o];
            for (int dy = ty0; dy <= ty1; ++dy) {
                for (int dx = tx0; dx <= tx1; ++dx) {
                    const int tap = (dy + 1) * 3 + (dx + 1);
                    const T* px = in + (y0 + dy) * in_row +
                                  static_cast<std::ptrdiff_t>(x + dx) * ic;
                    tap_accumulate_rt(acc, wts + tap * tap_stride, px, ic, oc);
                }
            }
            for (int o = 0; o < oc; ++o) dst[o] = acc[o];
        }
    };

    if (y == 0 || y == h - 1 || w < 3) {
        for (int x = 0; x < w; ++x) pixel(y, x);
        return;
    }
    pixel(y, 0);
    if constexpr (kFast72) {
        constexpr int B = kPixelBlock<T>;
        int x = 1;
        for (; x + B <= w - 1; x += B) {
            Acc72<T> acc[B];
            for (int b = 0; b < B; ++b) acc[b].load(bias);
            const T* base =
                in + (y - 1) * in_row + static_cast<std::ptrdiff_t>(x - 1) * ic;
            for (int tap = 0; tap < 9; ++tap) {
                const T* px = base + (tap / 3) * in_row +
                              static_cast<std::ptrdiff_t>(tap % 3) * ic;
                const T* wt = wts + tap * tap_stride;
                for (int i = 0; i < ic; ++i) {
                    const T* wr = wt + i * 72;
                    for (int b = 0; b < B; ++b) acc[b].fma(wr, px[b * ic + i]);
                }
            }
            T* dst = out + (static_cast<std::ptrdiff_t>(y) * w + x) * oc;
            for (int b = 0; b < B; ++b) acc[b].store(dst + b * 72);
        }
        for (; x < w - 1; ++x) {
            Acc72<T> acc;
            acc.load(bias);
            const T* base =
                in + (y - 1) * in_row + static_cast<std::ptrdiff_t>(x - 1) * ic;
            for (int tap = 0; tap < 9; ++tap) {
                const T* px = base + (tap / 3) * in_row +
                              static_cast<std::ptrdiff_t>(tap % 3) * ic;
                const T* wt = wts + tap * tap_stride;
                for (int i = 0; i < ic; ++i) acc.fma(wt + i * 72, px[i]);
            }
            acc.store(out + (static_cast<std::ptrdiff_t>(y) * w + x) * oc);
        }
    } else {
        for (int x = 1; x < w - 1; ++x) {
            T acc[kMaxChannels];
            for (int o = 0; o < oc; ++o) acc[o] = bias[o];
            const T* base =
                in + (y - 1) * in_row + static_cast<std::ptrdiff_t>(x - 1) * ic;
            for (int tap = 0; tap < 9; ++tap) {
                const T* px = base + (tap / 3) * in_row +
                              static_cast<std::ptrdiff_t>(tap % 3) * ic;
                tap_accumulate_rt(acc, wts + tap * tap_stride, px, ic, oc);
            }
            T* dst = out + (static_cast<std::ptrdiff_t>(y) * w + x) * oc;
            for (int o = 0; o < oc; ++o) dst[o] = acc[o];
        }
    }
    pixel(y, w - 1);
}

}  // namespace

template <class T>
void conv3x3_forward(const T* in, int h, int w, int ic,
                     const T* wts, const T* bias, int oc, T* out) {
    assert(oc <= kMaxChannels);
    if (oc == 72) {
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) {
            conv3x3_row<T, true>(in, h, w, ic, wts, bias, oc, out, y);
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) {
            conv3x3_row<T, false>(in, h, w, ic, wts, bias, oc, out, y);
        }
    }
}

namespace {

// dw rows for one (tap, in-channel block): register accumulators streamed
// over the valid pixel rectangle in row-major order; one gradient-row load
// feeds the whole block.
template <class T, int IB>
void backward_weights_fast72(const T* in, const T* dout, int h, int w, int ic,
                             T* dw, int tap, int i0) {
    const int dy = tap / 3 - 1, dx = tap % 3 - 1;
    const int y0 = dy < 0 ? 1 : 0, y1 = h - (dy > 0 ? 1 : 0);
    const int x0 = dx < 0 ? 1 : 0, x1 = w - (dx > 0 ? 1 : 0);
    const std::ptrdiff_t in_row = static_cast<std::ptrdiff_t>(w) * ic;
    const std::ptrdiff_t out_row = static_cast<std::ptrdiff_t>(w) * 72;
    Acc72<T> acc[IB];
    for (int b = 0; b < IB; ++b) {
        acc[b].load(dw + (static_cast<std::ptrdiff_t>(tap) * ic + i0 + b) * 72);
    }
    for (int y = y0; y < y1; ++y) {
        const T* a =
            in + (y + dy) * in_row + static_cast<std::ptrdiff_t>(x0 + dx) * ic + i0;
        const T* g = dout + y * out_row + static_cast<std::ptrdiff_t>(x0) * 72;
        for (int x = x0; x < x1; ++x, a += ic, g += 72) {
            for (int b = 0; b < IB; ++b) acc[b].fma(g, a[b]);
        }
    }
    for (int b = 0; b < IB; ++b) {
        acc[b].store(dw + (static_cast<std::ptrdiff_t>(tap) * ic + i0 + b) * 72);
    }
}

}  // namespace

template <class T>
void conv3x3_backward_weights(const T* in, const T* dout, int h, int w,
                              int ic, int oc, T* dw) {
    if (oc == 72) {
        constexpr int IB = sizeof(T) == 4 ? 4 : 2;
        const int blocks_per_tap = (ic + IB - 1) / IB;
#pragma omp parallel for schedule(static)
        for (int tb = 0; tb < 9 * blocks_per_tap; ++tb) {
            const int tap = tb / blocks_per_tap;
            const int i0 = (tb % blocks_per_tap) * IB;
            if (i0 + IB <= ic) {
                backward_weights_fast72<T, IB>(in, dout, h, w, ic, dw, tap, i0);
            } else {
                for (int i = i0; i < ic; ++i) {
                    backward_weights_fast72<T, 1>(in, dout, h, w, ic, dw, tap, i);
                }
            }
        }
        return;
    }
    const std::ptrdiff_t in_row = static_cast<std::ptrdiff_t>(w) * ic;
    const std::ptrdiff_t out_row = static_cast<std::ptrdiff_t>(w) * oc;
#pragma omp parallel for schedule(static)
    for (int tap = 0; tap < 9; ++tap) {
        const int dy = tap / 3 - 1, dx = tap % 3 - 1;
        T* __restrict dwt = dw + static_cast<std::ptrdiff_t>(tap) * ic * oc;
        const int y0 = dy < 0 ? 1 : 0, y1 = h - (dy > 0 ? 1 : 0);
        const int x0 = dx < 0 ? 1 : 0, x1 = w - (dx > 0 ? 1 : 0);
        for (int y = y0; y < y1; ++y) {
            const T* arow = in + (y + dy) * in_row;
            const T* grow = dout + y * out_row;
            for (int x = x0; x < x1; ++x) {
                const T* __restrict a = arow + static_cast<std::ptrdiff_t>(x + dx) * ic;
                const T* __restrict g = grow + static_cast<std::ptrdiff_t>(x) * oc;
                for (int i = 0; i < ic; ++i) {
                    const T v = a[i];
                    T* __restrict row = dwt + static_cast<std::ptrdiff_t>(i) * oc;
                    for (int o = 0; o < oc; ++o) row[o] += v * g[o];
                }
            }
        }
    }
}

template <class T>
void conv1x1_forward(const T* in, int h, int w, int ic,
                     const T* wts, const T* bias, int oc, T* out) {
    assert(oc <= kMaxChannels);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        const T* px = in + p * ic;
        T acc[kMaxChannels];
        for (int o = 0; o < oc; ++o) acc[o] = bias[o];
        tap_accumulate_rt(acc, wts, px, ic, oc);
        T* dst = out + p * oc;
        for (int o = 0; o < oc; ++o) dst[o] = acc[o];
    }
}

template <class T>
void conv1x1_backward_weights(const T* in, const T* dout, int h, int w,
                              int ic, int oc, T* dw) {
    // Cheap relative to the 3x3 passes; serial keeps the sum order trivial.
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(h) * w;
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        const T* __restrict a = in + p * ic;
        const T* __restrict g = dout + p * oc;
        for (int i = 0; i < ic; ++i) {
            const T v = a[i];
            T* __restrict row = dw + static_cast<std::ptrdiff_t>(i) * oc;
            for (int o = 0; o < oc; ++o) row[o] += v * g[o];
        }
    }
}

template <class T>
void prelu_forward(const T* z, int n, int c, const T* slopes, T* a) {
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n; ++p) {
        const T* __restrict zp = z + static_cast<std::ptrdiff_t>(p) * c;
        T* __restrict ap = a + static_cast<std::ptrdiff_t>(p) * c;
        for (int k = 0; k < c; ++k) {
            ap[k] = zp[k] > T(0) ? zp[k] : slopes[k] * zp[k];
        }
    }
}

template <class T>
void prelu_backward_data(const T* z, const T* slopes, const T* da,
                         int n, int c, T* dz) {
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n; ++p) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(p) * c;
        for (int k = 0; k < c; ++k) {
            dz[off + k] = da[off + k] * (z[off + k] > T(0) ? T(1) : slopes[k]);
        }
    }
}

template <class T>
void prelu_backward_slopes(const T* z, const T* da, int n, int c, T* dslope) {
    for (int p = 0; p < n; ++p) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(p) * c;
        for (int k = 0; k < c; ++k) {
            if (z[off + k] <= T(0)) dslope[k] += da[off + k] * z[off + k];
        }
    }
}

template <class T>
void channel_sums(const T* x, int n, int c, T* sums) {
    for (int p = 0; p < n; ++p) {
        const T* __restrict xp = x + static_cast<std::ptrdiff_t>(p) * c;
        for (int k = 0; k < c; ++k) sums[k] += xp[k];
    }
}

namespace {

// Symmetric fold with edge duplication: -1 -> 0, n -> n-1.
inline int fold_sym(int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

}  // namespace

void directional_average(const double* x, int h, int w, int p, int q,
                         int ell, double* y) {
    const int r = (ell - 1) / 2;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double sum = 0.0;
            for (int k = -r; k <= r; ++k) {
                sum += x[static_cast<std::size_t>(fold_sym(i + k * p, h)) * w +
                         fold_sym(j + k * q, w)];
            }
            y[static_cast<std::size_t>(i) * w + j] = sum / ell;
        }
    }
}

namespace ref {

template <class T>
void conv3x3_forward(const T* in, int h, int w, int ic,
                     const T* wts, const T* bias, int oc, T* out) {
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int o = 0; o < oc; ++o) {
                T acc = bias[o];
                for (int tap = 0; tap < 9; ++tap) {
                    const int yy = y + tap / 3 - 1, xx = x + tap % 3 - 1;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    for (int i = 0; i < ic; ++i) {
                        acc += wts[(static_cast<std::size_t>(tap) * ic + i) * oc + o] *
                               in[(static_cast<std::size_t>(yy) * w + xx) * ic + i];
                    }
                }
                out[(static_cast<std::size_t>(y) * w + x) * oc + o] = acc;
            }
        }
    }
}

template <class T>
void conv3x3_backward_weights(const T* in, const T* dout, int h, int w,
                              int ic, int oc, T* dw) {
    for (int tap = 0; tap < 9; ++tap) {
        const int dy = tap / 3 - 1, dx = tap % 3 - 1;
        for (int i = 0; i < ic; ++i) {
            for (int o = 0; o < oc; ++o) {
                T sum = 0;
                for (int y = 0; y < h; ++y) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= h) continue;
                    for (int x = 0; x < w; ++x) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= w) continue;
                        sum += in[(static_cast<std::size_t>(yy) * w + xx) * ic + i] *
                               dout[(static_cast<std::size_t>(y) * w + x) * oc + o];
                    }
                }
                dw[(static_cast<std::size_t>(tap) * ic + i) * oc + o] += sum;
            }
        }
    }
}

template <class T>
void conv1x1_forward(const T* in, int h, int w, int ic,
                     const T* wts, const T* bias, int oc, T* out) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(h) * w;
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        for (int o = 0; o < oc; ++o) {
            T acc = bias[o];
            for (int i = 0; i < ic; ++i) {
                acc += wts[static_cast<std::size_t>(i) * oc + o] * in[p * ic + i];
            }
            out[p * oc + o] = acc;
        }
    }
}

template <class T>
void conv1x1_backward_weights(const T* in, const T* dout, int h, int w,
                              int ic, int oc, T* dw) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(h) * w;
    for (int i = 0; i < ic; ++i) {
        for (int o = 0; o < oc; ++o) {
            T sum = 0;
            for (std::ptrdiff_t p = 0; p < n; ++p) {
                sum += in[p * ic + i] * dout[p * oc + o];
            }
            dw[static_cast<std::size_t>(i) * oc + o] += sum;
        }
    }
}

template <class T>
void prelu_forward(const T* z, int n, int c, const T* slopes, T* a) {
    for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(n) * c; ++e) {
        const T s = slopes[e % c];
        a[e] = z[e] > T(0) ? z[e] : s * z[e];
    }
}

template <class T>
void prelu_backward_data(const T* z, const T* slopes, const T* da,
                         int n, int c, T* dz) {
    for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(n) * c; ++e) {
        dz[e] = da[e] * (z[e] > T(0) ? T(1) : slopes[e % c]);
    }
}

void directional_average(const double* x, int h, int w, int p, int q,
                         int ell, double* y) {
    const int r = (ell - 1) / 2;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double sum = 0.0;
            for (int k = -r; k <= r; ++k) {
                sum += x[static_cast<std::size_t>(fold_sym(i + k * p, h)) * w +
                         fold_sym(j + k * q, w)];
            }
            y[static_cast<std::size_t>(i) * w + j] = sum / ell;
        }
    }
}

#define M2M_INSTANTIATE_REF(T)                                                   \
    template void conv3x3_forward<T>(const T*, int, int, int, const T*,         \
                                     const T*, int, T*);                         \
    template void conv3x3_backward_weights<T>(const T*, const T*, int, int,     \
                                              int, int, T*);                    \
    template void conv1x1_forward<T>(const T*, int, int, int, const T*,         \
                                     const T*, int, T*);                         \
    template void conv1x1_backward_weights<T>(const T*, const T*, int, int,     \
                                              int, int, T*);                    \
    template void prelu_forward<T>(const T*, int, int, const T*, T*);           \
    template void prelu_backward_data<T>(const T*, const T*, const T*, int,     \
                                         int, T*);

M2M_INSTANTIATE_REF(float)
M2M_INSTANTIATE_REF(double)
#undef M2M_INSTANTIATE_REF

}  // namespace ref

#define M2M_INSTANTIATE(T)                                                       \
    template void conv3x3_forward<T>(const T*, int, int, int, const T*,         \
                                     const T*, int, T*);                         \
    template void conv3x3_backward_weights<T>(const T*, const T*, int, int,     \
                                              int, int, T*);                    \
    template void conv1x1_forward<T>(const T*, int, int, int, const T*,         \
                                     const T*, int, T*);                         \
    template void conv1x1_backward_weights<T>(const T*, const T*, int, int,     \
                                              int, int, T*);                    \
    template void prelu_forward<T>(const T*, int, int, const T*, T*);           \
    template void prelu_backward_data<T>(const T*, const T*, const T*, int,     \
                                         int, T*);                              \
    template void prelu_backward_slopes<T>(const T*, const T*, int, int, T*);   \
    template void channel_sums<T>(const T*, int, int, T*);

M2M_INSTANTIATE(float)
M2M_INSTANTIATE(double)
#undef M2M_INSTANTIATE

}  // namespace m2m::kernels
