#pragma once

// Data-parallel inner loops shared by the noise synthesizer and the
// convolutional denoiser. Every kernel is OpenMP-parallel over regions whose
// per-element accumulation order is fixed, so results are bit-identical for
// any thread count. m2m::kernels::ref holds plain serial implementations of
// the same contracts, kept as the test oracle and benchmark baseline.
//
// Tensor layout is channels-last: element (y, x, c) of an h x w x c buffer
// lives at ((y * w) + x) * c + c_idx. 3x3 weights are stored tap-major as
// [tap][in_c][out_c] with tap = (dy+1)*3 + (dx+1), dy/dx in {-1,0,1};
// out-of-image taps read as zero.

namespace m2m::kernels {

// out(y,x,o) = bias(o) + sum_{tap,i} wts[tap][i][o] * in(y+dy, x+dx, i).
// Also serves as the gradient-vs-input pass: feed the upstream gradient as
// `in` with weights transposed to [tap][out_c][in_c] and tap-flipped
// (tap -> 8-tap), bias zero.
template <class T>
void conv3x3_forward(const T* in, int h, int w, int ic,
                     const T* wts, const T* bias, int oc, T* out);

// dw[tap][i][o] += in(y+dy, x+dx, i) * dout(y, x, o) over all valid pixels.
// dw must be zero-initialized by the caller.
template <class T>
void conv3x3_backward_weights(const T* in, const T* dout, int h, int w,
                              int ic, int oc, T* dw);

// Pointwise convolution; weights [in_c][out_c].
template <class T>
void conv1x1_forward(const T* in, int h, int w, int ic,
                     const T* wts, const T* bias, int oc, T* out);

template <class T>
void conv1x1_backward_weights(const T* in, const T* dout, int h, int w,
                              int ic, int oc, T* dw);

// a = z if z > 0 else slope[c] * z, one slope per channel. n = pixel count.
template <class T>
void prelu_forward(const T* z, int n, int c, const T* slopes, T* a);

// dz = da * (z > 0 ? 1 : slope[c])
template <class T>
void prelu_backward_data(const T* z, const T* slopes, const T* da,
                         int n, int c, T* dz);

// dslope[c] += sum over elements with z <= 0 of da * z
template <class T>
void prelu_backward_slopes(const T* z, const T* da, int n, int c, T* dslope);

// sums[c] += column sums; used for bias gradients.
template <class T>
void channel_sums(const T* x, int n, int c, T* sums);

// y(i,j) = mean over k in [-r, r] of x(i + k*p, j + k*q), r = (ell-1)/2,
// with symmetric (edge-duplicating) folds at the boundary.
void directional_average(const double* x, int h, int w, int p, int q,
                         int ell, double* y);

namespace ref {

template <class T>
void conv3x3_forward(const T* in, int h, int w, int ic,
                     const T* wts, const T* bias, int oc, T* out);

template <class T>
void conv3x3_backward_weights(const T* in, const T* dout, int h, int w,
                              int ic, int oc, T* dw);

template <class T>
void conv1x1_forward(const T* in, int h, int w, int ic,
                     const T* wts, const T* bias, int oc, T* out);

template <class T>
void conv1x1_backward_weights(const T* in, const T* dout, int h, int w,
                              int ic, int oc, T* dw);

template <class T>
void prelu_forward(const T* z, int n, int c, const T* slopes, T* a);

template <class T>
void prelu_backward_data(const T* z, const T* slopes, const T* da,
                         int n, int c, T* dz);

void directional_average(const double* x, int h, int w, int p, int q,
                         int ell, double* y);

}  // namespace ref

}  // namespace m2m::kernels
