#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "m2m/image.hpp"

namespace m2m::cnn {

// Three-layer denoiser: 3x3 conv (1->72) + PReLU, 3x3 conv (72->72) + PReLU,
// 1x1 conv (72->1). Spatial dimensions are preserved (zero padding).
inline constexpr int kChannels = 72;

// Channels-last activation buffer.
template <class T>
struct Tensor {
    int h = 0, w = 0, c = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int h_, int w_, int c_)
        : h(h_), w(w_), c(c_),
          v(static_cast<std::size_t>(h_) * w_ * c_, T(0)) {}

    void resize(int h_, int w_, int c_) {
        h = h_;
        w = w_;
        c = c_;
        v.assign(static_cast<std::size_t>(h_) * w_ * c_, T(0));
    }
    std::size_t size() const { return v.size(); }
};

template <class T>
Tensor<T> to_tensor(const Image& img) {
    Tensor<T> t(img.height, img.width, 1);
    for (std::size_t i = 0; i < img.data.size(); ++i) t.v[i] = static_cast<T>(img.data[i]);
    return t;
}

template <class T>
Image to_image(const Tensor<T>& t) {
    Image img(t.h, t.w);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(t.v[i]);
    return img;
}

// All trainable values. 3x3 kernels are stored tap-major [tap][in_c][out_c];
// the same struct doubles as the gradient and optimizer-moment container.
template <class T>
struct Params {
    std::vector<T> conv1_w;  // [9][1][72]
    std::vector<T> conv1_b;  // [72]
    std::vector<T> prelu1;   // [72]
    std::vector<T> conv2_w;  // [9][72][72]
    std::vector<T> conv2_b;  // [72]
    std::vector<T> prelu2;   // [72]
    std::vector<T> conv3_w;  // [72]
    std::vector<T> conv3_b;  // [1]

    static Params zeros();
    void fill(T value);
};

struct GroupSpec {
    const char* name;
    std::array<int, 3> shape;  // trailing 1s for vectors
    int size;
};
inline constexpr std::array<GroupSpec, 8> kGroups = {{
    {"conv1_w", {9, 1, 72}, 648},
    {"conv1_b", {72, 1, 1}, 72},
    {"prelu1", {72, 1, 1}, 72},
    {"conv2_w", {9, 72, 72}, 46656},
    {"conv2_b", {72, 1, 1}, 72},
    {"prelu2", {72, 1, 1}, 72},
    {"conv3_w", {72, 1, 1}, 72},
    {"conv3_b", {1, 1, 1}, 1},
}};

template <class T>
std::array<T*, 8> group_pointers(Params<T>& p);
template <class T>
std::array<const T*, 8> group_pointers(const Params<T>& p);

// Fan-in-scaled uniform kernels in +-sqrt(6/fan_in), zero biases, PReLU
// slopes 0.25. network_id separates the nine per-position substreams.
template <class T>
Params<T> init_params(std::uint64_t seed, int network_id = 0);

// Forward stash reused across steps to avoid reallocation.
template <class T>
struct Workspace {
    Tensor<T> z1, a1, z2, a2, y;
    Tensor<T> grad_out, d_after2, d_before2, d_after1, d_before1;
    std::vector<T> conv2_w_bwd;  // [9][out_c][in_c], tap-flipped transpose
};

template <class T>
void forward(const Params<T>& params, const Tensor<T>& input, Tensor<T>& output,
             Workspace<T>& ws);

// Symmetric + consistency objective on one sub-image pair:
//   L = (|f(x1)-x2|^2 + |f(x2)-x1|^2) / (2M)
//     + lambda * (|f(x1)-y1h|^2 + |f(x2)-y2h|^2) / (2M)
// with M the pixel count and |.|^2 the sum of squares. The consistency
// targets y1h/y2h are constants (no gradient flows through them).
// Gradients are accumulated into `grads` (caller zeroes them).
template <class T>
double loss_and_grad(const Params<T>& params, const Image& x1, const Image& x2,
                     const Image& y1h, const Image& y2h, double lambda,
                     Params<T>& grads, Workspace<T>& ws);

// Forward-only objective value; the finite-difference oracle in the tests
// differentiates this.
template <class T>
double loss_value(const Params<T>& params, const Image& x1, const Image& x2,
                  const Image& y1h, const Image& y2h, double lambda,
                  Workspace<T>& ws);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    Params<T> m = Params<T>::zeros();
    Params<T> v = Params<T>::zeros();
    long long step = 0;
};

template <class T>
void adam_step(Params<T>& params, const Params<T>& grads, AdamState<T>& state,
               const AdamConfig& cfg);

// Checkpoint: one JSON header line (dtype, seed, step, group shapes) followed
// by the raw little-endian group arrays in kGroups order.
template <class T>
void save_checkpoint(const Params<T>& params, std::uint64_t seed,
                     long long step, const std::string& path);
template <class T>
Params<T> load_checkpoint(const std::string& path, std::uint64_t* seed = nullptr,
                          long long* step = nullptr);

}  // namespace m2m::cnn
