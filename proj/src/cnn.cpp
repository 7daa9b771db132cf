#include "m2m/cnn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "m2m/kernels.hpp"
#include "m2m/rng.hpp"

namespace m2m::cnn {

template <class T>
Params<T> Params<T>::zeros() {
    Params<T> p;
    p.conv1_w.assign(9 * 72, T(0));
    p.conv1_b.assign(72, T(0));
    p.prelu1.assign(72, T(0));
    p.conv2_w.assign(9 * 72 * 72, T(0));
    p.conv2_b.assign(72, T(0));
    p.prelu2.assign(72, T(0));
    p.conv3_w.assign(72, T(0));
    p.conv3_b.assign(1, T(0));
    return p;
}

template <class T>
void Params<T>::fill(T value) {
    auto ptrs = group_pointers(*this);
    for (int k = 0; k < 8; ++k) {
        std::fill(ptrs[k], ptrs[k] + kGroups[k].size, value);
    }
}

template <class T>
std::array<T*, 8> group_pointers(Params<T>& p) {
    return {p.conv1_w.data(), p.conv1_b.data(), p.prelu1.data(),
            p.conv2_w.data(), p.conv2_b.data(), p.prelu2.data(),
            p.conv3_w.data(), p.conv3_b.data()};
}

template <class T>
std::array<const T*, 8> group_pointers(const Params<T>& p) {
    return {p.conv1_w.data(), p.conv1_b.data(), p.prelu1.data(),
            p.conv2_w.data(), p.conv2_b.data(), p.prelu2.data(),
            p.conv3_w.data(), p.conv3_b.data()};
}

template <class T>
Params<T> init_params(std::uint64_t seed, int network_id) {
    Params<T> p = Params<T>::zeros();
    rng::Stream s(seed, rng::split(rng::split(0, rng::kTagInit),
                                   static_cast<std::uint64_t>(network_id)));
    auto uniform_fill = [&s](std::vector<T>& w, double fan_in) {
        const double bound = std::sqrt(6.0 / fan_in);
        for (T& v : w) v = static_cast<T>((2.0 * s.next_unit() - 1.0) * bound);
    };
    uniform_fill(p.conv1_w, 9.0 * 1.0);
    uniform_fill(p.conv2_w, 9.0 * 72.0);
    uniform_fill(p.conv3_w, 72.0);
    std::fill(p.prelu1.begin(), p.prelu1.end(), T(0.25));
    std::fill(p.prelu2.begin(), p.prelu2.end(), T(0.25));
    return p;
}

template <class T>
void forward(const Params<T>& params, const Tensor<T>& input, Tensor<T>& output,
             Workspace<T>& ws) {
    if (input.c != 1 || input.h < 1 || input.w < 1) {
        throw std::invalid_argument("forward: expected a nonempty h x w x 1 input");
    }
    const int h = input.h, w = input.w;
    ws.z1.resize(h, w, kChannels);
    ws.a1.resize(h, w, kChannels);
    ws.z2.resize(h, w, kChannels);
    ws.a2.resize(h, w, kChannels);
    output.resize(h, w, 1);

    kernels::conv3x3_forward(input.v.data(), h, w, 1, params.conv1_w.data(),
                             params.conv1_b.data(), kChannels, ws.z1.v.data());
    kernels::prelu_forward(ws.z1.v.data(), h * w, kChannels, params.prelu1.data(),
                           ws.a1.v.data());
    kernels::conv3x3_forward(ws.a1.v.data(), h, w, kChannels, params.conv2_w.data(),
                             params.conv2_b.data(), kChannels, ws.z2.v.data());
    kernels::prelu_forward(ws.z2.v.data(), h * w, kChannels, params.prelu2.data(),
                           ws.a2.v.data());
    kernels::conv1x1_forward(ws.a2.v.data(), h, w, kChannels, params.conv3_w.data(),
                             params.conv3_b.data(), 1, output.v.data());
}

namespace {

// Flip taps and swap in/out channel axes so the data-gradient pass can reuse
// the forward kernel.
template <class T>
void transpose_for_backward(const std::vector<T>& w, std::vector<T>& out) {
    out.resize(9 * kChannels * kChannels);
    for (int tap = 0; tap < 9; ++tap) {
        const T* src = w.data() + static_cast<std::size_t>(tap) * kChannels * kChannels;
        T* dst = out.data() + static_cast<std::size_t>(8 - tap) * kChannels * kChannels;
        for (int i = 0; i < kChannels; ++i) {
            for (int o = 0; o < kChannels; ++o) {
                dst[static_cast<std::size_t>(o) * kChannels + i] =
                    src[static_cast<std::size_t>(i) * kChannels + o];
            }
        }
    }
}

// One source->target pass: forward x, add the pass's squared errors, and
// accumulate parameter gradients.
template <class T>
double pass_loss_and_grad(const Params<T>& params, const Image& x,
                          const Image& target, const Image& y_hat,
                          double lambda, double inv_m, Params<T>& grads,
                          Workspace<T>& ws) {
    Tensor<T> input = to_tensor<T>(x);
    const int h = input.h, w = input.w;
    const int n = h * w;
    forward(params, input, ws.y, ws);

    // Output gradient and loss terms (accumulated in double).
    ws.grad_out.resize(h, w, 1);
    double sse_sym = 0.0, sse_cons = 0.0;
    for (int e = 0; e < n; ++e) {
        const double y = static_cast<double>(ws.y.v[e]);
        const double dt = y - target.data[e];
        sse_sym += dt * dt;
        double g = dt;
        if (lambda > 0.0) {
            const double dc = y - y_hat.data[e];
            sse_cons += dc * dc;
            g += lambda * dc;
        }
        ws.grad_out.v[e] = static_cast<T>(g * inv_m);
    }

    // conv3 (1x1) backward.
    kernels::conv1x1_backward_weights(ws.a2.v.data(), ws.grad_out.v.data(), h, w,
                                      kChannels, 1, grads.conv3_w.data());
    kernels::channel_sums(ws.grad_out.v.data(), n, 1, grads.conv3_b.data());
    ws.d_after2.resize(h, w, kChannels);
    const T zero_bias[kChannels] = {};
    kernels::conv1x1_forward(ws.grad_out.v.data(), h, w, 1, params.conv3_w.data(),
                             zero_bias, kChannels, ws.d_after2.v.data());

    // PReLU 2.
    ws.d_before2.resize(h, w, kChannels);
    kernels::prelu_backward_data(ws.z2.v.data(), params.prelu2.data(),
                                 ws.d_after2.v.data(), n, kChannels,
                                 ws.d_before2.v.data());
    kernels::prelu_backward_slopes(ws.z2.v.data(), ws.d_after2.v.data(), n,
                                   kChannels, grads.prelu2.data());

    // conv2 backward.
    kernels::conv3x3_backward_weights(ws.a1.v.data(), ws.d_before2.v.data(), h, w,
                                      kChannels, kChannels, grads.conv2_w.data());
    kernels::channel_sums(ws.d_before2.v.data(), n, kChannels, grads.conv2_b.data());
    transpose_for_backward(params.conv2_w, ws.conv2_w_bwd);
    ws.d_after1.resize(h, w, kChannels);
    kernels::conv3x3_forward(ws.d_before2.v.data(), h, w, kChannels,
                             ws.conv2_w_bwd.data(), zero_bias, kChannels,
                             ws.d_after1.v.data());

    // PReLU 1.
    ws.d_before1.resize(h, w, kChannels);
    kernels::prelu_backward_data(ws.z1.v.data(), params.prelu1.data(),
                                 ws.d_after1.v.data(), n, kChannels,
                                 ws.d_before1.v.data());
    kernels::prelu_backward_slopes(ws.z1.v.data(), ws.d_after1.v.data(), n,
                                   kChannels, grads.prelu1.data());

    // conv1 backward (input gradient not needed).
    kernels::conv3x3_backward_weights(input.v.data(), ws.d_before1.v.data(), h, w,
                                      1, kChannels, grads.conv1_w.data());
    kernels::channel_sums(ws.d_before1.v.data(), n, kChannels, grads.conv1_b.data());

    return sse_sym + lambda * sse_cons;
}

template <class T>
void check_same_shape(const Image& a, const Image& b, const char* what) {
    if (a.height != b.height || a.width != b.width) {
        throw std::invalid_argument(std::string("loss_and_grad: shape mismatch: ") + what);
    }
}

}  // namespace

template <class T>
double loss_and_grad(const Params<T>& params, const Image& x1, const Image& x2,
                     const Image& y1h, const Image& y2h, double lambda,
                     Params<T>& grads, Workspace<T>& ws) {
    check_same_shape<T>(x1, x2, "x1 vs x2");
    if (lambda > 0.0) {
        check_same_shape<T>(x1, y1h, "x1 vs y1h");
        check_same_shape<T>(x2, y2h, "x2 vs y2h");
    }
    const double inv_m = 1.0 / static_cast<double>(x1.pixel_count());
    double sse = 0.0;
    sse += pass_loss_and_grad(params, x1, x2, y1h, lambda, inv_m, grads, ws);
    sse += pass_loss_and_grad(params, x2, x1, y2h, lambda, inv_m, grads, ws);
    return 0.5 * sse * inv_m;
}

template <class T>
double loss_value(const Params<T>& params, const Image& x1, const Image& x2,
                  const Image& y1h, const Image& y2h, double lambda,
                  Workspace<T>& ws) {
    check_same_shape<T>(x1, x2, "x1 vs x2");
    const double inv_m = 1.0 / static_cast<double>(x1.pixel_count());
    double sse = 0.0;
    const Image* xs[2] = {&x1, &x2};
    const Image* ts[2] = {&x2, &x1};
    const Image* ys[2] = {&y1h, &y2h};
    for (int pass = 0; pass < 2; ++pass) {
        Tensor<T> input = to_tensor<T>(*xs[pass]);
        forward(params, input, ws.y, ws);
        for (std::size_t e = 0; e < ws.y.size(); ++e) {
            const double y = static_cast<double>(ws.y.v[e]);
            const double dt = y - ts[pass]->data[e];
            sse += dt * dt;
            if (lambda > 0.0) {
                const double dc = y - ys[pass]->data[e];
                sse += lambda * dc * dc;
            }
        }
    }
    return 0.5 * sse * inv_m;
}

template <class T>
void adam_step(Params<T>& params, const Params<T>& grads, AdamState<T>& state,
               const AdamConfig& cfg) {
    state.step += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    auto p = group_pointers(params);
    auto g = group_pointers(grads);
    auto m = group_pointers(state.m);
    auto v = group_pointers(state.v);
    for (int k = 0; k < 8; ++k) {
        const int n = kGroups[k].size;
        for (int i = 0; i < n; ++i) {
            const double gi = static_cast<double>(g[k][i]);
            const double mi = cfg.beta1 * static_cast<double>(m[k][i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * static_cast<double>(v[k][i]) + (1.0 - cfg.beta2) * gi * gi;
            m[k][i] = static_cast<T>(mi);
            v[k][i] = static_cast<T>(vi);
            const double update = cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps);
            p[k][i] = static_cast<T>(static_cast<double>(p[k][i]) - update);
        }
    }
}

namespace {

template <class T>
const char* dtype_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace

template <class T>
void save_checkpoint(const Params<T>& params, std::uint64_t seed,
                     long long step, const std::string& path) {
    nlohmann::json header;
    header["format"] = "m2m-checkpoint";
    header["version"] = 1;
    header["dtype"] = dtype_name<T>();
    header["seed"] = seed;
    header["step"] = step;
    header["layout"] = "tap,in_c,out_c";
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : kGroups) {
        groups.push_back({{"name", g.name}, {"shape", g.shape}});
    }
    header["groups"] = groups;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << header.dump() << "\n";
    auto ptrs = group_pointers(params);
    for (int k = 0; k < 8; ++k) {
        out.write(reinterpret_cast<const char*>(ptrs[k]),
                  static_cast<std::streamsize>(sizeof(T)) * kGroups[k].size);
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

template <class T>
Params<T> load_checkpoint(const std::string& path, std::uint64_t* seed,
                          long long* step) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("load_checkpoint: missing header in " + path);
    }
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "m2m-checkpoint") {
        throw std::runtime_error("load_checkpoint: bad header in " + path);
    }
    if (header.value("dtype", "") != dtype_name<T>()) {
        throw std::runtime_error("load_checkpoint: dtype mismatch in " + path);
    }
    if (seed) *seed = header.value("seed", std::uint64_t{0});
    if (step) *step = header.value("step", 0LL);
    Params<T> p = Params<T>::zeros();
    auto ptrs = group_pointers(p);
    for (int k = 0; k < 8; ++k) {
        in.read(reinterpret_cast<char*>(ptrs[k]),
                static_cast<std::streamsize>(sizeof(T)) * kGroups[k].size);
        if (in.gcount() != static_cast<std::streamsize>(sizeof(T)) * kGroups[k].size) {
            throw std::runtime_error("load_checkpoint: truncated data in " + path);
        }
    }
    return p;
}

#define M2M_INSTANTIATE_CNN(T)                                                  \
    template struct Params<T>;                                                  \
    template std::array<T*, 8> group_pointers<T>(Params<T>&);                   \
    template std::array<const T*, 8> group_pointers<T>(const Params<T>&);       \
    template Params<T> init_params<T>(std::uint64_t, int);                      \
    template void forward<T>(const Params<T>&, const Tensor<T>&, Tensor<T>&,    \
                             Workspace<T>&);                                    \
    template double loss_and_grad<T>(const Params<T>&, const Image&,            \
                                     const Image&, const Image&, const Image&,  \
                                     double, Params<T>&, Workspace<T>&);        \
    template double loss_value<T>(const Params<T>&, const Image&, const Image&, \
                                  const Image&, const Image&, double,           \
                                  Workspace<T>&);                               \
    template void adam_step<T>(Params<T>&, const Params<T>&, AdamState<T>&,     \
                               const AdamConfig&);                              \
    template void save_checkpoint<T>(const Params<T>&, std::uint64_t,           \
                                     long long, const std::string&);            \
    template Params<T> load_checkpoint<T>(const std::string&, std::uint64_t*,   \
                                          long long*);

M2M_INSTANTIATE_CNN(float)
M2M_INSTANTIATE_CNN(double)
#undef M2M_INSTANTIATE_CNN

}  // namespace m2m::cnn
