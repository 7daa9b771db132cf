#include "m2m/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace m2m::baselines {

ImagePair baseline_sample(const Image& noisy, BaselineKind kind) {
    ImagePair out;
    if (kind == BaselineKind::CheckerboardSqueeze) {
        if (noisy.width % 2 != 0) {
            throw std::invalid_argument("baseline_sample: checkerboard needs even width");
        }
        out.x1 = Image(noisy.height, noisy.width / 2);
        out.x2 = Image(noisy.height, noisy.width / 2);
        for (int i = 0; i < noisy.height; ++i) {
            const int phase = i % 2;  // column parity of the (i+j)-even phase
            for (int c = 0; c < noisy.width / 2; ++c) {
                out.x1.at(i, c) = noisy.at(i, 2 * c + phase);
                out.x2.at(i, c) = noisy.at(i, 2 * c + 1 - phase);
            }
        }
    } else {
        if (noisy.height % 2 != 0 || noisy.width % 2 != 0) {
            throw std::invalid_argument("baseline_sample: 2x2 means need even dims");
        }
        out.x1 = Image(noisy.height / 2, noisy.width / 2);
        out.x2 = Image(noisy.height / 2, noisy.width / 2);
        for (int r = 0; r < noisy.height / 2; ++r) {
            for (int c = 0; c < noisy.width / 2; ++c) {
                out.x1.at(r, c) =
                    0.5 * (noisy.at(2 * r, 2 * c) + noisy.at(2 * r + 1, 2 * c + 1));
                out.x2.at(r, c) =
                    0.5 * (noisy.at(2 * r, 2 * c + 1) + noisy.at(2 * r + 1, 2 * c));
            }
        }
    }
    return out;
}

Image pad_to_even(const Image& img) {
    const int th = img.height + (img.height % 2);
    const int tw = img.width + (img.width % 2);
    if (th == img.height && tw == img.width) return img;
    const PaddedImage p = reflect_pad(img, th, tw, 0);
    Image out(th, tw);
    for (int i = 0; i < th; ++i) {
        for (int j = 0; j < tw; ++j) out.at(i, j) = p.at(i, j);
    }
    return out;
}

namespace {

template <class T>
train::DenoiseResult zsn2n_impl(const Image& noisy, const train::TrainConfig& cfg) {
    cfg.validate();
    const Image even = pad_to_even(noisy);
    const ImagePair pair = baseline_sample(even, BaselineKind::DiagonalMeans2x2);

    cnn::Params<T> params = cnn::init_params<T>(cfg.seed, /*network_id=*/9);
    cnn::AdamState<T> opt;
    cnn::Workspace<T> ws;
    cnn::Params<T> grads = cnn::Params<T>::zeros();
    cnn::Tensor<T> noisy_t = cnn::to_tensor<T>(even);
    cnn::Tensor<T> den;
    Image empty;

    train::DenoiseResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Image y1h, y2h;
        if (cfg.lambda > 0.0) {
            cnn::forward(params, noisy_t, den, ws);
            const Image den_img = cnn::to_image(den);
            ImagePair yh = baseline_sample(den_img, BaselineKind::DiagonalMeans2x2);
            y1h = std::move(yh.x1);
            y2h = std::move(yh.x2);
        }
        grads.fill(T(0));
        const double loss = cnn::loss_and_grad(
            params, pair.x1, pair.x2, cfg.lambda > 0.0 ? y1h : empty,
            cfg.lambda > 0.0 ? y2h : empty, cfg.lambda, grads, ws);
        if (!std::isfinite(loss)) {
            throw std::runtime_error("zsn2n_denoise: non-finite loss at epoch " +
                                     std::to_string(epoch));
        }
        cnn::adam_step(params, grads, opt, cfg.adam);
        result.losses.push_back({epoch, loss});
    }

    cnn::forward(params, noisy_t, den, ws);
    result.output = Image(noisy.height, noisy.width);
    for (int i = 0; i < noisy.height; ++i) {
        for (int j = 0; j < noisy.width; ++j) {
            result.output.at(i, j) = std::clamp(
                static_cast<double>(den.v[static_cast<std::size_t>(i) * even.width + j]),
                0.0, 1.0);
        }
    }
    return result;
}

}  // namespace

train::DenoiseResult zsn2n_denoise(const Image& noisy, const train::TrainConfig& cfg) {
    return cfg.fast32 ? zsn2n_impl<float>(noisy, cfg) : zsn2n_impl<double>(noisy, cfg);
}

}  // namespace m2m::baselines
