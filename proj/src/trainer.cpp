#include "m2m/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "m2m/rng.hpp"

namespace m2m::train {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (k_inference < 1) throw std::invalid_argument("TrainConfig: k must be >= 1");
    if (lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
    if (adam.lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be > 0");
}

namespace {

// Pixel-wise sampling has no patch partition and therefore no distinct
// positions; the single network keys its substreams off the center position.
SamplingPosition net_position(const TrainConfig& cfg, int k) {
    return cfg.sampling.block_wise ? SamplingPosition::from_index(k)
                                   : SamplingPosition::from_index(4);
}

int net_count(const TrainConfig& cfg) {
    return cfg.sampling.block_wise ? kNumPositions : 1;
}

// De-structured image for the epoch's sampling instance.
template <class Pairs>
Image destructured(const Pairs& pairs, int h, int w, bool block_wise) {
    if (block_wise) {
        std::array<sampling::SubImagePair, 9> arr;
        for (int k = 0; k < 9; ++k) arr[k] = pairs[k];
        return sampling::destructure_from_pairs(arr, h, w, true);
    }
    const Image& a = pairs[0].x1;
    const Image& b = pairs[0].x2;
    Image out(h, w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            out.at(i, j) = 0.5 * (a.at(i, j) + b.at(i, j));
        }
    }
    return out;
}

}  // namespace

template <class T>
PositionNets<T> train(const Image& noisy, const TrainConfig& cfg,
                      std::vector<EpochLog>* log) {
    cfg.validate();
    if (noisy.height < 3 || noisy.width < 3) {
        throw std::invalid_argument("train: image must be at least 3x3");
    }

    const int nets_n = net_count(cfg);
    PositionNets<T> nets;
    for (int k = 0; k < nets_n; ++k) {
        nets.params.push_back(cnn::init_params<T>(cfg.seed, net_position(cfg, k).index()));
        nets.opt.emplace_back();
    }

    cnn::Workspace<T> ws;
    cnn::Tensor<T> denoised;
    cnn::Params<T> grads = cnn::Params<T>::zeros();
    Image empty;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<sampling::SubImagePair> pairs;
        pairs.reserve(nets_n);
        for (int k = 0; k < nets_n; ++k) {
            pairs.push_back(sampling::sample_position(
                noisy, net_position(cfg, k), cfg.sampling, cfg.seed,
                static_cast<std::uint64_t>(epoch)));
        }
        Image ihat;
        cnn::Tensor<T> ihat_t;
        if (cfg.lambda > 0.0) {
            ihat = destructured(pairs, noisy.height, noisy.width,
                                cfg.sampling.block_wise);
            ihat_t = cnn::to_tensor<T>(ihat);
        }

        double loss_sum = 0.0;
        for (int k = 0; k < nets_n; ++k) {
            Image y1h, y2h;
            if (cfg.lambda > 0.0) {
                cnn::forward(nets.params[k], ihat_t, denoised, ws);
                const Image den_img = cnn::to_image(denoised);
                // Same decision substream as this epoch's pairs, so the
                // consistency pair is sampled exactly like (x1, x2).
                auto yh = sampling::sample_position(
                    den_img, net_position(cfg, k), cfg.sampling, cfg.seed,
                    static_cast<std::uint64_t>(epoch));
                y1h = std::move(yh.x1);
                y2h = std::move(yh.x2);
            }
            grads.fill(T(0));
            const double loss = cnn::loss_and_grad(
                nets.params[k], pairs[k].x1, pairs[k].x2,
                cfg.lambda > 0.0 ? y1h : empty, cfg.lambda > 0.0 ? y2h : empty,
                cfg.lambda, grads, ws);
            if (!std::isfinite(loss)) {
                throw std::runtime_error(
                    "train: non-finite loss at epoch " + std::to_string(epoch) +
                    ", network " + std::to_string(k));
            }
            cnn::adam_step(nets.params[k], grads, nets.opt[k], cfg.adam);
            loss_sum += loss;
        }
        if (log) log->push_back({epoch, loss_sum / nets_n});
    }
    return nets;
}

template <class T>
Image infer(const Image& noisy, const PositionNets<T>& nets,
            const TrainConfig& cfg) {
    cfg.validate();
    if (nets.count() != net_count(cfg)) {
        throw std::invalid_argument("infer: network count does not match config");
    }
    const int reps = cfg.use_repeated_inference ? cfg.k_inference : 1;
    const int nets_n = nets.count();

    cnn::Workspace<T> ws;
    cnn::Tensor<T> out;
    std::vector<Image> sums(nets_n);
    bool initialized = false;

    for (int rep = 0; rep < reps; ++rep) {
        for (int k = 0; k < nets_n; ++k) {
            const auto pair = sampling::sample_position(
                noisy, net_position(cfg, k), cfg.sampling, cfg.seed,
                static_cast<std::uint64_t>(rep), rng::kTagSampleInfer);
            if (!initialized) {
                sums[k] = Image(pair.x1.height, pair.x1.width, 0.0);
            }
            for (const Image* x : {&pair.x1, &pair.x2}) {
                cnn::Tensor<T> input = cnn::to_tensor<T>(*x);
                cnn::forward(nets.params[k], input, out, ws);
                for (std::size_t e = 0; e < sums[k].data.size(); ++e) {
                    sums[k].data[e] += static_cast<double>(out.v[e]);
                }
            }
        }
        initialized = true;
    }

    const double scale = 1.0 / (2.0 * reps);
    for (Image& s : sums) {
        for (double& v : s.data) v *= scale;
    }

    Image result;
    if (cfg.sampling.block_wise) {
        std::array<Image, 9> subs;
        for (int k = 0; k < 9; ++k) subs[k] = std::move(sums[k]);
        result = sampling::reassemble(subs, noisy.height, noisy.width, true);
    } else {
        result = Image(noisy.height, noisy.width);
        for (int i = 0; i < noisy.height; ++i) {
            for (int j = 0; j < noisy.width; ++j) {
                result.at(i, j) = sums[0].at(i, j);
            }
        }
    }
    for (double& v : result.data) v = std::clamp(v, 0.0, 1.0);
    return result;
}

namespace {

template <class T>
DenoiseResult denoise_impl(const Image& noisy, const TrainConfig& cfg,
                           const std::string& checkpoint_dir) {
    DenoiseResult result;
    PositionNets<T> nets = train<T>(noisy, cfg, &result.losses);
    result.output = infer<T>(noisy, nets, cfg);
    if (!checkpoint_dir.empty()) {
        for (int k = 0; k < nets.count(); ++k) {
            const std::string name =
                cfg.sampling.block_wise ? kPositionNames[k] : "pixelwise";
            cnn::save_checkpoint(nets.params[k], cfg.seed, nets.opt[k].step,
                                 checkpoint_dir + "/checkpoint_" + name + ".ckpt");
        }
    }
    return result;
}

}  // namespace

DenoiseResult denoise(const Image& noisy, const TrainConfig& cfg,
                      const std::string& checkpoint_dir) {
    return cfg.fast32 ? denoise_impl<float>(noisy, cfg, checkpoint_dir)
                      : denoise_impl<double>(noisy, cfg, checkpoint_dir);
}

template PositionNets<float> train<float>(const Image&, const TrainConfig&,
                                          std::vector<EpochLog>*);
template PositionNets<double> train<double>(const Image&, const TrainConfig&,
                                            std::vector<EpochLog>*);
template Image infer<float>(const Image&, const PositionNets<float>&,
                            const TrainConfig&);
template Image infer<double>(const Image&, const PositionNets<double>&,
                             const TrainConfig&);

}  // namespace m2m::train
