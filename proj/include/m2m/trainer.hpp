#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "m2m/cnn.hpp"
#include "m2m/image.hpp"
#include "m2m/sampling.hpp"

namespace m2m::train {

struct TrainConfig {
    int epochs = 1000;
    int k_inference = 8;            // repeated-inference count
    double lambda = 1.0;            // consistency-loss weight
    cnn::AdamConfig adam;
    sampling::Options sampling;
    bool use_repeated_inference = true;  // false forces k = 1 (ablation)
    std::uint64_t seed = 0;
    bool fast32 = false;            // train/infer in float32 instead of float64

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;  // averaged over the nine networks
};

struct DenoiseResult {
    Image output;  // same dims as the input, clipped to [0,1]
    std::vector<EpochLog> losses;
};

// Block-wise training drives nine per-position networks. The pixel-wise
// ablation removes the patch partition, and with it the notion of distinct
// sampling positions, so it trains a single network on full-size pairs.
template <class T>
struct PositionNets {
    std::vector<cnn::Params<T>> params;
    std::vector<cnn::AdamState<T>> opt;
    int count() const { return static_cast<int>(params.size()); }
};

// One optimizer step per network per epoch on freshly resampled pairs; the
// de-structured image and its per-network denoised resamples are rebuilt
// every epoch from the same decision substreams as the pairs.
template <class T>
PositionNets<T> train(const Image& noisy, const TrainConfig& cfg,
                      std::vector<EpochLog>* log = nullptr);

// Repeated inference: k fresh sampling passes, both pair elements pushed
// through each position's network, per-position averages reassembled and
// clipped to [0,1].
template <class T>
Image infer(const Image& noisy, const PositionNets<T>& nets,
            const TrainConfig& cfg);

// train + infer. If checkpoint_dir is nonempty, the nine trained networks
// are written there as checkpoint_<position>.ckpt.
DenoiseResult denoise(const Image& noisy, const TrainConfig& cfg,
                      const std::string& checkpoint_dir = "");

}  // namespace m2m::train
