#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "m2m/image.hpp"
#include "m2m/rng.hpp"

namespace m2m::sampling {

// Candidate construction inside the 3x3 interpolation window.
//   ZeroOrder4N : target pixel + 4 axis neighbors            (n = 5)
//   ZeroOrder8N : target pixel + 8 surrounding neighbors     (n = 9)
//   FirstOrder  : target pixel + 4 symmetric-pair means along
//                 0/45/90/135 degrees                        (n = 5)
enum class Scheme { ZeroOrder4N, ZeroOrder8N, FirstOrder };

const char* scheme_name(Scheme s);

struct Options {
    Scheme scheme = Scheme::FirstOrder;
    bool block_wise = true;         // false: stride-1 windows (ablation)
    bool include_center = true;     // false: drop the target pixel (ablation)
    bool random_assignment = true;  // false: keep m1 <= m2 order (ablation)
};

struct SubImagePair {
    Image x1, x2;
    SamplingPosition position;
};

int candidate_count(Scheme scheme, bool include_center);

// Candidates at padded coordinate (i, j); the image must carry at least a
// 1-pixel border. Order: target pixel first (when included), then neighbor
// estimates in a fixed documented order.
void interpolate_candidates(const PaddedImage& padded, int i, int j,
                            Scheme scheme, bool include_center,
                            std::vector<double>& out);

// The three order statistics centered on the median of the ascending sort:
// positions ceil(n/2)-1 .. ceil(n/2)+1 (1-based) of the sorted candidates.
std::array<double, 3> median_filter3(const std::vector<double>& candidates);

// Per-patch randomized choices: which unordered pair of the filtered triple,
// and whether the pair order is flipped before assignment.
struct Decision {
    int pair_index = 0;  // 0:(v1,v2) 1:(v1,v3) 2:(v2,v3)
    bool flip = false;
};

Decision draw_decision(rng::Stream& stream);

// Applies a decision to the ascending filtered triple. With random
// assignment disabled the flip is ignored and (m1, m2) keeps m1 <= m2.
std::pair<double, double> apply_decision(const std::array<double, 3>& sf,
                                         const Decision& d,
                                         bool random_assignment);

// Substream id for the decision at one (epoch, position, patch) site.
inline std::uint64_t decision_stream(std::uint64_t tag, std::uint64_t epoch,
                                     int position_index, std::uint64_t patch_index) {
    using rng::split;
    return split(split(split(split(0, tag), epoch), position_index), patch_index);
}

// One M2M sampling pass at one position. Block-wise output is
// (H~/3) x (W~/3); pixel-wise output is H~ x W~ (stride-1 windows).
SubImagePair sample_position(const Image& noisy, SamplingPosition pos,
                             const Options& opts, std::uint64_t seed,
                             std::uint64_t epoch,
                             std::uint64_t tag = rng::kTagSampleTrain);

// Same geometry with caller-provided decisions; used to enumerate the
// sampling space exhaustively.
SubImagePair sample_position_with(const Image& noisy, SamplingPosition pos,
                                  const Options& opts,
                                  const std::function<Decision(std::uint64_t)>& decide);

std::array<SubImagePair, 9> sample_all(const Image& noisy, const Options& opts,
                                       std::uint64_t seed, std::uint64_t epoch,
                                       std::uint64_t tag = rng::kTagSampleTrain);

// Writes one sub-image per position back to its sampling coordinates and
// crops to h x w. Pixel-wise sub-images are averaged instead.
Image reassemble(const std::array<Image, 9>& subs, int h, int w, bool block_wise);

// De-structured image: per-position pair averages reassembled to full size.
Image destructure_from_pairs(const std::array<SubImagePair, 9>& pairs,
                             int h, int w, bool block_wise);
Image destructure(const Image& noisy, const Options& opts, std::uint64_t seed,
                  std::uint64_t epoch, std::uint64_t tag = rng::kTagSampleTrain);

}  // namespace m2m::sampling
