#pragma once

#include <array>
#include <cstdint>

// Counter-based random number generation. All randomness in the toolkit
// flows through Philox4x32-10 so that any (seed, substream, index) triple
// maps to the same value in every language/runtime that implements the
// same constants.
//
//   Philox4x32-10 multipliers: 0xD2511F53, 0xCD9E8D57
//   Philox key schedule bumps: 0x9E3779B9, 0xBB67AE85
//   Substream derivation:      splitmix64 finalizer
//                              (0xBF58476D1CE4E5B9, 0x94D049BB133111EB)
//   Normal variates:           inverse normal CDF (Wichura's PPND16)
//                              applied to a 53-bit uniform in (0,1)

namespace m2m::rng {

// One Philox4x32-10 block: 4 output words from a 64-bit key and a 128-bit
// counter supplied as (block index, substream id).
std::array<std::uint32_t, 4> philox_block(std::uint64_t key,
                                          std::uint64_t block,
                                          std::uint64_t stream_id);

// Folds one context component into a running substream id.
// split(split(seed_tag, a), b) != split(split(seed_tag, b), a) in general,
// so chained calls encode an ordered tuple.
inline std::uint64_t split(std::uint64_t h, std::uint64_t v) {
    std::uint64_t z = h + 0x9E3779B97F4A7C15ULL + v;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Named substream tags. Every consumer derives its stream id from one of
// these so that draws never alias between unrelated pipeline stages.
enum Tag : std::uint64_t {
    kTagNoise = 1,
    kTagSampleTrain = 2,
    kTagSampleInfer = 3,
    kTagInit = 4,
    kTagBench = 5,
};

// Inverse CDF of the standard normal distribution (PPND16, |error| ~ 1e-16
// in the core range). p must lie strictly inside (0,1).
double normal_quantile(double p);

// Sequential view of one substream. Words are consumed in block order;
// identical (seed, id) always replays the identical sequence.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t id)
        : key_(seed), id_(id) {}

    std::uint32_t next_u32() {
        if (word_ == 4) {
            buf_ = philox_block(key_, block_++, id_);
            word_ = 0;
        }
        return buf_[word_++];
    }

    // 53-bit uniform in the open interval (0,1).
    double next_unit() {
        const std::uint64_t a = next_u32() >> 6;  // 26 bits
        const std::uint64_t b = next_u32() >> 5;  // 27 bits
        return (static_cast<double>((a << 27) | b) + 0.5) * 0x1p-53;
    }

    double next_normal() { return normal_quantile(next_unit()); }

    // Uniform integer in [0, n). Multiply-shift map; modulo bias is below
    // n * 2^-32 which is negligible for the small n used here.
    int next_index(int n) {
        return static_cast<int>(
            (static_cast<std::uint64_t>(next_u32()) * static_cast<std::uint64_t>(n)) >> 32);
    }

    bool next_coin() { return next_unit() < 0.5; }

private:
    std::uint64_t key_;
    std::uint64_t id_;
    std::uint64_t block_ = 0;
    int word_ = 4;
    std::array<std::uint32_t, 4> buf_{};
};

// Random-access standard normal keyed by (seed, stream, index): the value
// does not depend on how the surrounding field is tiled or threaded.
inline double normal_at(std::uint64_t seed, std::uint64_t id, std::uint64_t index) {
    const auto w = philox_block(seed, index, id);
    const std::uint64_t a = static_cast<std::uint64_t>(w[0] >> 6);
    const std::uint64_t b = static_cast<std::uint64_t>(w[1] >> 5);
    const double u = (static_cast<double>((a << 27) | b) + 0.5) * 0x1p-53;
    return normal_quantile(u);
}

}  // namespace m2m::rng
