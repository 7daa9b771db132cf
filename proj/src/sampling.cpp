#include "m2m/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace m2m::sampling {

const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::ZeroOrder4N: return "0-4n";
        case Scheme::ZeroOrder8N: return "0-8n";
        case Scheme::FirstOrder: return "1st";
    }
    return "?";
}

int candidate_count(Scheme scheme, bool include_center) {
    const int n = (scheme == Scheme::ZeroOrder8N) ? 9 : 5;
    return include_center ? n : n - 1;
}

void interpolate_candidates(const PaddedImage& padded, int i, int j,
                            Scheme scheme, bool include_center,
                            std::vector<double>& out) {
    if (padded.border < 1) {
        throw std::invalid_argument("interpolate_candidates: 1-pixel border required");
    }
    if (i < 0 || i >= padded.padded_height || j < 0 || j >= padded.padded_width) {
        throw std::invalid_argument("interpolate_candidates: pixel outside padded image");
    }
    out.clear();
    if (include_center) out.push_back(padded.at(i, j));
    switch (scheme) {
        case Scheme::ZeroOrder4N:
            out.push_back(padded.at(i - 1, j));
            out.push_back(padded.at(i + 1, j));
            out.push_back(padded.at(i, j - 1));
            out.push_back(padded.at(i, j + 1));
            break;
        case Scheme::ZeroOrder8N:
            for (int di = -1; di <= 1; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    out.push_back(padded.at(i + di, j + dj));
                }
            }
            break;
        case Scheme::FirstOrder: {
            // Directions 0, 45, 90, 135 degrees.
            static constexpr int off[4][2] = {{0, 1}, {-1, 1}, {1, 0}, {-1, -1}};
            for (const auto& d : off) {
                out.push_back(0.5 * (padded.at(i + d[0], j + d[1]) +
                                     padded.at(i - d[0], j - d[1])));
            }
            break;
        }
    }
}

std::array<double, 3> median_filter3(const std::vector<double>& candidates) {
    const int n = static_cast<int>(candidates.size());
    if (n < 3) throw std::invalid_argument("median_filter3: need at least 3 candidates");
    std::vector<double> v = candidates;
    std::sort(v.begin(), v.end());
    const int m = (n + 1) / 2;  // ceil(n/2), 1-based median index
    return {v[m - 2], v[m - 1], v[m]};
}

Decision draw_decision(rng::Stream& stream) {
    Decision d;
    d.pair_index = stream.next_index(3);
    d.flip = stream.next_coin();
    return d;
}

std::pair<double, double> apply_decision(const std::array<double, 3>& sf,
                                         const Decision& d,
                                         bool random_assignment) {
    static constexpr int idx[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    double m1 = sf[idx[d.pair_index][0]];
    double m2 = sf[idx[d.pair_index][1]];
    if (random_assignment && d.flip) std::swap(m1, m2);
    return {m1, m2};
}

namespace {

SubImagePair sample_impl(const Image& noisy, SamplingPosition pos,
                         const Options& opts,
                         const std::function<Decision(std::uint64_t)>& decide) {
    if (noisy.height < 3 || noisy.width < 3) {
        throw std::invalid_argument("sample_position: image must be at least 3x3");
    }
    const int ph = padded_extent(noisy.height);
    const int pw = padded_extent(noisy.width);
    const PaddedImage padded = reflect_pad(noisy, ph, pw, 1);

    SubImagePair pair;
    pair.position = pos;
    const int out_h = opts.block_wise ? ph / 3 : ph;
    const int out_w = opts.block_wise ? pw / 3 : pw;
    pair.x1 = Image(out_h, out_w);
    pair.x2 = Image(out_h, out_w);

#pragma omp parallel for schedule(static)
    for (int r = 0; r < out_h; ++r) {
        std::vector<double> cands;
        cands.reserve(9);
        for (int c = 0; c < out_w; ++c) {
            const int i = opts.block_wise ? 3 * r + pos.row_offset : r;
            const int j = opts.block_wise ? 3 * c + pos.col_offset : c;
            interpolate_candidates(padded, i, j, opts.scheme, opts.include_center,
                                   cands);
            const std::array<double, 3> sf = median_filter3(cands);
            const std::uint64_t patch_index =
                static_cast<std::uint64_t>(r) * out_w + c;
            const auto [v1, v2] =
                apply_decision(sf, decide(patch_index), opts.random_assignment);
            pair.x1.at(r, c) = v1;
            pair.x2.at(r, c) = v2;
        }
    }
    return pair;
}

}  // namespace

SubImagePair sample_position(const Image& noisy, SamplingPosition pos,
                             const Options& opts, std::uint64_t seed,
                             std::uint64_t epoch, std::uint64_t tag) {
    const int pos_index = pos.index();
    return sample_impl(noisy, pos, opts, [&](std::uint64_t patch_index) {
        rng::Stream s(seed, decision_stream(tag, epoch, pos_index, patch_index));
        return draw_decision(s);
    });
}

SubImagePair sample_position_with(const Image& noisy, SamplingPosition pos,
                                  const Options& opts,
                                  const std::function<Decision(std::uint64_t)>& decide) {
    return sample_impl(noisy, pos, opts, decide);
}

std::array<SubImagePair, 9> sample_all(const Image& noisy, const Options& opts,
                                       std::uint64_t seed, std::uint64_t epoch,
                                       std::uint64_t tag) {
    std::array<SubImagePair, 9> pairs;
    for (int k = 0; k < kNumPositions; ++k) {
        pairs[k] = sample_position(noisy, SamplingPosition::from_index(k), opts,
                                   seed, epoch, tag);
    }
    return pairs;
}

Image reassemble(const std::array<Image, 9>& subs, int h, int w, bool block_wise) {
    const int ph = padded_extent(h), pw = padded_extent(w);
    Image out(h, w);
    if (block_wise) {
        Image full(ph, pw);
        for (int k = 0; k < kNumPositions; ++k) {
            const auto pos = SamplingPosition::from_index(k);
            const Image& sub = subs[k];
            if (sub.height != ph / 3 || sub.width != pw / 3) {
                throw std::invalid_argument("reassemble: sub-image shape mismatch");
            }
            for (int r = 0; r < sub.height; ++r) {
                for (int c = 0; c < sub.width; ++c) {
                    full.at(3 * r + pos.row_offset, 3 * c + pos.col_offset) =
                        sub.at(r, c);
                }
            }
        }
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) out.at(i, j) = full.at(i, j);
        }
    } else {
        for (const Image& sub : subs) {
            if (sub.height != ph || sub.width != pw) {
                throw std::invalid_argument("reassemble: sub-image shape mismatch");
            }
        }
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                double acc = 0.0;
                for (const Image& sub : subs) acc += sub.at(i, j);
                out.at(i, j) = acc / kNumPositions;
            }
        }
    }
    return out;
}

Image destructure_from_pairs(const std::array<SubImagePair, 9>& pairs,
                             int h, int w, bool block_wise) {
    std::array<Image, 9> means;
    for (int k = 0; k < kNumPositions; ++k) {
        const Image& a = pairs[k].x1;
        const Image& b = pairs[k].x2;
        Image m(a.height, a.width);
        for (std::size_t e = 0; e < m.data.size(); ++e) {
            m.data[e] = 0.5 * (a.data[e] + b.data[e]);
        }
        means[pairs[k].position.index()] = std::move(m);
    }
    return reassemble(means, h, w, block_wise);
}

Image destructure(const Image& noisy, const Options& opts, std::uint64_t seed,
                  std::uint64_t epoch, std::uint64_t tag) {
    return destructure_from_pairs(sample_all(noisy, opts, seed, epoch, tag),
                                  noisy.height, noisy.width, opts.block_wise);
}

}  // namespace m2m::sampling
