#pragma once

#include <array>
#include <cassert>
#include <string>
#include <vector>

namespace m2m {

// Grayscale image, row-major doubles. Intensities are normalized to [0,1]
// at the I/O boundary; intermediate buffers (noise fields, network
// activations) reuse the same container with unrestricted values.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, double fill = 0.0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    double& at(int i, int j) {
        assert(i >= 0 && i < height && j >= 0 && j < width);
        return data[static_cast<std::size_t>(i) * width + j];
    }
    double at(int i, int j) const {
        assert(i >= 0 && i < height && j >= 0 && j < width);
        return data[static_cast<std::size_t>(i) * width + j];
    }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(height) * width;
    }
};

// One of the nine relative locations inside a 3x3 patch. Index order is
// row-major: TL,T,TR,L,C,R,BL,B,BR.
struct SamplingPosition {
    int row_offset = 0;  // in {0,1,2}
    int col_offset = 0;  // in {0,1,2}

    int index() const { return row_offset * 3 + col_offset; }
    static SamplingPosition from_index(int idx) {
        assert(idx >= 0 && idx < 9);
        return {idx / 3, idx % 3};
    }
};

inline constexpr int kNumPositions = 9;
inline constexpr std::array<const char*, 9> kPositionNames = {
    "tl", "t", "tr", "l", "c", "r", "bl", "b", "br"};

// Image extended to 3-divisible dimensions (mirrored bottom/right), plus an
// optional reflective ring around the whole extended image. Coordinates are
// expressed in the extended image's frame: at(i,j) accepts
// i in [-border, padded_height+border) and likewise for j.
struct PaddedImage {
    int base_height = 0;    // H
    int base_width = 0;     // W
    int padded_height = 0;  // target extension of H
    int padded_width = 0;
    int border = 0;
    std::vector<double> data;  // (padded_height+2*border) x (padded_width+2*border)

    double at(int i, int j) const {
        assert(i >= -border && i < padded_height + border);
        assert(j >= -border && j < padded_width + border);
        const int stride = padded_width + 2 * border;
        return data[static_cast<std::size_t>(i + border) * stride + (j + border)];
    }
};

// Mirrors the image to target_h x target_w (new rows/columns appended on the
// bottom/right only, reflected without repeating the edge pixel), then adds
// extra_border reflective rings around the extended result.
PaddedImage reflect_pad(const Image& img, int target_h, int target_w,
                        int extra_border);

// Dimensions rounded up to the next multiple of 3.
inline int padded_extent(int n) { return ((n + 2) / 3) * 3; }

// Non-overlapping 3x3 tiling of a padded image.
struct PatchGrid {
    int rows = 0;
    int cols = 0;
    int count() const { return rows * cols; }
};
PatchGrid patch_grid(const PaddedImage& p);

// PGM (P5) load/save. 8- or 16-bit single channel; values map linearly to
// [0,1] on load. Saving clips to [0,1] and rounds half up.
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path, int maxval = 255);

}  // namespace m2m
