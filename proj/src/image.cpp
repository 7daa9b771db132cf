#include "m2m/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace m2m {

namespace {

// Reflection without edge duplication: ...c,b | a,b,c | b,a... The fold is
// iterated so it stays well defined even when the extension exceeds the
// source extent.
int mirror_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

}  // namespace

PaddedImage reflect_pad(const Image& img, int target_h, int target_w,
                        int extra_border) {
    if (img.height <= 0 || img.width <= 0) {
        throw std::invalid_argument("reflect_pad: empty image");
    }
    if (target_h < img.height || target_w < img.width) {
        throw std::invalid_argument("reflect_pad: target smaller than source");
    }
    if (extra_border < 0) {
        throw std::invalid_argument("reflect_pad: negative border");
    }

    // Stage 1: extend bottom/right to the target size, mirroring the source.
    Image ext(target_h, target_w);
    for (int i = 0; i < target_h; ++i) {
        const int si = mirror_index(i, img.height);
        for (int j = 0; j < target_w; ++j) {
            ext.at(i, j) = img.at(si, mirror_index(j, img.width));
        }
    }

    // Stage 2: ring around the extended image, mirroring the extended image.
    PaddedImage out;
    out.base_height = img.height;
    out.base_width = img.width;
    out.padded_height = target_h;
    out.padded_width = target_w;
    out.border = extra_border;
    const int fh = target_h + 2 * extra_border;
    const int fw = target_w + 2 * extra_border;
    out.data.resize(static_cast<std::size_t>(fh) * fw);
    for (int i = 0; i < fh; ++i) {
        const int si = mirror_index(i - extra_border, target_h);
        for (int j = 0; j < fw; ++j) {
            out.data[static_cast<std::size_t>(i) * fw + j] =
                ext.at(si, mirror_index(j - extra_border, target_w));
        }
    }
    return out;
}

PatchGrid patch_grid(const PaddedImage& p) {
    if (p.padded_height % 3 != 0 || p.padded_width % 3 != 0) {
        throw std::invalid_argument("patch_grid: dimensions not divisible by 3");
    }
    return {p.padded_height / 3, p.padded_width / 3};
}

namespace {

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            while ((c = in.peek()) != EOF && !std::isspace(c)) {
                tok.push_back(static_cast<char>(in.get()));
            }
            return tok;
        }
    }
    return tok;
}

int parse_positive(const std::string& tok, const char* what, const std::string& path) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(tok, &pos);
        if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("load_image: bad " + std::string(what) + " in " + path);
    }
}

}  // namespace

Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_image: cannot open " + path);
    }
    const std::string magic = next_token(in);
    if (magic == "P6" || magic == "P3") {
        throw std::runtime_error("load_image: multi-channel input not supported: " + path);
    }
    if (magic != "P5") {
        throw std::runtime_error("load_image: unsupported format '" + magic + "' in " + path +
                                 " (expected binary PGM, magic P5)");
    }
    const int w = parse_positive(next_token(in), "width", path);
    const int h = parse_positive(next_token(in), "height", path);
    const int maxval = parse_positive(next_token(in), "maxval", path);
    if (maxval != 255 && maxval != 65535) {
        throw std::runtime_error("load_image: unsupported maxval in " + path +
                                 " (expected 255 or 65535)");
    }
    in.get();  // single whitespace byte after maxval

    Image img(h, w);
    const std::size_t n = img.pixel_count();
    if (maxval == 255) {
        std::vector<std::uint8_t> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) {
            throw std::runtime_error("load_image: truncated pixel data in " + path);
        }
        for (std::size_t i = 0; i < n; ++i) img.data[i] = raw[i] / 255.0;
    } else {
        std::vector<std::uint8_t> raw(2 * n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(2 * n));
        if (static_cast<std::size_t>(in.gcount()) != 2 * n) {
            throw std::runtime_error("load_image: truncated pixel data in " + path);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const int v = (raw[2 * i] << 8) | raw[2 * i + 1];  // big-endian
            img.data[i] = v / 65535.0;
        }
    }
    return img;
}

void save_image(const Image& img, const std::string& path, int maxval) {
    if (maxval != 255 && maxval != 65535) {
        throw std::invalid_argument("save_image: maxval must be 255 or 65535");
    }
    if (img.height <= 0 || img.width <= 0) {
        throw std::invalid_argument("save_image: empty image");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_image: cannot open " + path);
    }
    out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
    const std::size_t n = img.pixel_count();
    auto quantize = [maxval](double v) {
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        const int q = static_cast<int>(std::floor(v * maxval + 0.5));  // round half up
        return q > maxval ? maxval : q;
    };
    if (maxval == 255) {
        std::vector<std::uint8_t> raw(n);
        for (std::size_t i = 0; i < n; ++i) {
            raw[i] = static_cast<std::uint8_t>(quantize(img.data[i]));
        }
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(n));
    } else {
        std::vector<std::uint8_t> raw(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            const int q = quantize(img.data[i]);
            raw[2 * i] = static_cast<std::uint8_t>(q >> 8);
            raw[2 * i + 1] = static_cast<std::uint8_t>(q & 0xFF);
        }
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(2 * n));
    }
    if (!out) {
        throw std::runtime_error("save_image: write failed for " + path);
    }
}

}  // namespace m2m
