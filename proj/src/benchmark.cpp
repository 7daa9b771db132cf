#include "m2m/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "m2m/baselines.hpp"
#include "m2m/metrics.hpp"
#include "m2m/rng.hpp"

namespace m2m::bench {

bool method_known(const std::string& name) {
    return name == "m2m-1st" || name == "m2m-0-4n" || name == "m2m-0-8n" ||
           name == "zsn2n" || name == "noisy";
}

namespace {

Image denoise_with(const std::string& method, const Image& noisy,
                   train::TrainConfig cfg) {
    if (method == "noisy") return noisy;
    if (method == "zsn2n") return baselines::zsn2n_denoise(noisy, cfg).output;
    if (method == "m2m-1st") {
        cfg.sampling.scheme = sampling::Scheme::FirstOrder;
    } else if (method == "m2m-0-4n") {
        cfg.sampling.scheme = sampling::Scheme::ZeroOrder4N;
    } else if (method == "m2m-0-8n") {
        cfg.sampling.scheme = sampling::Scheme::ZeroOrder8N;
    } else {
        throw std::invalid_argument("benchmark: unknown method " + method);
    }
    return train::denoise(noisy, cfg).output;
}

}  // namespace

Row run_cell(const std::string& image_name, const Image& clean, int ell,
             double sigma, const std::string& method, std::uint64_t seed,
             const GridConfig& grid) {
    noise::NoiseConfig ncfg;
    ncfg.p = grid.noise_p;
    ncfg.q = grid.noise_q;
    ncfg.ell = ell;
    ncfg.sigma_n = sigma;
    // One noisy observation per (image, ell, sigma, seed) cell, shared by
    // every method in that cell.
    using rng::split;
    ncfg.seed = split(split(split(split(seed, rng::kTagBench),
                                  std::hash<std::string>{}(image_name)),
                            static_cast<std::uint64_t>(ell)),
                      static_cast<std::uint64_t>(std::llround(sigma * 1e6)));
    const Image noisy = noise::corrupt(clean, ncfg);

    train::TrainConfig cfg = grid.base;
    cfg.seed = seed;

    Row row;
    row.image = image_name;
    row.ell = ell;
    row.sigma = sigma;
    row.method = method;
    row.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const Image out = denoise_with(method, noisy, cfg);
    const auto t1 = std::chrono::steady_clock::now();
    row.seconds = std::chrono::duration<double>(t1 - t0).count();
    row.psnr_db = metrics::psnr(clean, out);
    row.ssim = metrics::ssim(clean, out);
    return row;
}

std::vector<Row> run(const std::vector<std::pair<std::string, Image>>& cleans,
                     const GridConfig& grid) {
    if (cleans.empty()) {
        throw std::invalid_argument("benchmark: need at least one clean image");
    }
    for (const auto& m : grid.methods) {
        if (!method_known(m)) {
            throw std::invalid_argument("benchmark: unknown method " + m);
        }
    }
    std::vector<Row> rows;
    for (const auto& [name, clean] : cleans) {
        for (int ell : grid.ells) {
            for (double sigma : grid.sigmas) {
                for (std::uint64_t seed : grid.seeds) {
                    for (const auto& method : grid.methods) {
                        rows.push_back(
                            run_cell(name, clean, ell, sigma, method, seed, grid));
                    }
                }
            }
        }
    }
    return rows;
}

void write_csv(const std::vector<Row>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // LF endings everywhere
    if (!out) throw std::runtime_error("benchmark: cannot open " + path);
    out << "image,ell,sigma,method,seed,psnr_db,ssim,seconds\n";
    char buf[128];
    for (const Row& r : rows) {
        out << r.image << ',' << r.ell << ',';
        std::snprintf(buf, sizeof(buf), "%g", r.sigma);
        out << buf << ',' << r.method << ',' << r.seed << ',';
        if (std::isinf(r.psnr_db)) {
            out << "inf";
        } else {
            std::snprintf(buf, sizeof(buf), "%.6f", r.psnr_db);
            out << buf;
        }
        std::snprintf(buf, sizeof(buf), ",%.6f,%.3f\n", r.ssim, r.seconds);
        out << buf;
    }
    if (!out) throw std::runtime_error("benchmark: write failed for " + path);
}

}  // namespace m2m::bench
