#pragma once

#include <string>
#include <utility>
#include <vector>

#include "m2m/image.hpp"
#include "m2m/noise.hpp"
#include "m2m/trainer.hpp"

namespace m2m::bench {

struct Row {
    std::string image;
    int ell = 0;
    double sigma = 0.0;
    std::string method;
    std::uint64_t seed = 0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double seconds = 0.0;
};

// Known method names: m2m-1st, m2m-0-4n, m2m-0-8n, zsn2n, noisy.
bool method_known(const std::string& name);

struct GridConfig {
    std::vector<int> ells = {1, 3, 5, 7};
    std::vector<double> sigmas = {0.05, 0.10, 0.15};
    std::vector<std::string> methods = {"m2m-1st", "zsn2n", "noisy"};
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    int noise_p = 0;  // correlation direction of the synthetic noise
    int noise_q = 1;
    // Shared trainer settings (epochs, k, lambda, lr, fast32); every learned
    // method runs with identical hyperparameters.
    train::TrainConfig base;
};

// Full grid: every (image, ell, sigma, seed) cell synthesizes one noisy
// observation that all methods share.
std::vector<Row> run(const std::vector<std::pair<std::string, Image>>& cleans,
                     const GridConfig& grid);

// One cell; exposed for tests and the acceptance suite.
Row run_cell(const std::string& image_name, const Image& clean, int ell,
             double sigma, const std::string& method, std::uint64_t seed,
             const GridConfig& grid);

void write_csv(const std::vector<Row>& rows, const std::string& path);

}  // namespace m2m::bench
