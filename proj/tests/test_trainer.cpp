#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <omp.h>

#include "m2m/metrics.hpp"
#include "m2m/noise.hpp"
#include "m2m/phantom.hpp"
#include "m2m/trainer.hpp"
#include "test_util.hpp"

using namespace m2m;
using train::TrainConfig;

namespace {

train::PositionNets<double> identity_nets() {
    train::PositionNets<double> nets;
    for (int k = 0; k < 9; ++k) {
        cnn::Params<double> p = cnn::Params<double>::zeros();
        p.conv1_w[4 * 72 + 0] = 1.0;
        p.conv2_w[(4 * 72 + 0) * 72 + 0] = 1.0;
        p.conv3_w[0] = 1.0;
        std::fill(p.prelu1.begin(), p.prelu1.end(), 1.0);
        std::fill(p.prelu2.begin(), p.prelu2.end(), 1.0);
        nets.params.push_back(std::move(p));
        nets.opt.emplace_back();
    }
    return nets;
}

}  // namespace

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.epochs = 1;
    cfg.k_inference = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.k_inference = 1;
    cfg.lambda = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("one epoch means exactly one optimizer step per network") {
    const Image noisy = testutil::random_image(9, 9, 1, 0.2, 0.8);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 5;
    const auto nets = train::train<double>(noisy, cfg);
    for (const auto& opt : nets.opt) CHECK(opt.step == 1);
}

TEST_CASE("training is bit-deterministic for a fixed config") {
    const Image noisy = testutil::random_image(10, 10, 2, 0.2, 0.8);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 11;
    std::vector<train::EpochLog> log1, log2;
    const auto a = train::train<double>(noisy, cfg, &log1);
    const auto b = train::train<double>(noisy, cfg, &log2);
    for (int k = 0; k < 9; ++k) {
        CHECK(a.params[k].conv2_w == b.params[k].conv2_w);
        CHECK(a.params[k].conv3_b == b.params[k].conv3_b);
    }
    REQUIRE(log1.size() == 3);
    CHECK(log1[0].mean_loss == log2[0].mean_loss);
    // A different seed diverges.
    cfg.seed = 12;
    const auto c = train::train<double>(noisy, cfg);
    CHECK(a.params[0].conv2_w != c.params[0].conv2_w);
}

TEST_CASE("denoise output matches across thread counts bit-exactly") {
    const Image noisy = testutil::random_image(12, 12, 3, 0.2, 0.8);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.k_inference = 2;
    cfg.seed = 21;
    omp_set_num_threads(1);
    const auto r1 = train::denoise(noisy, cfg);
    omp_set_num_threads(4);
    const auto r4 = train::denoise(noisy, cfg);
    omp_set_num_threads(omp_get_num_procs());
    CHECK(testutil::bit_identical(r1.output, r4.output));
}

TEST_CASE("constant image trains to a constant output") {
    // Sub-images must not be degenerate for this oracle: with 4x4 sub-images
    // the conv zero-padding ring covers everything and the consistency
    // targets carry a border bias. 33x33 gives 11x11 sub-images.
    const double c = 0.6;
    const Image noisy(33, 33, c);
    TrainConfig cfg;
    cfg.epochs = 400;
    cfg.seed = 7;
    cfg.k_inference = 2;
    std::vector<train::EpochLog> log;
    const auto nets = train::train<double>(noisy, cfg, &log);
    CHECK(std::isfinite(log.front().mean_loss));
    CHECK(log.back().mean_loss < log.front().mean_loss);
    const Image out = train::infer<double>(noisy, nets, cfg);
    REQUIRE(out.height == 33);
    for (double v : out.data) CHECK(std::fabs(v - c) < 0.01);
}

TEST_CASE("identity networks produce a smoothed full-size image in range") {
    const Image noisy = testutil::random_image(11, 14, 4, 0.0, 1.0);
    TrainConfig cfg;
    cfg.k_inference = 3;
    cfg.seed = 2;
    const auto nets = identity_nets();
    const Image out = train::infer<double>(noisy, nets, cfg);
    REQUIRE(out.height == 11);
    REQUIRE(out.width == 14);
    for (double v : out.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // Identity networks + averaging = de-structured resample mean; it stays
    // close to the input but is not the input itself on noise-free content.
    CHECK(testutil::max_abs_diff(out, noisy) > 0.0);
}

TEST_CASE("disabling repeated inference equals k=1") {
    const Image noisy = testutil::random_image(9, 9, 5, 0.2, 0.8);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 9;
    const auto nets = train::train<double>(noisy, cfg);

    TrainConfig k1 = cfg;
    k1.k_inference = 1;
    TrainConfig norep = cfg;
    norep.k_inference = 8;
    norep.use_repeated_inference = false;
    CHECK(testutil::bit_identical(train::infer<double>(noisy, nets, k1),
                                  train::infer<double>(noisy, nets, norep)));
}

TEST_CASE("repeated inference does not hurt on structured noise") {
    const Image clean = make_phantom(48);
    noise::NoiseConfig ncfg;
    ncfg.ell = 3;
    ncfg.sigma_n = 0.10;
    ncfg.seed = 33;
    const Image noisy = noise::corrupt(clean, ncfg);

    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.seed = 1;
    cfg.fast32 = true;
    const auto nets = train::train<float>(noisy, cfg);

    TrainConfig k1 = cfg;
    k1.k_inference = 1;
    TrainConfig k8 = cfg;
    k8.k_inference = 8;
    const double p1 = metrics::psnr(clean, train::infer<float>(noisy, nets, k1));
    const double p8 = metrics::psnr(clean, train::infer<float>(noisy, nets, k8));
    CHECK(p8 >= p1);
    // And training actually denoises this scene.
    CHECK(p8 > metrics::psnr(clean, noisy));
}

TEST_CASE("pixel-wise ablation keeps the interface but full-size pairs") {
    const Image noisy = testutil::random_image(9, 9, 6, 0.2, 0.8);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 3;
    cfg.sampling.block_wise = false;
    const auto result = train::denoise(noisy, cfg);
    REQUIRE(result.output.height == 9);
    REQUIRE(result.output.width == 9);
    for (double v : result.output.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("checkpoints are written when requested") {
    const Image noisy = testutil::random_image(9, 9, 7, 0.2, 0.8);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 4;
    const auto result = train::denoise(noisy, cfg, ".");
    for (const char* name : kPositionNames) {
        const std::string path = std::string("./checkpoint_") + name + ".ckpt";
        const auto params = cnn::load_checkpoint<double>(path);
        CHECK(params.conv2_w.size() == 9u * 72u * 72u);
        std::remove(path.c_str());
    }
}
