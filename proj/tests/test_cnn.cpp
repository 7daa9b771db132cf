#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "m2m/cnn.hpp"
#include "test_util.hpp"

using namespace m2m;
using cnn::Params;
using cnn::Tensor;
using cnn::Workspace;

namespace {

// Pass-through parameter set: channel 0 carries the pixel, PReLU slopes 1,
// final layer reads channel 0 back out.
Params<double> identity_params() {
    Params<double> p = Params<double>::zeros();
    p.conv1_w[4 * 72 + 0] = 1.0;              // center tap -> channel 0
    p.conv2_w[(4 * 72 + 0) * 72 + 0] = 1.0;   // center tap, ch 0 -> ch 0
    p.conv3_w[0] = 1.0;
    std::fill(p.prelu1.begin(), p.prelu1.end(), 1.0);
    std::fill(p.prelu2.begin(), p.prelu2.end(), 1.0);
    return p;
}

Params<double> random_params(std::uint64_t seed) {
    Params<double> p = cnn::init_params<double>(seed);
    // Nudge biases/slopes off their defaults so every group has signal.
    rng::Stream s(seed, 777);
    for (auto* vec : {&p.conv1_b, &p.prelu1, &p.conv2_b, &p.prelu2, &p.conv3_b}) {
        for (double& v : *vec) v += 0.2 * (s.next_unit() - 0.5);
    }
    return p;
}

}  // namespace

TEST_CASE("all-zero weights with an output bias give a constant image") {
    Params<double> p = Params<double>::zeros();
    p.conv3_b[0] = 0.73;
    Workspace<double> ws;
    Tensor<double> out;
    cnn::forward(p, cnn::to_tensor<double>(testutil::random_image(6, 9, 1)), out, ws);
    REQUIRE(out.h == 6);
    REQUIRE(out.w == 9);
    for (double v : out.v) CHECK(v == 0.73);
}

TEST_CASE("constructed pass-through network is the identity map") {
    const Image img = testutil::random_image(8, 8, 2, 0.1, 0.9);
    Workspace<double> ws;
    Tensor<double> out;
    cnn::forward(identity_params(), cnn::to_tensor<double>(img), out, ws);
    CHECK(testutil::max_abs_diff(cnn::to_image(out), img) < 1e-15);
}

TEST_CASE("forward preserves dims down to 1x1") {
    Workspace<double> ws;
    Tensor<double> out;
    const Params<double> p = cnn::init_params<double>(5);
    for (auto [h, w] : {std::pair{1, 1}, {1, 7}, {5, 1}, {4, 11}}) {
        cnn::forward(p, cnn::to_tensor<double>(testutil::random_image(h, w, 3)), out, ws);
        CHECK(out.h == h);
        CHECK(out.w == w);
    }
}

TEST_CASE("initialization: deterministic, bounded kernels, canonical slopes") {
    const Params<double> a = cnn::init_params<double>(11, 2);
    const Params<double> b = cnn::init_params<double>(11, 2);
    const Params<double> c = cnn::init_params<double>(11, 3);
    CHECK(a.conv2_w == b.conv2_w);
    CHECK(a.conv2_w != c.conv2_w);
    for (double v : a.prelu1) CHECK(v == 0.25);
    for (double v : a.prelu2) CHECK(v == 0.25);
    for (double v : a.conv1_b) CHECK(v == 0.0);
    const double bound1 = std::sqrt(6.0 / 9.0);
    const double bound2 = std::sqrt(6.0 / 648.0);
    for (double v : a.conv1_w) CHECK(std::fabs(v) <= bound1);
    for (double v : a.conv2_w) CHECK(std::fabs(v) <= bound2);
}

TEST_CASE("loss value: plug-in cases") {
    Workspace<double> ws;
    const Image x1 = testutil::random_image(6, 6, 7, 0.0, 1.0);
    const Image x2 = testutil::random_image(6, 6, 8, 0.0, 1.0);

    SUBCASE("identity network with x1 == x2 has zero symmetric loss") {
        const double loss =
            cnn::loss_value(identity_params(), x1, x1, x1, x1, 1.0, ws);
        CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("zero network, lambda 0: mean of both squared means") {
        const Params<double> zero = Params<double>::zeros();
        double expect = 0.0;
        for (double v : x1.data) expect += v * v;
        for (double v : x2.data) expect += v * v;
        expect /= 2.0 * x1.pixel_count();
        const double loss = cnn::loss_value(zero, x1, x2, x1, x2, 0.0, ws);
        CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
    }

    SUBCASE("loss is symmetric under pair exchange") {
        const Params<double> p = random_params(3);
        const Image y1 = testutil::random_image(6, 6, 9);
        const Image y2 = testutil::random_image(6, 6, 10);
        const double a = cnn::loss_value(p, x1, x2, y1, y2, 0.7, ws);
        const double b = cnn::loss_value(p, x2, x1, y2, y1, 0.7, ws);
        CHECK(a == doctest::Approx(b).epsilon(1e-14));
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    // The oracle: perturb each parameter by +-h and differentiate the loss
    // value; every parameter group must agree with backprop.
    Workspace<double> ws;
    const double h = 1e-5;
    const double lambda = 0.8;

    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Params<double> p = random_params(seed);
        const Image x1 = testutil::random_image(5, 5, seed * 11 + 1, 0.0, 1.0);
        const Image x2 = testutil::random_image(5, 5, seed * 11 + 2, 0.0, 1.0);
        const Image y1 = testutil::random_image(5, 5, seed * 11 + 3, 0.0, 1.0);
        const Image y2 = testutil::random_image(5, 5, seed * 11 + 4, 0.0, 1.0);

        Params<double> grads = Params<double>::zeros();
        cnn::loss_and_grad(p, x1, x2, y1, y2, lambda, grads, ws);

        auto pptr = cnn::group_pointers(p);
        auto gptr = cnn::group_pointers(grads);
        rng::Stream pick(seed, 31415);
        for (int k = 0; k < 8; ++k) {
            const int n = cnn::kGroups[k].size;
            const int samples = std::min(n, 10);
            for (int s = 0; s < samples; ++s) {
                const int idx = pick.next_index(n);
                const double saved = pptr[k][idx];
                pptr[k][idx] = saved + h;
                const double lp = cnn::loss_value(p, x1, x2, y1, y2, lambda, ws);
                pptr[k][idx] = saved - h;
                const double lm = cnn::loss_value(p, x1, x2, y1, y2, lambda, ws);
                pptr[k][idx] = saved;
                const double numeric = (lp - lm) / (2.0 * h);
                const double analytic = gptr[k][idx];
                const double denom =
                    std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
                INFO("group ", cnn::kGroups[k].name, " idx ", idx);
                CHECK(std::fabs(numeric - analytic) / denom < 1e-4);
            }
        }
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Params<double> p = random_params(4);
    const Params<double> before = p;
    cnn::AdamState<double> st;
    cnn::adam_step(p, Params<double>::zeros(), st, cnn::AdamConfig{});
    CHECK(p.conv2_w == before.conv2_w);
    CHECK(p.conv3_b == before.conv3_b);
    CHECK(st.step == 1);
}

TEST_CASE("adam: moves against the gradient and descends a quadratic") {
    Params<double> p = Params<double>::zeros();
    cnn::AdamState<double> st;
    Params<double> g = Params<double>::zeros();
    cnn::AdamConfig cfg;

    // Constant positive gradient on one entry drives it negative.
    for (int i = 0; i < 50; ++i) {
        g.conv3_b[0] = 2.5;
        cnn::adam_step(p, g, st, cfg);
    }
    CHECK(p.conv3_b[0] < 0.0);

    // 1-D quadratic loss (theta - 3)^2 decreases under adam.
    double theta = 0.0;
    cnn::AdamState<double> st2;
    Params<double> pv = Params<double>::zeros();
    auto loss = [](double t) { return (t - 3.0) * (t - 3.0); };
    const double l0 = loss(theta);
    for (int i = 0; i < 200; ++i) {
        Params<double> gv = Params<double>::zeros();
        gv.conv3_b[0] = 2.0 * (theta - 3.0);
        pv.conv3_b[0] = theta;
        cnn::adam_step(pv, gv, st2, cfg);
        theta = pv.conv3_b[0];
    }
    CHECK(loss(theta) < l0);
}

TEST_CASE("checkpoints round-trip and reject mismatched dtypes") {
    const Params<double> p = random_params(6);
    const std::string path = "test_ckpt.ckpt";
    cnn::save_checkpoint(p, 1234, 42, path);
    std::uint64_t seed = 0;
    long long step = 0;
    const Params<double> back = cnn::load_checkpoint<double>(path, &seed, &step);
    CHECK(seed == 1234);
    CHECK(step == 42);
    CHECK(back.conv1_w == p.conv1_w);
    CHECK(back.conv2_w == p.conv2_w);
    CHECK(back.prelu2 == p.prelu2);
    CHECK(back.conv3_b == p.conv3_b);
    CHECK_THROWS_AS(cnn::load_checkpoint<float>(path), std::runtime_error);
    std::remove(path.c_str());
}
