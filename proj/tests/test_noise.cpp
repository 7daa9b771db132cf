#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "m2m/noise.hpp"
#include "test_util.hpp"

using namespace m2m;

TEST_CASE("iid generation is seed-deterministic and bit-stable") {
    const Image a = noise::gen_iid_gaussian(64, 64, 1.0, 42);
    const Image b = noise::gen_iid_gaussian(64, 64, 1.0, 42);
    const Image c = noise::gen_iid_gaussian(64, 64, 1.0, 43);
    CHECK(testutil::bit_identical(a, b));
    CHECK_FALSE(testutil::bit_identical(a, c));
}

TEST_CASE("iid moments at one million samples") {
    const Image x = noise::gen_iid_gaussian(1000, 1000, 1.0, 7);
    CHECK(std::fabs(noise::field_mean(x)) < 0.004);   // ~4 standard errors
    const double sd = noise::field_std(x);
    CHECK(sd > 0.997);
    CHECK(sd < 1.003);
}

TEST_CASE("directional averaging identity at ell=1") {
    const Image x = noise::gen_iid_gaussian(32, 32, 1.0, 3);
    CHECK(testutil::bit_identical(noise::directional_average(x, 0, 1, 1), x));
}

TEST_CASE("directional averaging argument checks") {
    const Image x = noise::gen_iid_gaussian(16, 16, 1.0, 3);
    CHECK_THROWS_AS(noise::directional_average(x, 0, 1, 4), std::invalid_argument);
    const Image tiny = noise::gen_iid_gaussian(2, 2, 1.0, 3);
    CHECK_THROWS_AS(noise::directional_average(tiny, 0, 1, 7), std::invalid_argument);
}

TEST_CASE("filtered variance and correlations match the closed forms") {
    const int n = 1200;  // > 1e6 interior pixels
    const Image x = noise::gen_iid_gaussian(n, n, 1.0, 11);

    SUBCASE("ell=3 horizontal") {
        const Image y = noise::directional_average(x, 0, 1, 3);
        // Interior variance ~ 1/3 within 2%.
        double ss = 0.0, s = 0.0;
        std::size_t cnt = 0;
        for (int i = 1; i < n - 1; ++i) {
            for (int j = 1; j < n - 1; ++j) {
                s += y.at(i, j);
                ss += y.at(i, j) * y.at(i, j);
                ++cnt;
            }
        }
        const double var = ss / cnt - (s / cnt) * (s / cnt);
        CHECK(var == doctest::Approx(1.0 / 3).epsilon(0.02));

        const auto st = noise::estimate_statistics(y, 0, 1, 4, 1);
        CHECK(st.along[0] == doctest::Approx(2.0 / 3).epsilon(0.03));
        CHECK(std::fabs(st.along[0] - 2.0 / 3) < 0.02);
        CHECK(std::fabs(st.along[1] - 1.0 / 3) < 0.02);
        CHECK(std::fabs(st.along[2]) < 0.02);
        CHECK(std::fabs(st.along[3]) < 0.02);
        for (double o : st.ortho) CHECK(std::fabs(o) < 0.02);
    }

    SUBCASE("ell=5 lags including the cutoff") {
        const Image y = noise::directional_average(x, 0, 1, 5);
        const auto st = noise::estimate_statistics(y, 0, 1, 5, 2);
        CHECK(std::fabs(st.along[1] - 3.0 / 5) < 0.02);  // t=2 -> 3/5
        CHECK(std::fabs(st.along[4]) < 0.02);            // t=5 -> 0
    }

    SUBCASE("diagonal direction (1,1)") {
        const Image y = noise::directional_average(x, 1, 1, 3);
        const auto st = noise::estimate_statistics(y, 1, 1, 3, 2);
        CHECK(std::fabs(st.along[0] - 2.0 / 3) < 0.02);
        CHECK(std::fabs(st.along[2]) < 0.02);
        for (double o : st.ortho) CHECK(std::fabs(o) < 0.02);
    }
}

TEST_CASE("iid field has no spurious correlation") {
    const Image x = noise::gen_iid_gaussian(1000, 1000, 1.0, 5);
    const auto st = noise::estimate_statistics(x, 0, 1, 3);
    for (double v : st.along) CHECK(std::fabs(v) < 0.01);
    for (double v : st.ortho) CHECK(std::fabs(v) < 0.01);
}

TEST_CASE("scaling hits the target level exactly and preserves correlation") {
    const Image x = noise::gen_iid_gaussian(400, 400, 1.0, 9);
    const Image y = noise::directional_average(x, 0, 1, 3);
    const Image scaled = noise::scale_to_level(y, 0.1);
    CHECK(noise::field_std(scaled) == doctest::Approx(0.1).epsilon(1e-12));

    const auto before = noise::estimate_statistics(y, 0, 1, 2, 1);
    const auto after = noise::estimate_statistics(scaled, 0, 1, 2, 1);
    CHECK(before.along[0] == doctest::Approx(after.along[0]).epsilon(1e-9));

    // Pure gain: y std 0.5 -> factor 0.2 against sigma_n 0.1.
    Image two(8, 8);
    for (int i = 0; i < 64; ++i) two.data[i] = (i % 2 == 0) ? 0.5 : -0.5;
    const Image s2 = noise::scale_to_level(two, 0.1);
    CHECK(s2.data[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(s2.data[1] == doctest::Approx(-0.1).epsilon(1e-12));

    CHECK_THROWS_AS(noise::scale_to_level(Image(4, 4, 1.0), 0.1),
                    std::invalid_argument);
}

TEST_CASE("corrupt clips, degenerates and stays deterministic") {
    noise::NoiseConfig cfg;
    cfg.ell = 3;
    cfg.sigma_n = 0.15;
    cfg.seed = 21;
    const Image clean = testutil::ramp(48, 48, 0.2, 0.8);

    const Image noisy1 = noise::corrupt(clean, cfg);
    const Image noisy2 = noise::corrupt(clean, cfg);
    CHECK(testutil::bit_identical(noisy1, noisy2));
    for (double v : noisy1.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    // sigma_n = 0 leaves the image untouched.
    noise::NoiseConfig zero = cfg;
    zero.sigma_n = 0.0;
    CHECK(testutil::bit_identical(noise::corrupt(clean, zero), clean));

    // Clipping never increases the per-pixel distortion.
    const Image field = noise::make_noise_field(48, 48, cfg);
    for (std::size_t i = 0; i < clean.data.size(); ++i) {
        CHECK(std::fabs(noisy1.data[i] - clean.data[i]) <=
              std::fabs(field.data[i]) + 1e-15);
    }

    // ell=1 degenerates to i.i.d.: no residual correlation in the noise.
    noise::NoiseConfig iid = cfg;
    iid.ell = 1;
    const Image f1 = noise::make_noise_field(700, 700, iid);
    const auto st = noise::estimate_statistics(f1, 0, 1, 2);
    CHECK(std::fabs(st.along[0]) < 0.02);
}

TEST_CASE("config validation") {
    noise::NoiseConfig cfg;
    cfg.ell = 2;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.ell = 3;
    cfg.q = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.q = 2;
    cfg.p = 2;  // gcd 2: not reduced
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.p = 1;
    CHECK_NOTHROW(cfg.validate());
    cfg.p = 0;
    cfg.q = 1;
    cfg.sigma_n = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
