#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "deflare/image_io.hpp"
#include "deflare/metrics.hpp"
#include "support/oracles.hpp"

using namespace deflare;

TEST_CASE("psnr closed forms") {
    Rng rng(91);
    Tensor a = oracle::random_tensor(rng, 3, 16, 16, 0.0, 1.0);
    CHECK(psnr(a, a) == 100.0);

    Tensor b = a;
    for (double& t : b.v) t += 0.1;
    CHECK(psnr(b, a) == doctest::Approx(20.0).epsilon(1e-12));

    Tensor c = a;
    for (double& t : c.v) t += 0.05;
    CHECK(psnr(c, a) > psnr(b, a));  // smaller error, larger psnr

    CHECK_THROWS_AS(psnr(a, Tensor(3, 8, 8)), std::invalid_argument);
}

TEST_CASE("ssim basics") {
    Rng rng(92);
    Tensor a = oracle::random_tensor(rng, 3, 24, 24, 0.0, 1.0);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

    // Inverted checkerboard away from mid-gray: structure flips sign.
    Tensor pat(3, 24, 24);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x)
                pat.at(c, y, x) = ((x + y) % 2) ? 0.9 : 0.1;
    Tensor inv = pat;
    for (double& t : inv.v) t = 1.0 - t;
    double s = ssim(inv, pat);
    CHECK(s < 0.5);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);

    CHECK_THROWS_AS(ssim(Tensor(3, 8, 8), Tensor(3, 8, 8)), std::invalid_argument);
}

TEST_CASE("masked psnr") {
    Rng rng(93);
    Tensor a = oracle::random_tensor(rng, 3, 8, 8, 0.0, 1.0);
    Tensor b = oracle::random_tensor(rng, 3, 8, 8, 0.0, 1.0);

    SUBCASE("full mask reduces to psnr") {
        Tensor full(1, 8, 8);
        full.fill(1.0);
        auto m = masked_psnr(a, b, full);
        REQUIRE(m.has_value());
        CHECK(std::abs(*m - psnr(a, b)) < 1e-9);
    }
    SUBCASE("empty mask is not a number") {
        Tensor empty(1, 8, 8);
        CHECK(!masked_psnr(a, b, empty).has_value());
    }
    SUBCASE("identical images hit the cap") {
        Tensor full(1, 8, 8);
        full.fill(1.0);
        CHECK(*masked_psnr(a, a, full) == 100.0);
    }
    SUBCASE("four-pixel hand computation") {
        Tensor pred(3, 8, 8), target(3, 8, 8);
        Tensor mask(1, 8, 8);
        // Mask a 2x2 region; per-pixel differences set by hand on channel 0.
        double diffs[4] = {0.1, 0.2, 0.3, 0.4};
        int k = 0;
        for (int y = 2; y < 4; ++y)
            for (int x = 5; x < 7; ++x) {
                mask.at(0, y, x) = 1.0;
                pred.at(0, y, x) = 0.5 + diffs[k++];
                target.at(0, y, x) = 0.5;
            }
        // MSE over 4 pixels x 3 channels; channels 1,2 contribute zeros.
        double mse = (0.01 + 0.04 + 0.09 + 0.16) / 12.0;
        double expect = 10.0 * std::log10(1.0 / mse);
        auto m = masked_psnr(pred, target, mask);
        REQUIRE(m.has_value());
        CHECK(std::abs(*m - expect) < 1e-9);
    }
}

TEST_CASE("spectrum image") {
    SUBCASE("constant image lights only the center pixel") {
        Tensor img(3, 16, 16);
        img.fill(0.7);
        Tensor s = spectrum_image(img);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                CHECK(s.at(0, y, x) == ((y == 8 && x == 8) ? 1.0 : 0.0));
    }
    SUBCASE("horizontal grating gives two symmetric dots") {
        Tensor img(3, 32, 32);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x)
                    img.at(c, y, x) = 0.5 + 0.4 * std::cos(2.0 * M_PI * 5 * x / 32.0);
        Tensor s = spectrum_image(img);
        CHECK(s.at(0, 16, 16 + 5) == doctest::Approx(1.0));
        CHECK(s.at(0, 16, 16 - 5) == doctest::Approx(1.0));
        // Everything else except DC is far dimmer.
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (!(y == 16 && (x == 16 || x == 11 || x == 21)))
                    CHECK(s.at(0, y, x) < 0.5);
    }
    SUBCASE("range is exactly [0,1] for non-constant input") {
        Rng rng(94);
        Tensor img = oracle::random_tensor(rng, 3, 16, 16, 0.0, 1.0);
        Tensor s = spectrum_image(img);
        double lo = 1e9, hi = -1e9;
        for (double t : s.v) {
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
        CHECK(lo == 0.0);
        CHECK(hi == 1.0);
    }
    SUBCASE("adding a constant changes only the DC pixel") {
        Rng rng(95);
        Tensor img = oracle::random_tensor(rng, 3, 16, 16, 0.1, 0.6);
        Tensor shifted = img;
        for (double& t : shifted.v) t += 0.2;
        Tensor a = spectrum_image(img);
        Tensor b = spectrum_image(shifted);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                if (!(y == 8 && x == 8))
                    CHECK(a.at(0, y, x) == doctest::Approx(b.at(0, y, x)).epsilon(1e-9));
    }
}

TEST_CASE("png round trip") {
    Rng rng(96);
    Tensor img = oracle::random_tensor(rng, 3, 20, 14, 0.0, 1.0);
    std::string path = "/tmp/deflare_test_roundtrip.png";
    write_png(path, img);
    Tensor back = read_png(path);
    CHECK(back.c == 3);
    CHECK(back.h == 20);
    CHECK(back.w == 14);
    // 8-bit quantization error only.
    CHECK(max_abs_diff(back, img) <= 0.5 / 255.0 + 1e-9);

    Tensor gray(1, 8, 8);
    gray.fill(0.25);
    write_png(path, gray);
    Tensor g = read_png(path);
    CHECK(g.at(0, 3, 3) == doctest::Approx(0.25).epsilon(0.01));
    std::remove(path.c_str());

    CHECK_THROWS_AS(read_png("/nonexistent/nope.png"), std::runtime_error);
}
