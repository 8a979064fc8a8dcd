#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "deflare/fft.hpp"
#include "deflare/synthesis.hpp"
#include "support/oracles.hpp"

using namespace deflare;

namespace {

AugmentParams identity_params() {
    AugmentParams p;
    p.gamma = 2.0;
    p.rotation = 0.0;
    p.translate_x = p.translate_y = 0.0;
    p.shear = 0.0;
    p.scale = 1.0;
    p.blur_sigma = 0.0;
    p.flip = false;
    p.color_shift = {0, 0, 0};
    p.bg_rgb_scale = {1, 1, 1};
    p.noise_var = 0.0;
    return p;
}

Tensor smooth_pattern(int size) {
    Tensor img(3, size, size);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                img.at(c, y, x) =
                    0.5 + 0.3 * std::sin(2.0 * M_PI * (x + 2 * y + 7 * c) / size) *
                              std::cos(2.0 * M_PI * (y - x) / size);
    return img;
}

}  // namespace

TEST_CASE("gamma linearization") {
    Rng rng(81);
    Tensor img = oracle::random_tensor(rng, 3, 8, 8, 0.0, 1.0);
    img.v[0] = 0.0;
    img.v[1] = 1.0;
    for (double g : {1.8, 2.0, 2.2}) {
        Tensor lin = inverse_gamma(img, g);
        CHECK(lin.v[0] == 0.0);
        CHECK(lin.v[1] == 1.0);
        Tensor back = forward_gamma(lin, g);
        CHECK(max_abs_diff(back, img) < 1e-6);
    }
    Tensor half(1, 1, 1);
    half.v[0] = 0.5;
    CHECK(inverse_gamma(half, 2.0).v[0] == doctest::Approx(0.25));
    CHECK_THROWS_AS(inverse_gamma(img, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(inverse_gamma(img, -1.0), std::invalid_argument);
}

TEST_CASE("augment parameter ranges hold over many seeds") {
    for (uint64_t seed = 0; seed < 2000; ++seed) {
        Rng rng(seed);
        AugmentParams p = AugmentParams::sample(rng);
        CHECK(p.gamma >= 1.8);
        CHECK(p.gamma < 2.2);
        CHECK(p.rotation >= 0.0);
        CHECK(p.rotation < 2.0 * M_PI);
        CHECK(std::abs(p.translate_x) <= 300.0);
        CHECK(std::abs(p.translate_y) <= 300.0);
        CHECK(std::abs(p.shear) <= M_PI / 9.0);
        CHECK(p.scale >= 0.8);
        CHECK(p.scale < 1.5);
        CHECK(p.blur_sigma >= 0.1);
        CHECK(p.blur_sigma < 3.0);
        for (double c : p.color_shift) CHECK(std::abs(c) <= 0.02);
        for (double c : p.bg_rgb_scale) {
            CHECK(c >= 0.5);
            CHECK(c < 1.2);
        }
        CHECK(p.noise_var >= 0.0);
    }
}

TEST_CASE("identity augmentation leaves the asset unchanged") {
    FlareAsset asset = procedural_flare(5, 32);
    FlareAsset out = augment_flare(asset, identity_params());
    CHECK(max_abs_diff(out.flare, asset.flare) < 1e-6);
    CHECK(max_abs_diff(out.light_source, asset.light_source) < 1e-6);
}

TEST_CASE("augmentation is deterministic given the parameters") {
    FlareAsset asset = procedural_flare(6, 32);
    Rng rng(99);
    AugmentParams p = AugmentParams::sample(rng);
    FlareAsset a = augment_flare(asset, p);
    FlareAsset b = augment_flare(asset, p);
    CHECK(a.flare.v == b.flare.v);
    CHECK(a.light_source.v == b.light_source.v);
}

TEST_CASE("rotating by pi twice restores the original orientation") {
    FlareAsset asset;
    asset.flare = smooth_pattern(32);
    asset.light_source = smooth_pattern(32);
    AugmentParams p = identity_params();
    p.rotation = M_PI;
    FlareAsset once = augment_flare(asset, p);
    FlareAsset twice = augment_flare(once, p);
    double mean_abs = 0.0;
    for (size_t i = 0; i < twice.flare.v.size(); ++i)
        mean_abs += std::abs(twice.flare.v[i] - asset.flare.v[i]);
    mean_abs /= twice.flare.v.size();
    CHECK(mean_abs < 2e-2);
}

TEST_CASE("flare and light source share the affine transform") {
    // A coordinate-grid pattern must land identically in both layers.
    FlareAsset asset;
    asset.flare = smooth_pattern(32);
    asset.light_source = asset.flare;
    Rng rng(7);
    AugmentParams p = AugmentParams::sample(rng);
    p.color_shift = {0, 0, 0};  // the only flare-specific step
    FlareAsset out = augment_flare(asset, p);
    CHECK(max_abs_diff(out.flare, out.light_source) < 1e-12);
}

TEST_CASE("background augmentation closed forms") {
    AugmentParams p = identity_params();
    Tensor img(3, 8, 8);
    img.fill(0.8);

    SUBCASE("identity") {
        Tensor out = augment_background(img, p, 1);
        CHECK(max_abs_diff(out, img) == 0.0);
    }
    SUBCASE("uniform halving") {
        p.bg_rgb_scale = {0.5, 0.5, 0.5};
        Tensor out = augment_background(img, p, 1);
        for (double t : out.v) CHECK(t == doctest::Approx(0.4));
    }
    SUBCASE("noise variance estimator") {
        Tensor big(3, 600, 600);
        big.fill(0.5);
        p.noise_var = 0.0025;
        Tensor out = augment_background(big, p, 17);
        double mean = 0.0;
        for (double t : out.v) mean += t - 0.5;
        mean /= out.v.size();
        double var = 0.0;
        for (double t : out.v) var += (t - 0.5 - mean) * (t - 0.5 - mean);
        var /= out.v.size();
        CHECK(var == doctest::Approx(0.0025).epsilon(0.05));
    }
}

TEST_CASE("composite closed forms and residual audit") {
    Rng rng(83);
    Tensor bg = oracle::random_tensor(rng, 3, 16, 16, 0.0, 1.0);

    SUBCASE("zero flare") {
        Tensor zero(3, 16, 16);
        CompositeSample s = composite(bg, zero);
        CHECK(max_abs_diff(s.input, bg) == 0.0);
    }
    SUBCASE("saturating flare clips to one") {
        Tensor flare(3, 16, 16);
        flare.fill(2.0);
        CompositeSample s = composite(bg, flare);
        for (double t : s.input.v) CHECK(t == 1.0);
    }
    SUBCASE("residual equals the flare wherever unsaturated") {
        Tensor flare = oracle::random_tensor(rng, 3, 16, 16, 0.0, 0.8);
        CompositeSample s = composite(bg, flare);
        for (size_t i = 0; i < flare.v.size(); ++i)
            if (bg.v[i] + flare.v[i] < 1.0)
                CHECK(s.input.v[i] - s.reference.v[i] ==
                      doctest::Approx(flare.v[i]).epsilon(1e-12));
    }
    SUBCASE("resolution mismatch rejected") {
        CHECK_THROWS_AS(composite(bg, Tensor(3, 8, 8)), std::invalid_argument);
    }
}

TEST_CASE("mask derivation") {
    SUBCASE("zero flare gives empty masks") {
        Tensor zero(3, 32, 32);
        Masks m = derive_masks(zero, zero);
        CHECK(squared_norm(m.glare) == 0.0);
        CHECK(squared_norm(m.streak) == 0.0);
        CHECK(squared_norm(m.light_source) == 0.0);
    }
    SUBCASE("pure disk light source") {
        FlareRecipe r;
        r.light_radius = 6.0;
        FlareAsset asset = render_flare(r, 32);
        Masks m = derive_masks(asset.light_source, asset.light_source);
        CHECK(squared_norm(m.streak) == 0.0);
        Tensor lum = luminance(asset.light_source);
        int expected = 0, got = 0;
        for (int i = 0; i < 32 * 32; ++i) {
            if (lum.v[i] > 0.5) ++expected;
            if (m.light_source.v[i] > 0.0) ++got;
        }
        CHECK(expected == got);
        CHECK(got > 50);  // roughly pi * 6^2
    }
    SUBCASE("masks are pairwise disjoint") {
        FlareAsset asset = procedural_flare(11, 64);
        Masks m = derive_masks(asset.flare, asset.light_source);
        for (int i = 0; i < 64 * 64; ++i)
            CHECK(m.glare.v[i] + m.streak.v[i] + m.light_source.v[i] <= 1.0);
    }
    SUBCASE("streak mask catches elongated components") {
        FlareRecipe r;
        r.streaks.push_back({0.0, 12.0, 1.0, 0.9});
        r.light_radius = 1.0;
        FlareAsset asset = render_flare(r, 48);
        Masks m = derive_masks(asset.flare, asset.light_source);
        CHECK(squared_norm(m.streak) > 10.0);
    }
}

TEST_CASE("make_sample determinism and dataflow") {
    Tensor scene = procedural_scene(21, 32);
    FlareAsset asset = procedural_flare(22, 32);

    CompositeSample a = make_sample(scene, asset, 1234);
    CompositeSample b = make_sample(scene, asset, 1234);
    CHECK(a.input.v == b.input.v);
    CHECK(a.reference.v == b.reference.v);
    CHECK(a.flare.v == b.flare.v);
    CHECK(a.mask_glare.v == b.mask_glare.v);

    // The reference never sees the flare: swapping assets must not change it.
    FlareAsset other = procedural_flare(23, 32);
    CompositeSample c = make_sample(scene, other, 1234);
    CHECK(max_abs_diff(a.reference, c.reference) == 0.0);

    // Everything stored stays in [0,1].
    for (const Tensor* t : {&a.input, &a.reference, &a.flare})
        for (double v : t->v) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
}

TEST_CASE("sampled gamma mean sits near two") {
    double sum = 0.0;
    int n = 4000;
    for (int i = 0; i < n; ++i) {
        Rng rng(5000 + i);
        sum += AugmentParams::sample(rng).gamma;
    }
    CHECK(sum / n == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("procedural flares are reproducible and structured") {
    FlareAsset a = procedural_flare(77, 64);
    FlareAsset b = procedural_flare(77, 64);
    CHECK(a.flare.v == b.flare.v);
    CHECK(a.light_source.v == b.light_source.v);

    SUBCASE("glow luminance decreases with radius") {
        FlareRecipe r;
        r.glow_sigma = 10.0;
        r.glow_amp = 0.8;
        r.glow_tint = {1.0, 0.9, 0.8};
        r.light_radius = 0.0;
        FlareAsset glow = render_flare(r, 64);
        Tensor lum = luminance(glow.flare);
        int cy = 31, cx = 31;
        double prev = 1e9;
        for (int x = cx; x < 64; ++x) {
            double v = lum.at(0, cy, x);
            CHECK(v <= prev + 1e-12);
            prev = v;
        }
    }

    SUBCASE("streaks add energy along the streak-normal frequency axis") {
        FlareRecipe glow;
        glow.glow_sigma = 8.0;
        glow.glow_amp = 0.6;
        glow.light_radius = 0.0;
        FlareRecipe streaked = glow;
        streaked.streaks.push_back({0.0, 20.0, 0.8, 0.9});  // horizontal streak

        auto band_energy = [](const FlareAsset& asset) {
            CTensor s = rdft2(luminance(asset.flare));
            double e = 0.0;
            for (int u = 3; u <= 32; ++u)
                for (int v = 0; v <= 1; ++v) e += std::abs(s.at(0, u, v));
            return e;
        };
        double e_glow = band_energy(render_flare(glow, 64));
        double e_streak = band_energy(render_flare(streaked, 64));
        CHECK(e_streak > 2.0 * e_glow);
    }
}

TEST_CASE("procedural scenes are reproducible and in range") {
    Tensor a = procedural_scene(31, 64);
    Tensor b = procedural_scene(31, 64);
    CHECK(a.v == b.v);
    for (double t : a.v) {
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
    }
}
