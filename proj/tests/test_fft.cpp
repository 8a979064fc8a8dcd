#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "deflare/fft.hpp"
#include "support/oracles.hpp"

using namespace deflare;

TEST_CASE("constant image puts all energy in the DC bin") {
    for (int W : {8, 9}) {
        Tensor x(1, 6, W);
        x.fill(0.75);
        CTensor s = rdft2(x);
        CHECK(s.at(0, 0, 0).real() == doctest::Approx(0.75 * std::sqrt(6.0 * W)));
        CHECK(s.at(0, 0, 0).imag() == doctest::Approx(0.0));
        for (int u = 0; u < s.h; ++u)
            for (int v = 0; v < s.wh; ++v)
                if (u != 0 || v != 0) CHECK(std::abs(s.at(0, u, v)) < 1e-12);
    }
}

TEST_CASE("zero input gives zero spectrum") {
    Tensor x(2, 4, 4);
    CTensor s = rdft2(x);
    for (auto& z : s.v) CHECK(std::abs(z) == 0.0);
}

TEST_CASE("non-finite input is rejected") {
    Tensor x(1, 4, 4);
    x.at(0, 1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(rdft2(x), std::invalid_argument);
}

TEST_CASE("shape mismatch is rejected by irdft2") {
    Tensor x(1, 8, 8);
    CTensor s = rdft2(x);
    CHECK_THROWS_AS(irdft2(s, 8, 10), std::invalid_argument);
    CHECK_THROWS_AS(irdft2(s, 4, 8), std::invalid_argument);
}

TEST_CASE("rdft2 matches the direct DFT sum") {
    Rng rng(7);
    for (int W : {8, 7}) {
        Tensor x = oracle::random_tensor(rng, 2, 6, W);
        CTensor s = rdft2(x);
        for (int ci = 0; ci < 2; ++ci) {
            auto full = oracle::naive_dft2(x, ci);
            for (int u = 0; u < 6; ++u)
                for (int v = 0; v < s.wh; ++v) {
                    auto ref = full[static_cast<size_t>(u) * W + v];
                    CHECK(std::abs(s.at(ci, u, v) - ref) < 1e-10);
                }
        }
    }
}

TEST_CASE("round trip irdft2(rdft2(x)) == x") {
    Rng rng(11);
    for (auto [h, w] : {std::pair{8, 8}, {5, 9}, {16, 12}, {2, 2}}) {
        Tensor x = oracle::random_tensor(rng, 2, h, w);
        Tensor y = irdft2(rdft2(x), h, w);
        CHECK(max_abs_diff(x, y) < 1e-12);
    }
}

TEST_CASE("DC-only spectrum reconstructs a constant image") {
    int H = 8, W = 10;
    CTensor s(1, H, W);
    s.at(0, 0, 0) = {3.2, 0.0};
    Tensor x = irdft2(s, H, W);
    for (double t : x.v) CHECK(t == doctest::Approx(3.2 / std::sqrt(double(H * W))));
}

TEST_CASE("single off-DC bin reconstructs a cosine grating (direct sum oracle)") {
    int H = 8, W = 8;
    CTensor s(1, H, W);
    s.at(0, 2, 3) = {1.5, -0.7};
    Tensor got = irdft2(s, H, W);
    Tensor ref = oracle::naive_idft2_real(oracle::hermitian_extend(s, 0), H, W);
    CHECK(max_abs_diff(got, ref) < 1e-10);
    // Single real bin on the v-axis gives a pure horizontal cosine.
    CTensor g(1, H, W);
    g.at(0, 0, 2) = {1.0, 0.0};
    Tensor grating = irdft2(g, H, W);
    for (int hh = 0; hh < H; ++hh)
        for (int ww = 0; ww < W; ++ww)
            CHECK(grating.at(0, hh, ww) ==
                  doctest::Approx(2.0 * std::cos(2.0 * M_PI * 2.0 * ww / W) / 8.0));
}

TEST_CASE("irdft2 ignores imaginary parts of self-conjugate bins") {
    int H = 6, W = 8;
    Rng rng(3);
    CTensor s = rdft2(oracle::random_tensor(rng, 1, H, W));
    Tensor base = irdft2(s, H, W);
    CTensor dirty = s;
    dirty.at(0, 0, 0) += std::complex<double>(0.0, 5.0);
    dirty.at(0, 3, 4) += std::complex<double>(0.0, -2.0);
    CHECK(max_abs_diff(base, irdft2(dirty, H, W)) < 1e-12);
}

TEST_CASE("Parseval with column multiplicity") {
    Rng rng(19);
    for (auto [h, w] : {std::pair{16, 16}, {7, 10}, {9, 9}}) {
        Tensor x = oracle::random_tensor(rng, 3, h, w);
        double spatial = squared_norm(x);
        double spectral = spectral_energy(rdft2(x));
        CHECK(std::abs(spatial - spectral) / spatial < 1e-12);
    }
}

// <g, A x> == <A* g, x> for both transforms viewed as R-linear maps.
TEST_CASE("vjp helpers are exact adjoints") {
    Rng rng(23);
    int H = 6, W = 8;
    Tensor x = oracle::random_tensor(rng, 1, H, W);

    SUBCASE("rdft2") {
        CTensor s = rdft2(x);
        CTensor g(1, H, W);
        for (auto& z : g.v) z = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
        double lhs = 0.0;  // <g, rdft2(x)> over stored (re, im) coordinates
        for (size_t i = 0; i < g.v.size(); ++i)
            lhs += g.v[i].real() * s.v[i].real() + g.v[i].imag() * s.v[i].imag();
        Tensor gx = rdft2_vjp(g, H, W);
        CHECK(dot(gx, x) == doctest::Approx(lhs).epsilon(1e-10));
    }

    SUBCASE("irdft2") {
        CTensor s(1, H, W);
        for (int u = 0; u < H; ++u)
            for (int v = 0; v < s.wh; ++v) {
                s.at(0, u, v) = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
                if (self_conjugate_bin(H, W, u, v))
                    s.at(0, u, v) = {s.at(0, u, v).real(), 0.0};
            }
        Tensor y = irdft2(s, H, W);
        Tensor g = oracle::random_tensor(rng, 1, H, W);
        CTensor gs = irdft2_vjp(g);
        double lhs = dot(g, y);
        double rhs = 0.0;
        for (size_t i = 0; i < gs.v.size(); ++i)
            rhs += gs.v[i].real() * s.v[i].real() + gs.v[i].imag() * s.v[i].imag();
        CHECK(rhs == doctest::Approx(lhs).epsilon(1e-10));
    }
}
