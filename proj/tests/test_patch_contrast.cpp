#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "deflare/patch_contrast.hpp"
#include "support/oracles.hpp"

using namespace deflare;

namespace {

bool tensors_equal(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) && a.v == b.v;
}

}  // namespace

TEST_CASE("degenerate mask forces the query location") {
    Rng rng(71);
    Tensor restored = oracle::random_tensor(rng, 3, 32, 32, 0.0, 1.0);
    Tensor reference = oracle::random_tensor(rng, 3, 32, 32, 0.0, 1.0);
    Tensor mask(1, 32, 32);
    mask.at(0, 20, 12) = 1.0;
    for (int rep = 0; rep < 3; ++rep) {
        PatchSet ps = sample_patches(restored, reference, mask, 4, 8, 1000 + rep);
        CHECK(ps.query_coord.first == 16);   // 20 - 8/2
        CHECK(ps.query_coord.second == 8);   // 12 - 8/2
    }
}

TEST_CASE("same seed reproduces the patch set exactly") {
    Rng rng(72);
    Tensor restored = oracle::random_tensor(rng, 3, 64, 64, 0.0, 1.0);
    Tensor reference = oracle::random_tensor(rng, 3, 64, 64, 0.0, 1.0);
    Tensor mask(1, 64, 64);
    for (int y = 30; y < 36; ++y)
        for (int x = 30; x < 36; ++x) mask.at(0, y, x) = 1.0;
    PatchSet a = sample_patches(restored, reference, mask, 8, 16, 42);
    PatchSet b = sample_patches(restored, reference, mask, 8, 16, 42);
    CHECK(a.query_coord == b.query_coord);
    CHECK(a.negative_coords == b.negative_coords);
    CHECK(tensors_equal(a.query, b.query));
    for (size_t i = 0; i < a.negatives.size(); ++i)
        CHECK(tensors_equal(a.negatives[i], b.negatives[i]));
}

TEST_CASE("negatives respect the 25% overlap bound (brute-force audit)") {
    Rng rng(73);
    Tensor restored = oracle::random_tensor(rng, 3, 64, 64, 0.0, 1.0);
    Tensor reference = oracle::random_tensor(rng, 3, 64, 64, 0.0, 1.0);
    Tensor mask(1, 64, 64);
    mask.at(0, 32, 32) = 1.0;
    PatchSet ps = sample_patches(restored, reference, mask, 8, 16, 7);
    CHECK(ps.negatives.size() == 8);
    auto [qy, qx] = ps.query_coord;
    for (auto [ny, nx] : ps.negative_coords) {
        CHECK(!(ny == qy && nx == qx));
        int ih = std::max(0, std::min(qy, ny) + 16 - std::max(qy, ny));
        int iw = std::max(0, std::min(qx, nx) + 16 - std::max(qx, nx));
        CHECK(ih * iw * 4 < 16 * 16);
        CHECK(ny >= 0);
        CHECK(ny + 16 <= 64);
        CHECK(nx >= 0);
        CHECK(nx + 16 <= 64);
    }
    // Positive sits at the query location in the reference.
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                CHECK(ps.positive.at(c, y, x) == reference.at(c, qy + y, qx + x));
}

TEST_CASE("empty mask falls back to the brightest reference pixel") {
    Tensor restored(3, 16, 16);
    Tensor reference(3, 16, 16);
    reference.fill(0.1);
    reference.at(0, 11, 5) = 1.0;
    reference.at(1, 11, 5) = 1.0;
    reference.at(2, 11, 5) = 1.0;
    Tensor mask(1, 16, 16);
    PatchSet ps = sample_patches(restored, reference, mask, 2, 4, 3);
    CHECK(ps.query_coord.first == 9);   // 11 - 2
    CHECK(ps.query_coord.second == 3);  // 5 - 2
}

TEST_CASE("oversized patch is rejected") {
    Tensor img(3, 8, 8);
    Tensor mask(1, 8, 8);
    CHECK_THROWS_AS(sample_patches(img, img, mask, 2, 9, 0), std::invalid_argument);
}

TEST_CASE("cosine similarity closed forms") {
    CHECK(cosine_sim({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
    CHECK(cosine_sim({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(cosine_sim({1, 2, 3}, {3, 2, 1}) == doctest::Approx(10.0 / 14.0));
    CHECK_THROWS_AS(cosine_sim({0, 0}, {1, 1}), std::invalid_argument);
}

TEST_CASE("info-nce closed forms") {
    for (int M : {1, 4, 16}) {
        std::vector<double> negs(M, 0.3);
        CHECK(info_nce_from_sims(0.3, negs, 0.07) ==
              doctest::Approx(std::log(1.0 + M)).epsilon(1e-12));
    }
    CHECK(info_nce_from_sims(1.0, {-1.0}, 0.07) < 1e-10);
    CHECK(info_nce_from_sims(1.0, {-1.0}, 0.07) >= 0.0);
    // Stable for |sim/tau| up to 1/0.01.
    CHECK(std::isfinite(info_nce_from_sims(1.0, {-1.0, 1.0, 0.5}, 0.01)));
    CHECK_THROWS_AS(info_nce_from_sims(1.0, {0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("loss decreases as the positive similarity rises") {
    std::vector<double> negs = {0.2, -0.4, 0.1};
    double prev = 1e300;
    for (double s = -1.0; s <= 1.0; s += 0.1) {
        double l = info_nce_from_sims(s, negs, 0.07);
        CHECK(l < prev);
        CHECK(l >= 0.0);
        prev = l;
    }
}

TEST_CASE("identical patches give ln(1+M) through the full head") {
    Rng rng(74);
    for (int M : {1, 4, 16}) {
        Tensor patch = oracle::random_tensor(rng, 3, 4, 4, 0.0, 1.0);
        PatchSet ps;
        ps.patch_size = 4;
        ps.query = patch;
        ps.positive = patch;
        for (int i = 0; i < M; ++i) ps.negatives.push_back(patch);
        ProjectionHead head = ProjectionHead::init(48, 32, 16, 5);
        double loss = patch_contrast_loss(ps, head, 0.07);
        CHECK(loss == doctest::Approx(std::log(1.0 + M)).epsilon(1e-9));
    }
}

TEST_CASE("rescaling projections leaves the loss unchanged") {
    Rng rng(75);
    Tensor restored = oracle::random_tensor(rng, 3, 32, 32, 0.0, 1.0);
    Tensor reference = oracle::random_tensor(rng, 3, 32, 32, 0.0, 1.0);
    Tensor mask(1, 32, 32);
    mask.at(0, 16, 16) = 1.0;
    PatchSet ps = sample_patches(restored, reference, mask, 6, 8, 11);

    ProjectionHead head = ProjectionHead::init(192, 64, 32, 9);
    double base = patch_contrast_loss(ps, head, 0.07);
    for (double& t : head.l2.w) t *= 3.7;
    for (double& t : head.l2.b) t *= 3.7;
    double scaled = patch_contrast_loss(ps, head, 0.07);
    CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("tau validation") {
    PatchSet ps;
    ps.query = Tensor(3, 2, 2);
    ProjectionHead head = ProjectionHead::init(12, 8, 4, 1);
    CHECK_THROWS_AS(patch_contrast_loss(ps, head, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(patch_contrast_loss(ps, head, -0.1), std::invalid_argument);
}

TEST_CASE("loss gradients match finite differences") {
    Rng rng(76);
    Tensor restored = oracle::random_tensor(rng, 3, 24, 24, 0.0, 1.0);
    Tensor reference = oracle::random_tensor(rng, 3, 24, 24, 0.0, 1.0);
    Tensor mask(1, 24, 24);
    mask.at(0, 12, 12) = 1.0;
    PatchSet ps = sample_patches(restored, reference, mask, 4, 6, 13);

    ProjectionHead head = ProjectionHead::init(108, 32, 16, 3);
    ParamList params;
    head.collect(params, "head");
    zero_grads(params);

    Tensor g_query;
    patch_contrast_loss(ps, head, 0.07, &g_query);

    auto loss = [&]() { return patch_contrast_loss(ps, head, 0.07); };
    CHECK(oracle::finite_diff_max_rel_err(loss, ps.query.v.data(), g_query.v.data(),
                                          ps.query.v.size(), 1e-6) < 1e-5);
    for (auto& p : params)
        CHECK(oracle::finite_diff_max_rel_err(loss, p.value, p.grad, p.n, 1e-6) <
              1e-5);
}
