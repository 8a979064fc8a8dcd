#pragma once

#include <array>

#include "deflare/tensor.hpp"

namespace deflare {

// Rec.709 luma of an RGB tensor, returned as 1 x H x W.
Tensor luminance(const Tensor& rgb);

struct FlareAsset {
    enum class Kind { scattering, reflective };
    Tensor flare;         // 3 x S x S in [0,1]
    Tensor light_source;  // co-registered, 3 x S x S in [0,1]
    Kind kind = Kind::scattering;
};

// One draw of the augmentation pipeline. Translation is expressed at the
// paper's 512x512 scale and rescaled proportionally when applied.
struct AugmentParams {
    double gamma = 2.0;        // U(1.8, 2.2)
    double rotation = 0.0;     // U(0, 2pi) radians
    double translate_x = 0.0;  // U(-300, 300) px at 512 scale
    double translate_y = 0.0;
    double shear = 0.0;        // U(-pi/9, pi/9)
    double scale = 1.0;        // U(0.8, 1.5)
    double blur_sigma = 0.0;   // U(0.1, 3); <= 0 means no blur
    bool flip = false;
    std::array<double, 3> color_shift{0, 0, 0};   // U(-0.02, 0.02)
    std::array<double, 3> bg_rgb_scale{1, 1, 1};  // U(0.5, 1.2)
    double noise_var = 0.0;                       // 0.01 * chi-square(1 df)

    static AugmentParams sample(Rng& rng);
};

// Pixelwise x^gamma (linearization); gamma must be positive.
Tensor inverse_gamma(const Tensor& image, double gamma);
// Pixelwise x^(1/gamma), the display re-encoding.
Tensor forward_gamma(const Tensor& image, double gamma);

// Shared affine (rotation/translation/shear/scale/flip about the center) on
// flare and light source, then Gaussian blur on both, then the global color
// shift on the flare only. Out-of-bounds regions fill with zero; outputs are
// clipped to [0,1].
FlareAsset augment_flare(const FlareAsset& asset, const AugmentParams& p);

// Per-channel RGB scaling plus zero-mean Gaussian noise of the sampled
// variance, clipped to [0,1].
Tensor augment_background(const Tensor& image, const AugmentParams& p,
                          uint64_t noise_seed);

struct CompositeSample {
    Tensor input;      // flare-damaged image
    Tensor reference;  // clean image
    Tensor flare;      // composited flare layer
    Tensor mask_glare, mask_streak, mask_light;  // 1 x H x W binary
    uint64_t seed = 0;
    AugmentParams params;
};

// input = clip(background + flare_layer, 0, 1); masks left empty.
CompositeSample composite(const Tensor& background, const Tensor& flare_layer);

struct Masks {
    Tensor glare, streak, light_source;
};

// Threshold-based region masks for synthetic data: light source at luma > 0.5
// of the light layer, streaks as elongated components of the flare layer at
// luma > 0.3 (aspect ratio > 3), glare at luma > 0.05 excluding the others.
// The three masks are pairwise disjoint.
Masks derive_masks(const Tensor& flare_layer, const Tensor& light_source_layer);

// Full pipeline: linearize, augment both sides, composite, derive masks,
// re-encode input/reference/flare with the sampled gamma.
CompositeSample make_sample(const Tensor& scene, const FlareAsset& asset,
                            uint64_t seed);

// Parametric flare assets. Scattering flares are a radial glow with angular
// streaks and a chromatic ring; reflective flares are ghost blobs along an
// axis with a faint glow. Both carry a saturated disk light source.
struct FlareRecipe {
    FlareAsset::Kind kind = FlareAsset::Kind::scattering;
    double glow_sigma = 0.0, glow_amp = 0.0;
    std::array<double, 3> glow_tint{1, 1, 1};
    struct Streak {
        double angle, sigma_along, sigma_across, amp;
    };
    std::vector<Streak> streaks;
    double ring_radius = 0.0, ring_sigma = 1.0, ring_amp = 0.0;
    struct Ghost {
        double cx, cy, radius, amp;
        std::array<double, 3> tint;
    };
    std::vector<Ghost> ghosts;
    double light_radius = 2.0;
};

FlareRecipe sample_flare_recipe(Rng& rng, FlareAsset::Kind kind, int size);
FlareAsset render_flare(const FlareRecipe& recipe, int size);
FlareAsset procedural_flare(uint64_t seed, int size);

// Night-scene substitute: dark gradient sky, soft colored blobs, building
// rectangles, distant point lights, mild texture noise.
Tensor procedural_scene(uint64_t seed, int size);

}  // namespace deflare
