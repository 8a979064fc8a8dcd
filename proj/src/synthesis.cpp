#include "deflare/synthesis.hpp"

namespace deflare {

Tensor luminance(const Tensor& rgb) {
    Tensor lum(1, rgb.h, rgb.w);
    const size_t plane = static_cast<size_t>(rgb.h) * rgb.w;
    for (size_t p = 0; p < plane; ++p)
        lum.v[p] = 0.2126 * rgb.v[p] + 0.7152 * rgb.v[plane + p] +
                   0.0722 * rgb.v[2 * plane + p];
    return lum;
}

AugmentParams AugmentParams::sample(Rng& rng) {
    AugmentParams p;
    p.gamma = uniform(rng, 1.8, 2.2);
    p.rotation = uniform(rng, 0.0, 2.0 * M_PI);
    p.translate_x = uniform(rng, -300.0, 300.0);
    p.translate_y = uniform(rng, -300.0, 300.0);
    p.shear = uniform(rng, -M_PI / 9.0, M_PI / 9.0);
    p.scale = uniform(rng, 0.8, 1.5);
    p.blur_sigma = uniform(rng, 0.1, 3.0);
    p.flip = bernoulli(rng);
    for (auto& c : p.color_shift) c = uniform(rng, -0.02, 0.02);
    for (auto& c : p.bg_rgb_scale) c = uniform(rng, 0.5, 1.2);
    double z = normal(rng);
    p.noise_var = 0.01 * z * z;  // 0.01 * chi-square with 1 df
    return p;
}

Tensor inverse_gamma(const Tensor& image, double gamma) {
    if (gamma <= 0.0) throw std::invalid_argument("inverse_gamma: gamma must be > 0");
    Tensor out(image.c, image.h, image.w);
    for (size_t i = 0; i < image.v.size(); ++i)
        out.v[i] = std::pow(std::clamp(image.v[i], 0.0, 1.0), gamma);
    return out;
}

Tensor forward_gamma(const Tensor& image, double gamma) {
    if (gamma <= 0.0) throw std::invalid_argument("forward_gamma: gamma must be > 0");
    Tensor out(image.c, image.h, image.w);
    for (size_t i = 0; i < image.v.size(); ++i)
        out.v[i] = std::pow(std::clamp(image.v[i], 0.0, 1.0), 1.0 / gamma);
    return out;
}

namespace {

struct Affine {
    // q = A * (p - c) + c + t, stored with its inverse for resampling
    double a00, a01, a10, a11;
    double cx, cy, tx, ty;
};

Affine build_affine(const AugmentParams& p, int h, int w) {
    double cs = std::cos(p.rotation), sn = std::sin(p.rotation);
    double sh = std::tan(p.shear);
    double fx = p.flip ? -1.0 : 1.0;
    // R * Shear * Scale * Flip
    double a00 = cs * 1.0 - sn * 0.0, a01 = cs * sh - sn * 1.0;
    double a10 = sn * 1.0 + cs * 0.0, a11 = sn * sh + cs * 1.0;
    Affine m;
    m.a00 = a00 * p.scale * fx;
    m.a01 = a01 * p.scale;
    m.a10 = a10 * p.scale * fx;
    m.a11 = a11 * p.scale;
    m.cx = (w - 1) / 2.0;
    m.cy = (h - 1) / 2.0;
    // Translation is specified at 512x512 scale.
    m.tx = p.translate_x * w / 512.0;
    m.ty = p.translate_y * h / 512.0;
    return m;
}

double bilinear_zero(const Tensor& img, int c, double y, double x) {
    int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    double fy = y - y0, fx = x - x0;
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            int yy = y0 + dy, xx = x0 + dx;
            if (yy < 0 || yy >= img.h || xx < 0 || xx >= img.w) continue;
            double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
            acc += wgt * img.at(c, yy, xx);
        }
    return acc;
}

Tensor warp(const Tensor& img, const Affine& m) {
    // Inverse mapping: p_src = A^{-1} * (p_dst - c - t) + c.
    double det = m.a00 * m.a11 - m.a01 * m.a10;
    double i00 = m.a11 / det, i01 = -m.a01 / det;
    double i10 = -m.a10 / det, i11 = m.a00 / det;
    Tensor out(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double dx = x - m.cx - m.tx, dy = y - m.cy - m.ty;
                double sx = i00 * dx + i01 * dy + m.cx;
                double sy = i10 * dx + i11 * dy + m.cy;
                out.at(c, y, x) = bilinear_zero(img, c, sy, sx);
            }
    return out;
}

Tensor gaussian_blur(const Tensor& img, double sigma) {
    if (sigma <= 0.0) return img;
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    Tensor tmp(img.c, img.h, img.w), out(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    int xx = x + i;
                    if (xx < 0 || xx >= img.w) continue;
                    acc += kernel[i + radius] * img.at(c, y, xx);
                }
                tmp.at(c, y, x) = acc;
            }
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    int yy = y + i;
                    if (yy < 0 || yy >= img.h) continue;
                    acc += kernel[i + radius] * tmp.at(c, yy, x);
                }
                out.at(c, y, x) = acc;
            }
    return out;
}

}  // namespace

FlareAsset augment_flare(const FlareAsset& asset, const AugmentParams& p) {
    if (!asset.flare.same_shape(asset.light_source))
        throw std::invalid_argument("augment_flare: flare/light resolution mismatch");
    Affine m = build_affine(p, asset.flare.h, asset.flare.w);
    FlareAsset out;
    out.kind = asset.kind;
    out.flare = gaussian_blur(warp(asset.flare, m), p.blur_sigma);
    out.light_source = gaussian_blur(warp(asset.light_source, m), p.blur_sigma);
    const size_t plane = static_cast<size_t>(out.flare.h) * out.flare.w;
    for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < plane; ++i) out.flare.v[c * plane + i] += p.color_shift[c];
    out.flare = clamp01(out.flare);
    out.light_source = clamp01(out.light_source);
    return out;
}

Tensor augment_background(const Tensor& image, const AugmentParams& p,
                          uint64_t noise_seed) {
    Rng rng(noise_seed);
    Tensor out(image.c, image.h, image.w);
    const size_t plane = static_cast<size_t>(image.h) * image.w;
    double sigma = std::sqrt(std::max(0.0, p.noise_var));
    for (int c = 0; c < image.c; ++c) {
        double s = p.bg_rgb_scale[c % 3];
        for (size_t i = 0; i < plane; ++i) {
            double v = image.v[c * plane + i] * s;
            if (sigma > 0.0) v += sigma * normal(rng);
            out.v[c * plane + i] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

CompositeSample composite(const Tensor& background, const Tensor& flare_layer) {
    if (!background.same_shape(flare_layer))
        throw std::invalid_argument("composite: resolution mismatch " +
                                    background.shape_str() + " vs " +
                                    flare_layer.shape_str());
    CompositeSample s;
    s.reference = background;
    s.flare = flare_layer;
    s.input = Tensor(background.c, background.h, background.w);
    for (size_t i = 0; i < s.input.v.size(); ++i)
        s.input.v[i] = std::clamp(background.v[i] + flare_layer.v[i], 0.0, 1.0);
    return s;
}

namespace {

// Connected components (8-connectivity) of a binary map; aspect ratio from
// second moments with the 1/12 single-pixel variance floor.
struct Component {
    std::vector<int> pixels;
    double aspect = 1.0;
};

std::vector<Component> label_components(const std::vector<char>& bin, int h, int w) {
    std::vector<Component> comps;
    std::vector<char> seen(bin.size(), 0);
    std::vector<int> stack;
    for (int start = 0; start < h * w; ++start) {
        if (!bin[start] || seen[start]) continue;
        Component comp;
        stack.push_back(start);
        seen[start] = 1;
        while (!stack.empty()) {
            int p = stack.back();
            stack.pop_back();
            comp.pixels.push_back(p);
            int py = p / w, px = p % w;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    int ny = py + dy, nx = px + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    int np = ny * w + nx;
                    if (bin[np] && !seen[np]) {
                        seen[np] = 1;
                        stack.push_back(np);
                    }
                }
        }
        double my = 0, mx = 0;
        for (int p : comp.pixels) {
            my += p / w;
            mx += p % w;
        }
        my /= comp.pixels.size();
        mx /= comp.pixels.size();
        double syy = 0, sxx = 0, sxy = 0;
        for (int p : comp.pixels) {
            double dy = p / w - my, dx = p % w - mx;
            syy += dy * dy;
            sxx += dx * dx;
            sxy += dx * dy;
        }
        double n = static_cast<double>(comp.pixels.size());
        syy = syy / n + 1.0 / 12.0;
        sxx = sxx / n + 1.0 / 12.0;
        sxy /= n;
        double tr = sxx + syy, d = std::sqrt((sxx - syy) * (sxx - syy) + 4 * sxy * sxy);
        double l1 = (tr + d) / 2.0, l2 = (tr - d) / 2.0;
        comp.aspect = std::sqrt(l1 / std::max(l2, 1e-12));
        comps.push_back(std::move(comp));
    }
    return comps;
}

}  // namespace

Masks derive_masks(const Tensor& flare_layer, const Tensor& light_source_layer) {
    const int h = flare_layer.h, w = flare_layer.w;
    Tensor lum_f = luminance(flare_layer);
    Tensor lum_l = luminance(light_source_layer);

    Masks m;
    m.light_source = Tensor(1, h, w);
    m.streak = Tensor(1, h, w);
    m.glare = Tensor(1, h, w);

    for (int i = 0; i < h * w; ++i)
        m.light_source.v[i] = lum_l.v[i] > 0.5 ? 1.0 : 0.0;

    std::vector<char> streak_cand(static_cast<size_t>(h) * w, 0);
    for (int i = 0; i < h * w; ++i)
        streak_cand[i] = lum_f.v[i] > 0.3 && m.light_source.v[i] == 0.0;
    for (const auto& comp : label_components(streak_cand, h, w))
        if (comp.aspect > 3.0)
            for (int p : comp.pixels) m.streak.v[p] = 1.0;

    for (int i = 0; i < h * w; ++i)
        m.glare.v[i] = (lum_f.v[i] > 0.05 && m.light_source.v[i] == 0.0 &&
                        m.streak.v[i] == 0.0)
                           ? 1.0
                           : 0.0;
    return m;
}

CompositeSample make_sample(const Tensor& scene, const FlareAsset& asset,
                            uint64_t seed) {
    if (!scene.same_shape(asset.flare))
        throw std::invalid_argument("make_sample: scene and asset resolutions differ");
    Rng rng(seed);
    AugmentParams p = AugmentParams::sample(rng);
    uint64_t noise_seed = rng();

    Tensor scene_lin = inverse_gamma(scene, p.gamma);
    FlareAsset asset_lin;
    asset_lin.kind = asset.kind;
    asset_lin.flare = inverse_gamma(asset.flare, p.gamma);
    asset_lin.light_source = inverse_gamma(asset.light_source, p.gamma);

    FlareAsset aug = augment_flare(asset_lin, p);
    Tensor background = augment_background(scene_lin, p, noise_seed);

    CompositeSample s = composite(background, aug.flare);
    Masks masks = derive_masks(aug.flare, aug.light_source);
    s.mask_glare = std::move(masks.glare);
    s.mask_streak = std::move(masks.streak);
    s.mask_light = std::move(masks.light_source);

    s.input = forward_gamma(s.input, p.gamma);
    s.reference = forward_gamma(s.reference, p.gamma);
    s.flare = forward_gamma(s.flare, p.gamma);
    s.seed = seed;
    s.params = p;
    return s;
}

FlareRecipe sample_flare_recipe(Rng& rng, FlareAsset::Kind kind, int size) {
    FlareRecipe r;
    r.kind = kind;
    r.light_radius = size * uniform(rng, 0.02, 0.05);
    if (kind == FlareAsset::Kind::scattering) {
        r.glow_sigma = size * uniform(rng, 0.08, 0.16);
        r.glow_amp = uniform(rng, 0.45, 0.8);
        r.glow_tint = {uniform(rng, 0.85, 1.0), uniform(rng, 0.7, 0.95),
                       uniform(rng, 0.5, 0.85)};
        int n_streaks = 4 + static_cast<int>(uniform(rng, 0.0, 5.0));  // 4..8
        double base_angle = uniform(rng, 0.0, M_PI);
        for (int i = 0; i < n_streaks; ++i) {
            FlareRecipe::Streak s;
            s.angle = base_angle + i * M_PI / n_streaks + uniform(rng, -0.1, 0.1);
            s.sigma_along = size * uniform(rng, 0.18, 0.38);
            s.sigma_across = size * uniform(rng, 0.005, 0.012);
            s.amp = uniform(rng, 0.5, 0.95);
            r.streaks.push_back(s);
        }
        r.ring_radius = size * uniform(rng, 0.16, 0.3);
        r.ring_sigma = size * uniform(rng, 0.012, 0.03);
        r.ring_amp = uniform(rng, 0.08, 0.25);
    } else {
        r.glow_sigma = size * uniform(rng, 0.05, 0.1);
        r.glow_amp = uniform(rng, 0.15, 0.35);
        r.glow_tint = {uniform(rng, 0.7, 1.0), uniform(rng, 0.7, 1.0),
                       uniform(rng, 0.7, 1.0)};
        double axis = uniform(rng, 0.0, 2.0 * M_PI);
        int n_ghosts = 3 + static_cast<int>(uniform(rng, 0.0, 4.0));  // 3..6
        for (int i = 0; i < n_ghosts; ++i) {
            FlareRecipe::Ghost g;
            double dist = size * uniform(rng, 0.12, 0.45) * (bernoulli(rng) ? 1 : -1);
            g.cx = dist * std::cos(axis);
            g.cy = dist * std::sin(axis);
            g.radius = size * uniform(rng, 0.03, 0.1);
            g.amp = uniform(rng, 0.2, 0.5);
            g.tint = {uniform(rng, 0.4, 1.0), uniform(rng, 0.4, 1.0),
                      uniform(rng, 0.4, 1.0)};
            r.ghosts.push_back(g);
        }
        r.ring_radius = size * uniform(rng, 0.2, 0.35);
        r.ring_sigma = size * uniform(rng, 0.015, 0.04);
        r.ring_amp = uniform(rng, 0.1, 0.3);
    }
    return r;
}

FlareAsset render_flare(const FlareRecipe& r, int size) {
    FlareAsset asset;
    asset.kind = r.kind;
    asset.flare = Tensor(3, size, size);
    asset.light_source = Tensor(3, size, size);
    const double cx = (size - 1) / 2.0, cy = (size - 1) / 2.0;

    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double dx = x - cx, dy = y - cy;
            double rad = std::sqrt(dx * dx + dy * dy);
            double px[3] = {0, 0, 0};

            if (r.glow_amp > 0.0) {
                double g = r.glow_amp *
                           std::exp(-0.5 * rad * rad / (r.glow_sigma * r.glow_sigma));
                for (int c = 0; c < 3; ++c) px[c] += g * r.glow_tint[c];
            }
            for (const auto& s : r.streaks) {
                double ca = std::cos(s.angle), sa = std::sin(s.angle);
                double along = dx * ca + dy * sa;
                double across = -dx * sa + dy * ca;
                double g = s.amp *
                           std::exp(-0.5 * along * along /
                                        (s.sigma_along * s.sigma_along) -
                                    0.5 * across * across /
                                        (s.sigma_across * s.sigma_across));
                for (int c = 0; c < 3; ++c) px[c] += g;
            }
            if (r.ring_amp > 0.0) {
                for (int c = 0; c < 3; ++c) {
                    // Chromatic ring: per-channel radius offset.
                    double rc = r.ring_radius * (1.0 + 0.04 * (c - 1));
                    double d = rad - rc;
                    px[c] += r.ring_amp *
                             std::exp(-0.5 * d * d / (r.ring_sigma * r.ring_sigma));
                }
            }
            for (const auto& g : r.ghosts) {
                double gx = dx - g.cx, gy = dy - g.cy;
                double d2 = gx * gx + gy * gy;
                double v = g.amp * std::exp(-0.5 * d2 / (g.radius * g.radius));
                for (int c = 0; c < 3; ++c) px[c] += v * g.tint[c];
            }
            for (int c = 0; c < 3; ++c)
                asset.flare.at(c, y, x) = std::clamp(px[c], 0.0, 1.0);

            // Saturated disk with a one-pixel soft edge.
            double d = std::clamp(r.light_radius - rad + 0.5, 0.0, 1.0);
            for (int c = 0; c < 3; ++c) asset.light_source.at(c, y, x) = d;
        }
    return asset;
}

FlareAsset procedural_flare(uint64_t seed, int size) {
    Rng rng(seed);
    auto kind = bernoulli(rng) ? FlareAsset::Kind::scattering
                               : FlareAsset::Kind::reflective;
    FlareRecipe recipe = sample_flare_recipe(rng, kind, size);
    return render_flare(recipe, size);
}

Tensor procedural_scene(uint64_t seed, int size) {
    Rng rng(seed);
    Tensor img(3, size, size);

    // Night sky gradient.
    double top[3], bottom[3];
    for (int c = 0; c < 3; ++c) {
        top[c] = uniform(rng, 0.02, 0.1);
        bottom[c] = top[c] + uniform(rng, 0.05, 0.2);
    }
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y) {
            double t = static_cast<double>(y) / size;
            for (int x = 0; x < size; ++x)
                img.at(c, y, x) = top[c] * (1 - t) + bottom[c] * t;
        }

    // Soft colored blobs (ambient glows).
    int n_blobs = 4 + static_cast<int>(uniform(rng, 0.0, 5.0));
    for (int k = 0; k < n_blobs; ++k) {
        double bx = uniform(rng, 0.0, size), by = uniform(rng, 0.0, size);
        double s = size * uniform(rng, 0.05, 0.25);
        double amp[3];
        for (int c = 0; c < 3; ++c) amp[c] = uniform(rng, 0.02, 0.25);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                    img.at(c, y, x) += amp[c] * std::exp(-0.5 * d2 / (s * s));
                }
    }

    // Building-ish rectangles.
    int n_rect = 3 + static_cast<int>(uniform(rng, 0.0, 5.0));
    for (int k = 0; k < n_rect; ++k) {
        int rw = 2 + static_cast<int>(uniform(rng, 0.0, size * 0.3));
        int rh = 2 + static_cast<int>(uniform(rng, 0.0, size * 0.4));
        int rx = static_cast<int>(uniform(rng, 0.0, std::max(1, size - rw)));
        int ry = static_cast<int>(uniform(rng, 0.0, std::max(1, size - rh)));
        double val[3];
        for (int c = 0; c < 3; ++c) val[c] = uniform(rng, 0.02, 0.35);
        for (int c = 0; c < 3; ++c)
            for (int y = ry; y < std::min(size, ry + rh); ++y)
                for (int x = rx; x < std::min(size, rx + rw); ++x)
                    img.at(c, y, x) = 0.3 * img.at(c, y, x) + 0.7 * val[c];
    }

    // Distant point lights.
    int n_pts = 4 + static_cast<int>(uniform(rng, 0.0, 8.0));
    for (int k = 0; k < n_pts; ++k) {
        double px = uniform(rng, 0.0, size), py = uniform(rng, 0.0, size);
        double s = uniform(rng, 0.6, 1.6);
        double amp = uniform(rng, 0.3, 0.8);
        double tint[3] = {uniform(rng, 0.7, 1.0), uniform(rng, 0.6, 1.0),
                          uniform(rng, 0.4, 1.0)};
        int rad = static_cast<int>(std::ceil(3 * s));
        for (int c = 0; c < 3; ++c)
            for (int y = std::max(0, static_cast<int>(py) - rad);
                 y < std::min(size, static_cast<int>(py) + rad + 1); ++y)
                for (int x = std::max(0, static_cast<int>(px) - rad);
                     x < std::min(size, static_cast<int>(px) + rad + 1); ++x) {
                    double d2 = (x - px) * (x - px) + (y - py) * (y - py);
                    img.at(c, y, x) += amp * tint[c] * std::exp(-0.5 * d2 / (s * s));
                }
    }

    // Mild texture noise.
    for (double& t : img.v) t += 0.01 * normal(rng);
    return clamp01(img);
}

}  // namespace deflare
