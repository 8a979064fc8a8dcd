#include "deflare/filter_block.hpp"

namespace deflare {

FilterBank FilterBank::init(int n_filters, int channels, int height, int width,
                            Rng& rng) {
    if (n_filters < 1) throw std::invalid_argument("FilterBank: n_filters < 1");
    FilterBank b;
    b.n_filters = n_filters;
    b.channels = channels;
    b.height = height;
    b.width = width;
    b.hidden_dim = std::max(channels / 4, 4);
    b.phi = CTensor(n_filters, height, width);
    // Identity filter plus small noise so early training preserves content.
    for (auto& z : b.phi.v)
        z = {1.0 + 0.02 * normal(rng), 0.02 * normal(rng)};
    b.phi_grad = CTensor(n_filters, height, width);
    b.ln = nn::ChannelLayerNorm::make(channels);
    b.w1 = nn::Linear::make(channels, b.hidden_dim, false);
    nn::fill_normal(b.w1.w, rng, 1.0 / std::sqrt(static_cast<double>(channels)));
    b.act = nn::StarReLU{};
    // Zero-initialized logits start every channel at uniform mixing.
    b.w2 = nn::Linear::make(b.hidden_dim, n_filters * channels, false);
    return b;
}

void FilterBank::collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".phi", reinterpret_cast<double*>(phi.v.data()),
                   reinterpret_cast<double*>(phi_grad.v.data()), 2 * phi.v.size()});
    ln.collect(out, prefix + ".ln");
    w1.collect(out, prefix + ".w1");
    act.collect(out, prefix + ".act");
    w2.collect(out, prefix + ".w2");
}

size_t FilterBank::param_count() const {
    return 2 * phi.v.size() + ln.gamma.size() + ln.beta.size() + w1.w.size() + 2 +
           w2.w.size();
}

Mat mix_coefficients(const Tensor& x, const FilterBank& bank, MixCache* cache) {
    if (x.c != bank.channels)
        throw std::invalid_argument("mix_coefficients: input has " +
                                    std::to_string(x.c) + " channels, bank expects " +
                                    std::to_string(bank.channels));
    MixCache local;
    MixCache& mc = cache ? *cache : local;

    mc.pooled = nn::global_avg_pool(x);
    mc.ln_in = Tensor(x.c, 1, 1);
    mc.ln_in.v = mc.pooled;
    Tensor ln_out_t = bank.ln.forward(mc.ln_in);
    mc.ln_out = ln_out_t.v;
    mc.h1 = bank.w1.forward(mc.ln_out);
    mc.a1 = bank.act.forward_vec(mc.h1);
    mc.logits = bank.w2.forward(mc.a1);

    const int C = bank.channels, N = bank.n_filters;
    mc.t = Mat(C, N);
    for (int c = 0; c < C; ++c) {
        std::vector<double> row(mc.logits.begin() + static_cast<size_t>(c) * N,
                                mc.logits.begin() + static_cast<size_t>(c + 1) * N);
        auto sm = nn::softmax(row);
        for (int i = 0; i < N; ++i) mc.t.at(c, i) = sm[i];
    }
    return mc.t;
}

Tensor mix_coefficients_backward(FilterBank& bank, const MixCache& cache,
                                 const Mat& gt, int height, int width) {
    const int C = bank.channels, N = bank.n_filters;
    std::vector<double> glogits(static_cast<size_t>(C) * N, 0.0);
    for (int c = 0; c < C; ++c) {
        std::vector<double> y(N), gy(N);
        for (int i = 0; i < N; ++i) {
            y[i] = cache.t.at(c, i);
            gy[i] = gt.at(c, i);
        }
        auto gl = nn::softmax_backward(y, gy);
        for (int i = 0; i < N; ++i) glogits[static_cast<size_t>(c) * N + i] = gl[i];
    }
    auto ga1 = bank.w2.backward(cache.a1, glogits);
    auto gh1 = bank.act.backward_vec(cache.h1, ga1);
    auto gln = bank.w1.backward(cache.ln_out, gh1);
    Tensor gln_t(C, 1, 1);
    gln_t.v = gln;
    Tensor gpooled = bank.ln.backward(cache.ln_in, gln_t);
    return nn::global_avg_pool_backward(gpooled.v, height, width);
}

Tensor dynamic_filter(const Tensor& x, const FilterBank& bank, DynCache* cache) {
    if (x.h != bank.height || x.w != bank.width)
        throw std::invalid_argument("dynamic_filter: feature resolution " +
                                    std::to_string(x.h) + "x" + std::to_string(x.w) +
                                    " does not match bank " +
                                    std::to_string(bank.height) + "x" +
                                    std::to_string(bank.width));
    DynCache local;
    DynCache& dc = cache ? *cache : local;

    Mat t = mix_coefficients(x, bank, &dc.mix);
    dc.spectrum = rdft2(x);
    const int C = x.c, H = x.h, Wh = dc.spectrum.wh, N = bank.n_filters;
    dc.mixed = CTensor(C, H, x.w);
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < N; ++i) {
            double tc = t.at(c, i);
            const std::complex<double>* f = &bank.phi.at(i, 0, 0);
            std::complex<double>* m = &dc.mixed.at(c, 0, 0);
            for (int p = 0; p < H * Wh; ++p) m[p] += tc * f[p];
        }
    CTensor s = dc.spectrum;
    for (int c = 0; c < C; ++c) {
        const std::complex<double>* m = &dc.mixed.at(c, 0, 0);
        std::complex<double>* sp = &s.at(c, 0, 0);
        for (int p = 0; p < H * Wh; ++p) sp[p] *= m[p];
    }
    return irdft2(s, x.h, x.w);
}

Tensor dynamic_filter_backward(FilterBank& bank, const DynCache& cache,
                               const Tensor& gy) {
    const int C = gy.c, H = gy.h, W = gy.w;
    const int Wh = cache.spectrum.wh, N = bank.n_filters;

    CTensor gs = irdft2_vjp(gy);  // dL/d(mixed .* spectrum)

    // dL/dspectrum and dL/dmixed through the complex elementwise product.
    CTensor gspec(C, H, W), gmix(C, H, W);
    for (int c = 0; c < C; ++c) {
        const std::complex<double>* m = &cache.mixed.at(c, 0, 0);
        const std::complex<double>* xs = &cache.spectrum.at(c, 0, 0);
        const std::complex<double>* g = &gs.at(c, 0, 0);
        std::complex<double>* gsp = &gspec.at(c, 0, 0);
        std::complex<double>* gmp = &gmix.at(c, 0, 0);
        for (int p = 0; p < H * Wh; ++p) {
            gsp[p] = std::conj(m[p]) * g[p];
            gmp[p] = std::conj(xs[p]) * g[p];
        }
    }

    // Filter gradients and coefficient gradients.
    Mat gt(C, N);
    for (int c = 0; c < C; ++c) {
        const std::complex<double>* gmp = &gmix.at(c, 0, 0);
        for (int i = 0; i < N; ++i) {
            double tc = cache.mix.t.at(c, i);
            const std::complex<double>* f = &bank.phi.at(i, 0, 0);
            std::complex<double>* gf = &bank.phi_grad.at(i, 0, 0);
            double acc = 0.0;
            for (int p = 0; p < H * Wh; ++p) {
                gf[p] += tc * gmp[p];
                acc += gmp[p].real() * f[p].real() + gmp[p].imag() * f[p].imag();
            }
            gt.at(c, i) = acc;
        }
    }

    Tensor gx = rdft2_vjp(gspec, H, W);
    gx += mix_coefficients_backward(bank, cache.mix, gt, H, W);
    return gx;
}

DynamicFilterBlock DynamicFilterBlock::init(int channels, int n_filters, int height,
                                            int width, Rng& rng) {
    DynamicFilterBlock blk;
    blk.bank = FilterBank::init(n_filters, channels, height, width, rng);
    blk.fc1 = nn::Conv2d::make(channels, 2 * channels, 1, 1, 0);
    nn::fill_normal(blk.fc1.w, rng, std::sqrt(2.0 / channels));
    // Zero-initialized output layer: the block starts as r -> r + LN-shift.
    blk.fc2 = nn::Conv2d::make(2 * channels, channels, 1, 1, 0);
    blk.act = nn::StarReLU{};
    blk.ln_out = nn::ChannelLayerNorm::make(channels);
    return blk;
}

Tensor DynamicFilterBlock::forward(const Tensor& x, BlockCache* cache) const {
    BlockCache local;
    BlockCache& bc = cache ? *cache : local;
    bc.x = x;
    Tensor filtered = dynamic_filter(x, bank, &bc.dyn);
    bc.r = filtered;
    bc.r += x;
    bc.m1 = fc1.forward(bc.r);
    bc.a1 = act.forward(bc.m1);
    bc.m2 = fc2.forward(bc.a1);
    Tensor y = ln_out.forward(bc.m2);
    y += bc.r;
    return y;
}

Tensor DynamicFilterBlock::backward(const BlockCache& cache, const Tensor& gy) {
    Tensor gr = gy;  // residual branch
    Tensor gm2 = ln_out.backward(cache.m2, gy);
    Tensor ga1 = fc2.backward(cache.a1, gm2);
    Tensor gm1 = act.backward(cache.m1, ga1);
    gr += fc1.backward(cache.r, gm1);
    Tensor gx = dynamic_filter_backward(bank, cache.dyn, gr);
    gx += gr;
    return gx;
}

void DynamicFilterBlock::collect(ParamList& out, const std::string& prefix) {
    bank.collect(out, prefix + ".bank");
    fc1.collect(out, prefix + ".fc1");
    fc2.collect(out, prefix + ".fc2");
    act.collect(out, prefix + ".act");
    ln_out.collect(out, prefix + ".ln_out");
}

size_t DynamicFilterBlock::param_count() const {
    return bank.param_count() + fc1.w.size() + fc1.b.size() + fc2.w.size() +
           fc2.b.size() + 2 + ln_out.gamma.size() + ln_out.beta.size();
}

PlainMlpBlock PlainMlpBlock::init(int channels, int hidden, Rng& rng) {
    PlainMlpBlock blk;
    blk.fc1 = nn::Conv2d::make(channels, hidden, 1, 1, 0);
    nn::fill_normal(blk.fc1.w, rng, std::sqrt(2.0 / channels));
    blk.fc2 = nn::Conv2d::make(hidden, channels, 1, 1, 0);
    blk.act = nn::StarReLU{};
    blk.ln_out = nn::ChannelLayerNorm::make(channels);
    return blk;
}

int PlainMlpBlock::matched_hidden(int channels, size_t target_param_count) {
    // params(h) = C*h + h + h*C + C + 2 + 2C = h*(2C + 1) + 3C + 2
    long long num = static_cast<long long>(target_param_count) - 3LL * channels - 2;
    long long h = num / (2LL * channels + 1);
    return static_cast<int>(std::max<long long>(2 * channels, h));
}

Tensor PlainMlpBlock::forward(const Tensor& x, BlockCache* cache) const {
    BlockCache local;
    BlockCache& bc = cache ? *cache : local;
    bc.x = x;
    bc.r = x;
    bc.m1 = fc1.forward(x);
    bc.a1 = act.forward(bc.m1);
    bc.m2 = fc2.forward(bc.a1);
    Tensor y = ln_out.forward(bc.m2);
    y += x;
    return y;
}

Tensor PlainMlpBlock::backward(const BlockCache& cache, const Tensor& gy) {
    Tensor gx = gy;
    Tensor gm2 = ln_out.backward(cache.m2, gy);
    Tensor ga1 = fc2.backward(cache.a1, gm2);
    Tensor gm1 = act.backward(cache.m1, ga1);
    gx += fc1.backward(cache.x, gm1);
    return gx;
}

void PlainMlpBlock::collect(ParamList& out, const std::string& prefix) {
    fc1.collect(out, prefix + ".fc1");
    fc2.collect(out, prefix + ".fc2");
    act.collect(out, prefix + ".act");
    ln_out.collect(out, prefix + ".ln_out");
}

size_t PlainMlpBlock::param_count() const {
    return fc1.w.size() + fc1.b.size() + fc2.w.size() + fc2.b.size() + 2 +
           ln_out.gamma.size() + ln_out.beta.size();
}

Tensor block_forward(const ResidualBlock& block, const Tensor& x, BlockCache* cache) {
    return std::visit([&](const auto& b) { return b.forward(x, cache); }, block);
}

Tensor block_backward(ResidualBlock& block, const BlockCache& cache, const Tensor& gy) {
    return std::visit([&](auto& b) { return b.backward(cache, gy); }, block);
}

void block_collect(ResidualBlock& block, ParamList& out, const std::string& prefix) {
    std::visit([&](auto& b) { b.collect(out, prefix); }, block);
}

size_t block_param_count(const ResidualBlock& block) {
    return std::visit([](const auto& b) { return b.param_count(); }, block);
}

FilterBank resample_bank(const FilterBank& bank, int new_height, int new_width) {
    if (new_height == bank.height && new_width == bank.width) return bank;
    FilterBank out = bank;
    out.height = new_height;
    out.width = new_width;
    out.phi = CTensor(bank.n_filters, new_height, new_width);
    out.phi_grad = CTensor(bank.n_filters, new_height, new_width);

    const int hs = bank.height, hd = new_height;
    const int cs = hs / 2, cd = hd / 2;  // DC row position in shifted order
    const int whs = bank.phi.wh, whd = out.phi.wh;

    // DC-centered copy of each filter grid; interpolation then has no wrap seam.
    std::vector<std::complex<double>> shifted(static_cast<size_t>(hs) * whs);
    for (int f = 0; f < bank.n_filters; ++f) {
        for (int r = 0; r < hs; ++r) {
            int src_row = (r + hs - cs) % hs;
            for (int c = 0; c < whs; ++c)
                shifted[static_cast<size_t>(r) * whs + c] = bank.phi.at(f, src_row, c);
        }
        auto sample = [&](double row, double col) {
            int r0 = static_cast<int>(std::floor(row));
            int c0 = static_cast<int>(std::floor(col));
            double fr = row - r0, fc = col - c0;
            auto px = [&](int r, int c) {
                r = std::clamp(r, 0, hs - 1);
                c = std::clamp(c, 0, whs - 1);
                return shifted[static_cast<size_t>(r) * whs + c];
            };
            return (1.0 - fr) * ((1.0 - fc) * px(r0, c0) + fc * px(r0, c0 + 1)) +
                   fr * ((1.0 - fc) * px(r0 + 1, c0) + fc * px(r0 + 1, c0 + 1));
        };
        for (int u = 0; u < hd; ++u) {
            int shifted_row = (u + cd) % hd;
            double src_shifted_row =
                (shifted_row - cd) * (static_cast<double>(hs) / hd) + cs;
            for (int v = 0; v < whd; ++v) {
                double col = whd > 1 ? v * (static_cast<double>(whs - 1) / (whd - 1))
                                     : 0.0;
                out.phi.at(f, u, v) = sample(src_shifted_row, col);
            }
        }
    }
    return out;
}

}  // namespace deflare
