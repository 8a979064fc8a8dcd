#include "deflare/network.hpp"

namespace deflare {

void NetworkConfig::validate() const {
    if (stages < 1) throw std::invalid_argument("NetworkConfig: stages must be >= 1");
    if (base_channels < 4)
        throw std::invalid_argument("NetworkConfig: base_channels must be >= 4");
    if (n_filters < 1 || n_filters > 8)
        throw std::invalid_argument("NetworkConfig: n_filters must be in 1..8");
    if (blocks_per_stage < 1)
        throw std::invalid_argument("NetworkConfig: blocks_per_stage must be >= 1");
}

namespace {

void add_noise(std::vector<double>& w, Rng& rng, double sigma = 0.02) {
    for (double& x : w) x += sigma * normal(rng);
}

ResidualBlock make_block(int channels, const NetworkConfig& cfg, int h, int w,
                         bool gdfg_enabled, Rng& rng) {
    if (gdfg_enabled)
        return DynamicFilterBlock::init(channels, cfg.n_filters, h, w, rng);
    // Ablation substitute: width chosen to match the filtered block's budget.
    DynamicFilterBlock ref = DynamicFilterBlock::init(channels, cfg.n_filters, h, w, rng);
    int hidden = PlainMlpBlock::matched_hidden(channels, ref.param_count());
    return PlainMlpBlock::init(channels, hidden, rng);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    Tensor out(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

}  // namespace

Model Model::init(const NetworkConfig& cfg, int height, int width, bool gdfg_enabled,
                  uint64_t seed) {
    cfg.validate();
    if (height % cfg.divisor() != 0)
        throw std::invalid_argument("input height " + std::to_string(height) +
                                    " not divisible by " + std::to_string(cfg.divisor()));
    if (width % cfg.divisor() != 0)
        throw std::invalid_argument("input width " + std::to_string(width) +
                                    " not divisible by " + std::to_string(cfg.divisor()));

    Rng rng(seed);
    Model m;
    m.cfg = cfg;
    m.height = height;
    m.width = width;
    m.gdfg_enabled = gdfg_enabled;

    const int c0 = cfg.base_channels;

    // Near-identity starts throughout: each conv passes its input through at a
    // gain that cancels the x2 of an identity-initialized filtered block, so
    // the untrained network approximately reproduces its input.
    m.embed = nn::Conv2d::make(cfg.input_channels, c0, 3, 1, 1);
    add_noise(m.embed.w, rng);
    for (int oc = 0; oc < c0; ++oc)
        m.embed.w[m.embed.widx(oc, oc % cfg.input_channels, 1, 1)] += 1.0;

    int ch = c0, h = height, w = width;
    for (int s = 0; s < cfg.stages; ++s) {
        EncoderStage stage;
        for (int b = 0; b < cfg.blocks_per_stage; ++b)
            stage.blocks.push_back(make_block(ch, cfg, h, w, gdfg_enabled, rng));
        stage.down = nn::Conv2d::make(ch, 2 * ch, 4, 2, 1);
        add_noise(stage.down.w, rng);
        double gain = (gdfg_enabled ? 0.5 : 1.0) / 16.0;
        for (int oc = 0; oc < 2 * ch; ++oc)
            for (int ky = 0; ky < 4; ++ky)
                for (int kx = 0; kx < 4; ++kx)
                    stage.down.w[stage.down.widx(oc, oc % ch, ky, kx)] += gain;
        m.enc.push_back(std::move(stage));
        ch *= 2;
        h /= 2;
        w /= 2;
    }

    for (int b = 0; b < cfg.blocks_per_stage; ++b)
        m.bottleneck.push_back(make_block(ch, cfg, h, w, gdfg_enabled, rng));

    for (int s = 0; s < cfg.stages; ++s) {
        DecoderStage stage;
        stage.up = nn::ConvTranspose2d::make(ch, ch / 2, 2, 2);
        add_noise(stage.up.w, rng);
        double up_gain = gdfg_enabled ? 0.5 : 1.0;
        for (int oc = 0; oc < ch / 2; ++oc)
            for (int ky = 0; ky < 2; ++ky)
                for (int kx = 0; kx < 2; ++kx)
                    stage.up.w[stage.up.widx(oc, oc, ky, kx)] += up_gain;
        ch /= 2;
        h *= 2;
        w *= 2;
        for (int b = 0; b < cfg.blocks_per_stage; ++b)
            stage.blocks.push_back(make_block(2 * ch, cfg, h, w, gdfg_enabled, rng));
        stage.proj = nn::Conv2d::make(2 * ch, ch, 1, 1, 0);
        add_noise(stage.proj.w, rng);
        double proj_gain = gdfg_enabled ? 0.25 : 0.5;
        for (int oc = 0; oc < ch; ++oc) {
            stage.proj.w[stage.proj.widx(oc, oc, 0, 0)] += proj_gain;
            stage.proj.w[stage.proj.widx(oc, ch + oc, 0, 0)] += proj_gain;
        }
        m.dec.push_back(std::move(stage));
    }

    m.head = nn::Conv2d::make(c0, cfg.output_channels, 3, 1, 1);
    add_noise(m.head.w, rng);
    for (int oc = 0; oc < 3 && oc < c0; ++oc)
        m.head.w[m.head.widx(oc, oc, 1, 1)] += 1.0;

    return m;
}

Model::Output Model::forward(const Tensor& image, FwdCache* cache) const {
    if (image.c != cfg.input_channels)
        throw std::invalid_argument("forward: expected " +
                                    std::to_string(cfg.input_channels) +
                                    "-channel input, got " + std::to_string(image.c));
    if (image.h % cfg.divisor() != 0)
        throw std::invalid_argument("input height " + std::to_string(image.h) +
                                    " not divisible by " + std::to_string(cfg.divisor()));
    if (image.w % cfg.divisor() != 0)
        throw std::invalid_argument("input width " + std::to_string(image.w) +
                                    " not divisible by " + std::to_string(cfg.divisor()));
    if (image.h != height || image.w != width)
        throw std::invalid_argument(
            "forward: model built for " + std::to_string(height) + "x" +
            std::to_string(width) + " inputs, got " + std::to_string(image.h) + "x" +
            std::to_string(image.w) + " (use resampled_for)");

    FwdCache local;
    FwdCache& fc = cache ? *cache : local;
    fc.image = image;
    fc.embed_pre = embed.forward(image);
    fc.e0 = embed_act.forward(fc.embed_pre);

    fc.skips.clear();
    fc.enc.assign(enc.size(), {});
    Tensor cur = fc.e0;
    for (size_t s = 0; s < enc.size(); ++s) {
        fc.skips.push_back(cur);
        auto& sf = fc.enc[s];
        sf.blocks.resize(enc[s].blocks.size());
        for (size_t b = 0; b < enc[s].blocks.size(); ++b)
            cur = block_forward(enc[s].blocks[b], cur, &sf.blocks[b]);
        sf.down_in = cur;
        cur = enc[s].down.forward(cur);
    }

    fc.bottleneck.resize(bottleneck.size());
    for (size_t b = 0; b < bottleneck.size(); ++b)
        cur = block_forward(bottleneck[b], cur, &fc.bottleneck[b]);

    fc.dec.assign(dec.size(), {});
    for (size_t s = 0; s < dec.size(); ++s) {
        auto& df = fc.dec[s];
        df.up_in = cur;
        Tensor up_out = dec[s].up.forward(cur);
        const Tensor& skip = fc.skips[dec.size() - 1 - s];
        if (up_out.h != skip.h || up_out.w != skip.w)
            throw std::invalid_argument("decoder stage " + std::to_string(s) +
                                        ": upsampled map " + up_out.shape_str() +
                                        " does not match skip " + skip.shape_str());
        df.concat = concat_channels(up_out, skip);
        cur = df.concat;
        df.blocks.resize(dec[s].blocks.size());
        for (size_t b = 0; b < dec[s].blocks.size(); ++b)
            cur = block_forward(dec[s].blocks[b], cur, &df.blocks[b]);
        df.proj_in = cur;
        cur = dec[s].proj.forward(cur);
    }

    fc.features = cur;
    Tensor out = head.forward(cur);

    Output result;
    result.restored = Tensor(3, out.h, out.w);
    result.flare = Tensor(3, out.h, out.w);
    const size_t plane = static_cast<size_t>(out.h) * out.w;
    std::copy(out.v.begin(), out.v.begin() + 3 * plane, result.restored.v.begin());
    std::copy(out.v.begin() + 3 * plane, out.v.begin() + 6 * plane,
              result.flare.v.begin());
    return result;
}

void Model::backward(const FwdCache& cache, const Tensor& g_restored,
                     const Tensor& g_flare, Tensor* g_image) {
    Tensor g_out(cfg.output_channels, g_restored.h, g_restored.w);
    const size_t plane = static_cast<size_t>(g_restored.h) * g_restored.w;
    std::copy(g_restored.v.begin(), g_restored.v.end(), g_out.v.begin());
    std::copy(g_flare.v.begin(), g_flare.v.end(), g_out.v.begin() + 3 * plane);

    Tensor g = head.backward(cache.features, g_out);

    std::vector<Tensor> skip_grads(enc.size());
    for (size_t si = dec.size(); si-- > 0;) {
        size_t s = si;
        auto& df = cache.dec[s];
        Tensor g_blocks = dec[s].proj.backward(df.proj_in, g);
        for (size_t b = dec[s].blocks.size(); b-- > 0;)
            g_blocks = block_backward(dec[s].blocks[b], df.blocks[b], g_blocks);
        // Split the concat cotangent back into up-branch and skip-branch.
        const Tensor& skip = cache.skips[dec.size() - 1 - s];
        Tensor g_up(skip.c, skip.h, skip.w), g_skip(skip.c, skip.h, skip.w);
        const size_t half = g_up.v.size();
        std::copy(g_blocks.v.begin(), g_blocks.v.begin() + half, g_up.v.begin());
        std::copy(g_blocks.v.begin() + half, g_blocks.v.end(), g_skip.v.begin());
        skip_grads[dec.size() - 1 - s] = std::move(g_skip);
        g = dec[s].up.backward(df.up_in, g_up);
    }

    for (size_t b = bottleneck.size(); b-- > 0;)
        g = block_backward(bottleneck[b], cache.bottleneck[b], g);

    for (size_t si = enc.size(); si-- > 0;) {
        auto& sf = cache.enc[si];
        g = enc[si].down.backward(sf.down_in, g);
        for (size_t b = enc[si].blocks.size(); b-- > 0;)
            g = block_backward(enc[si].blocks[b], sf.blocks[b], g);
        g += skip_grads[si];
    }

    Tensor g_pre = embed_act.backward(cache.embed_pre, g);
    Tensor g_img = embed.backward(cache.image, g_pre);
    if (g_image) *g_image = std::move(g_img);
}

void Model::collect(ParamList& out) {
    embed.collect(out, "embed");
    for (size_t s = 0; s < enc.size(); ++s) {
        for (size_t b = 0; b < enc[s].blocks.size(); ++b)
            block_collect(enc[s].blocks[b], out,
                          "enc" + std::to_string(s) + ".block" + std::to_string(b));
        enc[s].down.collect(out, "enc" + std::to_string(s) + ".down");
    }
    for (size_t b = 0; b < bottleneck.size(); ++b)
        block_collect(bottleneck[b], out, "bottleneck.block" + std::to_string(b));
    for (size_t s = 0; s < dec.size(); ++s) {
        dec[s].up.collect(out, "dec" + std::to_string(s) + ".up");
        for (size_t b = 0; b < dec[s].blocks.size(); ++b)
            block_collect(dec[s].blocks[b], out,
                          "dec" + std::to_string(s) + ".block" + std::to_string(b));
        dec[s].proj.collect(out, "dec" + std::to_string(s) + ".proj");
    }
    head.collect(out, "head");
}

size_t Model::param_count() {
    ParamList params;
    collect(params);
    return total_param_count(params);
}

Model Model::resampled_for(int new_height, int new_width) const {
    if (new_height % cfg.divisor() != 0 || new_width % cfg.divisor() != 0)
        throw std::invalid_argument("resampled_for: resolution not divisible by " +
                                    std::to_string(cfg.divisor()));
    Model m = *this;
    m.height = new_height;
    m.width = new_width;
    auto resample_blocks = [](std::vector<ResidualBlock>& blocks, int h, int w) {
        for (auto& blk : blocks)
            if (auto* d = std::get_if<DynamicFilterBlock>(&blk))
                d->bank = resample_bank(d->bank, h, w);
    };
    int h = new_height, w = new_width;
    for (auto& stage : m.enc) {
        resample_blocks(stage.blocks, h, w);
        h /= 2;
        w /= 2;
    }
    resample_blocks(m.bottleneck, h, w);
    for (auto& stage : m.dec) {
        h *= 2;
        w *= 2;
        resample_blocks(stage.blocks, h, w);
    }
    return m;
}

}  // namespace deflare
