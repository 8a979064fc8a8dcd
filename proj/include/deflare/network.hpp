#pragma once

#include "deflare/filter_block.hpp"

namespace deflare {

struct NetworkConfig {
    int stages = 4;
    int base_channels = 16;
    int n_filters = 4;
    int blocks_per_stage = 1;
    int input_channels = 3;
    int output_channels = 6;  // restored RGB + flare RGB

    void validate() const;
    int divisor() const { return 1 << stages; }
};

struct EncoderStage {
    std::vector<ResidualBlock> blocks;
    nn::Conv2d down;  // 4x4 stride 2, channels double
};

struct DecoderStage {
    nn::ConvTranspose2d up;  // 2x2 stride 2, channels halve
    std::vector<ResidualBlock> blocks;
    nn::Conv2d proj;  // 1x1 back to the skip's width
};

struct StageFwd {
    std::vector<BlockCache> blocks;
    Tensor down_in;
};

struct DecFwd {
    Tensor up_in, concat;
    std::vector<BlockCache> blocks;
    Tensor proj_in;
};

struct FwdCache {
    Tensor image, embed_pre, e0;
    std::vector<Tensor> skips;  // input feature map of each encoder stage
    std::vector<StageFwd> enc;
    std::vector<BlockCache> bottleneck;
    std::vector<DecFwd> dec;
    Tensor features;  // head input
};

// U-shaped restoration network: embed -> encoder stages (block(s) + strided
// conv) -> bottleneck block(s) -> decoder stages (transposed conv + skip
// concat + block(s) + projection) -> 6-channel head split into restored and
// flare images. Outputs are left unclamped.
struct Model {
    NetworkConfig cfg;
    int height = 0, width = 0;  // resolution the filter banks are sized for
    bool gdfg_enabled = true;

    nn::Conv2d embed;
    nn::LeakyReLU embed_act{0.2};
    std::vector<EncoderStage> enc;
    std::vector<ResidualBlock> bottleneck;
    std::vector<DecoderStage> dec;
    nn::Conv2d head;

    struct Output {
        Tensor restored, flare;
    };

    static Model init(const NetworkConfig& cfg, int height, int width,
                      bool gdfg_enabled, uint64_t seed);

    Output forward(const Tensor& image, FwdCache* cache = nullptr) const;
    // Returns dL/dimage (rarely needed; pass nullptr to skip).
    void backward(const FwdCache& cache, const Tensor& g_restored,
                  const Tensor& g_flare, Tensor* g_image = nullptr);

    void collect(ParamList& out);
    size_t param_count();
    // Clone with filter banks resampled for a different input resolution.
    Model resampled_for(int new_height, int new_width) const;
};

}  // namespace deflare
