#pragma once

#include <variant>

#include "deflare/fft.hpp"
#include "deflare/nn.hpp"

namespace deflare {

// N learnable complex half-spectrum filters shared across channels, plus the
// coefficient head that turns pooled channel statistics into per-channel
// mixing weights: pool -> LN -> W1 -> StarReLU -> W2 -> softmax over N.
struct FilterBank {
    int n_filters = 0, channels = 0, height = 0, width = 0;
    int hidden_dim = 0;  // e'
    CTensor phi, phi_grad;  // n_filters x height x (width/2 + 1)
    nn::ChannelLayerNorm ln;
    nn::Linear w1;  // e' x C, no bias
    nn::StarReLU act;
    nn::Linear w2;  // (N*C) x e', no bias

    static FilterBank init(int n_filters, int channels, int height, int width,
                           Rng& rng);
    void collect(ParamList& out, const std::string& prefix);
    size_t param_count() const;
};

struct MixCache {
    std::vector<double> pooled;  // C
    Tensor ln_in;                // C x 1 x 1
    std::vector<double> ln_out;  // C
    std::vector<double> h1, a1;  // e'
    std::vector<double> logits;  // N*C
    Mat t;                       // C x N
};

// Per-channel softmax mixing coefficients; rows lie on the probability
// simplex. Throws on channel mismatch.
Mat mix_coefficients(const Tensor& x, const FilterBank& bank,
                     MixCache* cache = nullptr);

// Accumulates coefficient-head gradients for cotangent gt (C x N) and returns
// the input cotangent contribution that flows through the pooling path.
Tensor mix_coefficients_backward(FilterBank& bank, const MixCache& cache,
                                 const Mat& gt, int height, int width);

struct DynCache {
    MixCache mix;
    CTensor spectrum;  // rdft2 of the input
    CTensor mixed;     // per-channel mixed filter
};

// irdft2(mixed_filter .* rdft2(x)) with mixed_filter[c] = sum_i t[c,i] phi[i].
Tensor dynamic_filter(const Tensor& x, const FilterBank& bank,
                      DynCache* cache = nullptr);
Tensor dynamic_filter_backward(FilterBank& bank, const DynCache& cache,
                               const Tensor& gy);

struct BlockCache {
    Tensor x;
    DynCache dyn;
    Tensor r, m1, a1, m2;
};

// Residual block: r = dynamic_filter(x) + x, y = LN(MLP(r)) + r, where MLP is
// a two-layer per-position channel MLP with expansion factor 2 and a
// zero-initialized output layer.
struct DynamicFilterBlock {
    FilterBank bank;
    nn::Conv2d fc1, fc2;
    nn::StarReLU act;
    nn::ChannelLayerNorm ln_out;

    static DynamicFilterBlock init(int channels, int n_filters, int height,
                                   int width, Rng& rng);
    Tensor forward(const Tensor& x, BlockCache* cache = nullptr) const;
    Tensor backward(const BlockCache& cache, const Tensor& gy);
    void collect(ParamList& out, const std::string& prefix);
    size_t param_count() const;
    int channels() const { return bank.channels; }
};

// Spectral-filter-free substitute used by the filter-ablation switch:
// y = LN(MLP(x)) + x with the hidden width chosen to match a reference
// parameter budget.
struct PlainMlpBlock {
    nn::Conv2d fc1, fc2;
    nn::StarReLU act;
    nn::ChannelLayerNorm ln_out;

    static PlainMlpBlock init(int channels, int hidden, Rng& rng);
    static int matched_hidden(int channels, size_t target_param_count);
    Tensor forward(const Tensor& x, BlockCache* cache = nullptr) const;
    Tensor backward(const BlockCache& cache, const Tensor& gy);
    void collect(ParamList& out, const std::string& prefix);
    size_t param_count() const;
    int channels() const { return fc1.in_c; }
};

using ResidualBlock = std::variant<DynamicFilterBlock, PlainMlpBlock>;

Tensor block_forward(const ResidualBlock& block, const Tensor& x,
                     BlockCache* cache = nullptr);
Tensor block_backward(ResidualBlock& block, const BlockCache& cache,
                      const Tensor& gy);
void block_collect(ResidualBlock& block, ParamList& out, const std::string& prefix);
size_t block_param_count(const ResidualBlock& block);

// Bilinear resampling of the filter grids to a new feature resolution
// (rows interpolated in DC-centered order, columns over the non-negative
// frequency axis). Used when evaluating at a resolution the bank was not
// trained at.
FilterBank resample_bank(const FilterBank& bank, int new_height, int new_width);

}  // namespace deflare
