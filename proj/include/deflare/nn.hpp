#pragma once

#include "deflare/tensor.hpp"

namespace deflare::nn {

// s * relu(x)^2 + b with learnable scalars.
inline double star_relu(double x, double scale, double bias) {
    double r = x > 0.0 ? x : 0.0;
    return scale * r * r + bias;
}

struct StarReLU {
    double scale = 0.8944;
    double bias = -0.4472;
    double gscale = 0.0, gbias = 0.0;

    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& gy);
    std::vector<double> forward_vec(const std::vector<double>& x) const;
    std::vector<double> backward_vec(const std::vector<double>& x,
                                     const std::vector<double>& gy);
    void collect(ParamList& out, const std::string& prefix);
};

struct LeakyReLU {
    double slope = 0.2;
    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& gy) const;
};

struct Conv2d {
    int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
    std::vector<double> w, b, gw, gb;  // w laid out [out_c][in_c][k][k]

    static Conv2d make(int in_c, int out_c, int k, int stride, int pad);
    size_t widx(int oc, int ic, int ky, int kx) const {
        return ((static_cast<size_t>(oc) * in_c + ic) * k + ky) * k + kx;
    }
    int out_h(int h) const { return (h + 2 * pad - k) / stride + 1; }
    int out_w(int w_) const { return (w_ + 2 * pad - k) / stride + 1; }

    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& gy);
    void collect(ParamList& out, const std::string& prefix);
};

// k == stride (no padding) transposed convolution; doubles resolution for
// the default k = stride = 2.
struct ConvTranspose2d {
    int in_c = 0, out_c = 0, k = 2, stride = 2;
    std::vector<double> w, b, gw, gb;  // w laid out [in_c][out_c][k][k]

    static ConvTranspose2d make(int in_c, int out_c, int k, int stride);
    size_t widx(int ic, int oc, int ky, int kx) const {
        return ((static_cast<size_t>(ic) * out_c + oc) * k + ky) * k + kx;
    }

    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& gy);
    void collect(ParamList& out, const std::string& prefix);
};

// Layer norm over the channel axis at each spatial position. A zero-variance
// position normalizes to zero, so its output is the shift parameter.
struct ChannelLayerNorm {
    int channels = 0;
    double eps = 1e-5;
    std::vector<double> gamma, beta, ggamma, gbeta;

    static ChannelLayerNorm make(int channels);
    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& gy);
    void collect(ParamList& out, const std::string& prefix);
};

struct Linear {
    int in_dim = 0, out_dim = 0;
    bool has_bias = false;
    std::vector<double> w, b, gw, gb;  // w laid out [out][in]

    static Linear make(int in_dim, int out_dim, bool has_bias);
    std::vector<double> forward(const std::vector<double>& x) const;
    std::vector<double> backward(const std::vector<double>& x,
                                 const std::vector<double>& gy);
    void collect(ParamList& out, const std::string& prefix);
};

std::vector<double> softmax(const std::vector<double>& logits);
// gx given the softmax output y and cotangent gy.
std::vector<double> softmax_backward(const std::vector<double>& y,
                                     const std::vector<double>& gy);

std::vector<double> global_avg_pool(const Tensor& x);
// Spreads the pooled cotangent back over H x W.
Tensor global_avg_pool_backward(const std::vector<double>& gpooled, int h, int w);

void fill_normal(std::vector<double>& v, Rng& rng, double sigma);

}  // namespace deflare::nn
