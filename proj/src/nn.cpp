#include "deflare/nn.hpp"

namespace deflare::nn {

Tensor StarReLU::forward(const Tensor& x) const {
    Tensor y(x.c, x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = star_relu(x.v[i], scale, bias);
    return y;
}

Tensor StarReLU::backward(const Tensor& x, const Tensor& gy) {
    Tensor gx(x.c, x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i) {
        double r = x.v[i] > 0.0 ? x.v[i] : 0.0;
        gx.v[i] = gy.v[i] * scale * 2.0 * r;
        gscale += gy.v[i] * r * r;
        gbias += gy.v[i];
    }
    return gx;
}

std::vector<double> StarReLU::forward_vec(const std::vector<double>& x) const {
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = star_relu(x[i], scale, bias);
    return y;
}

std::vector<double> StarReLU::backward_vec(const std::vector<double>& x,
                                           const std::vector<double>& gy) {
    std::vector<double> gx(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double r = x[i] > 0.0 ? x[i] : 0.0;
        gx[i] = gy[i] * scale * 2.0 * r;
        gscale += gy[i] * r * r;
        gbias += gy[i];
    }
    return gx;
}

void StarReLU::collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".scale", &scale, &gscale, 1});
    out.push_back({prefix + ".bias", &bias, &gbias, 1});
}

Tensor LeakyReLU::forward(const Tensor& x) const {
    Tensor y(x.c, x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i)
        y.v[i] = x.v[i] > 0.0 ? x.v[i] : slope * x.v[i];
    return y;
}

Tensor LeakyReLU::backward(const Tensor& x, const Tensor& gy) const {
    Tensor gx(x.c, x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i)
        gx.v[i] = gy.v[i] * (x.v[i] > 0.0 ? 1.0 : slope);
    return gx;
}

Conv2d Conv2d::make(int in_c, int out_c, int k, int stride, int pad) {
    Conv2d c;
    c.in_c = in_c;
    c.out_c = out_c;
    c.k = k;
    c.stride = stride;
    c.pad = pad;
    size_t nw = static_cast<size_t>(out_c) * in_c * k * k;
    c.w.assign(nw, 0.0);
    c.gw.assign(nw, 0.0);
    c.b.assign(out_c, 0.0);
    c.gb.assign(out_c, 0.0);
    return c;
}

Tensor Conv2d::forward(const Tensor& x) const {
    if (x.c != in_c)
        throw std::invalid_argument("Conv2d: expected " + std::to_string(in_c) +
                                    " channels, got " + std::to_string(x.c));
    const int oh = out_h(x.h), ow = out_w(x.w);
    Tensor y(out_c, oh, ow);
    for (int oc = 0; oc < out_c; ++oc) {
        double* yp = &y.at(oc, 0, 0);
        for (int i = 0; i < oh * ow; ++i) yp[i] = b[oc];
        for (int ic = 0; ic < in_c; ++ic)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    double wv = w[widx(oc, ic, ky, kx)];
                    if (wv == 0.0) continue;
                    for (int oy = 0; oy < oh; ++oy) {
                        int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        const double* xr = &x.at(ic, iy, 0);
                        double* yr = &y.at(oc, oy, 0);
                        for (int ox = 0; ox < ow; ++ox) {
                            int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= x.w) continue;
                            yr[ox] += wv * xr[ix];
                        }
                    }
                }
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& gy) {
    const int oh = out_h(x.h), ow = out_w(x.w);
    Tensor gx(x.c, x.h, x.w);
    for (int oc = 0; oc < out_c; ++oc) {
        const double* gr = &gy.at(oc, 0, 0);
        for (int i = 0; i < oh * ow; ++i) gb[oc] += gr[i];
        for (int ic = 0; ic < in_c; ++ic)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    double wv = w[widx(oc, ic, ky, kx)];
                    double acc = 0.0;
                    for (int oy = 0; oy < oh; ++oy) {
                        int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        const double* xr = &x.at(ic, iy, 0);
                        double* gxr = &gx.at(ic, iy, 0);
                        const double* gyr = &gy.at(oc, oy, 0);
                        for (int ox = 0; ox < ow; ++ox) {
                            int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= x.w) continue;
                            acc += xr[ix] * gyr[ox];
                            gxr[ix] += wv * gyr[ox];
                        }
                    }
                    gw[widx(oc, ic, ky, kx)] += acc;
                }
    }
    return gx;
}

void Conv2d::collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".w", w.data(), gw.data(), w.size()});
    out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
}

ConvTranspose2d ConvTranspose2d::make(int in_c, int out_c, int k, int stride) {
    ConvTranspose2d c;
    c.in_c = in_c;
    c.out_c = out_c;
    c.k = k;
    c.stride = stride;
    size_t nw = static_cast<size_t>(in_c) * out_c * k * k;
    c.w.assign(nw, 0.0);
    c.gw.assign(nw, 0.0);
    c.b.assign(out_c, 0.0);
    c.gb.assign(out_c, 0.0);
    return c;
}

Tensor ConvTranspose2d::forward(const Tensor& x) const {
    if (x.c != in_c)
        throw std::invalid_argument("ConvTranspose2d: expected " +
                                    std::to_string(in_c) + " channels, got " +
                                    std::to_string(x.c));
    const int oh = (x.h - 1) * stride + k, ow = (x.w - 1) * stride + k;
    Tensor y(out_c, oh, ow);
    for (int oc = 0; oc < out_c; ++oc) {
        double* yp = &y.at(oc, 0, 0);
        for (int i = 0; i < oh * ow; ++i) yp[i] = b[oc];
    }
    for (int ic = 0; ic < in_c; ++ic)
        for (int oc = 0; oc < out_c; ++oc)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    double wv = w[widx(ic, oc, ky, kx)];
                    if (wv == 0.0) continue;
                    for (int iy = 0; iy < x.h; ++iy) {
                        const double* xr = &x.at(ic, iy, 0);
                        double* yr = &y.at(oc, iy * stride + ky, 0);
                        for (int ix = 0; ix < x.w; ++ix)
                            yr[ix * stride + kx] += wv * xr[ix];
                    }
                }
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& x, const Tensor& gy) {
    Tensor gx(x.c, x.h, x.w);
    for (int oc = 0; oc < out_c; ++oc)
        for (size_t i = 0; i < static_cast<size_t>(gy.h) * gy.w; ++i)
            gb[oc] += gy.v[static_cast<size_t>(oc) * gy.h * gy.w + i];
    for (int ic = 0; ic < in_c; ++ic)
        for (int oc = 0; oc < out_c; ++oc)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    double wv = w[widx(ic, oc, ky, kx)];
                    double acc = 0.0;
                    for (int iy = 0; iy < x.h; ++iy) {
                        const double* xr = &x.at(ic, iy, 0);
                        double* gxr = &gx.at(ic, iy, 0);
                        const double* gyr = &gy.at(oc, iy * stride + ky, 0);
                        for (int ix = 0; ix < x.w; ++ix) {
                            acc += xr[ix] * gyr[ix * stride + kx];
                            gxr[ix] += wv * gyr[ix * stride + kx];
                        }
                    }
                    gw[widx(ic, oc, ky, kx)] += acc;
                }
    return gx;
}

void ConvTranspose2d::collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".w", w.data(), gw.data(), w.size()});
    out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
}

ChannelLayerNorm ChannelLayerNorm::make(int channels) {
    ChannelLayerNorm ln;
    ln.channels = channels;
    ln.gamma.assign(channels, 1.0);
    ln.beta.assign(channels, 0.0);
    ln.ggamma.assign(channels, 0.0);
    ln.gbeta.assign(channels, 0.0);
    return ln;
}

Tensor ChannelLayerNorm::forward(const Tensor& x) const {
    if (x.c != channels)
        throw std::invalid_argument("ChannelLayerNorm: channel mismatch");
    Tensor y(x.c, x.h, x.w);
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    for (size_t p = 0; p < plane; ++p) {
        double mean = 0.0;
        for (int c = 0; c < x.c; ++c) mean += x.v[c * plane + p];
        mean /= x.c;
        double var = 0.0;
        for (int c = 0; c < x.c; ++c) {
            double d = x.v[c * plane + p] - mean;
            var += d * d;
        }
        var /= x.c;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int c = 0; c < x.c; ++c)
            y.v[c * plane + p] =
                gamma[c] * (x.v[c * plane + p] - mean) * inv + beta[c];
    }
    return y;
}

Tensor ChannelLayerNorm::backward(const Tensor& x, const Tensor& gy) {
    Tensor gx(x.c, x.h, x.w);
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    const int C = x.c;
    for (size_t p = 0; p < plane; ++p) {
        double mean = 0.0;
        for (int c = 0; c < C; ++c) mean += x.v[c * plane + p];
        mean /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
            double d = x.v[c * plane + p] - mean;
            var += d * d;
        }
        var /= C;
        double inv = 1.0 / std::sqrt(var + eps);

        double sum_gxhat = 0.0, sum_gxhat_xc = 0.0;
        for (int c = 0; c < C; ++c) {
            double xc = (x.v[c * plane + p] - mean) * inv;
            double g = gy.v[c * plane + p];
            ggamma[c] += g * xc;
            gbeta[c] += g;
            double gxhat = g * gamma[c];
            sum_gxhat += gxhat;
            sum_gxhat_xc += gxhat * xc;
        }
        for (int c = 0; c < C; ++c) {
            double xc = (x.v[c * plane + p] - mean) * inv;
            double gxhat = gy.v[c * plane + p] * gamma[c];
            gx.v[c * plane + p] =
                inv * (gxhat - sum_gxhat / C - xc * sum_gxhat_xc / C);
        }
    }
    return gx;
}

void ChannelLayerNorm::collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", gamma.data(), ggamma.data(), gamma.size()});
    out.push_back({prefix + ".beta", beta.data(), gbeta.data(), beta.size()});
}

Linear Linear::make(int in_dim, int out_dim, bool has_bias) {
    Linear l;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.has_bias = has_bias;
    l.w.assign(static_cast<size_t>(in_dim) * out_dim, 0.0);
    l.gw.assign(l.w.size(), 0.0);
    if (has_bias) {
        l.b.assign(out_dim, 0.0);
        l.gb.assign(out_dim, 0.0);
    }
    return l;
}

std::vector<double> Linear::forward(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != in_dim)
        throw std::invalid_argument("Linear: expected input dim " +
                                    std::to_string(in_dim) + ", got " +
                                    std::to_string(x.size()));
    std::vector<double> y(out_dim, 0.0);
    for (int o = 0; o < out_dim; ++o) {
        double acc = has_bias ? b[o] : 0.0;
        const double* wr = &w[static_cast<size_t>(o) * in_dim];
        for (int i = 0; i < in_dim; ++i) acc += wr[i] * x[i];
        y[o] = acc;
    }
    return y;
}

std::vector<double> Linear::backward(const std::vector<double>& x,
                                     const std::vector<double>& gy) {
    std::vector<double> gx(in_dim, 0.0);
    for (int o = 0; o < out_dim; ++o) {
        double g = gy[o];
        double* gwr = &gw[static_cast<size_t>(o) * in_dim];
        const double* wr = &w[static_cast<size_t>(o) * in_dim];
        for (int i = 0; i < in_dim; ++i) {
            gwr[i] += g * x[i];
            gx[i] += g * wr[i];
        }
        if (has_bias) gb[o] += g;
    }
    return gx;
}

void Linear::collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".w", w.data(), gw.data(), w.size()});
    if (has_bias) out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double m = logits[0];
    for (double x : logits) m = std::max(m, x);
    std::vector<double> y(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        y[i] = std::exp(logits[i] - m);
        sum += y[i];
    }
    for (double& x : y) x /= sum;
    return y;
}

std::vector<double> softmax_backward(const std::vector<double>& y,
                                     const std::vector<double>& gy) {
    double dotp = 0.0;
    for (size_t i = 0; i < y.size(); ++i) dotp += y[i] * gy[i];
    std::vector<double> gx(y.size());
    for (size_t i = 0; i < y.size(); ++i) gx[i] = y[i] * (gy[i] - dotp);
    return gx;
}

std::vector<double> global_avg_pool(const Tensor& x) {
    std::vector<double> pooled(x.c, 0.0);
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    for (int c = 0; c < x.c; ++c) {
        double acc = 0.0;
        for (size_t p = 0; p < plane; ++p) acc += x.v[c * plane + p];
        pooled[c] = acc / static_cast<double>(plane);
    }
    return pooled;
}

Tensor global_avg_pool_backward(const std::vector<double>& gpooled, int h, int w) {
    Tensor gx(static_cast<int>(gpooled.size()), h, w);
    const double scale = 1.0 / (static_cast<double>(h) * w);
    const size_t plane = static_cast<size_t>(h) * w;
    for (size_t c = 0; c < gpooled.size(); ++c)
        for (size_t p = 0; p < plane; ++p) gx.v[c * plane + p] = gpooled[c] * scale;
    return gx;
}

void fill_normal(std::vector<double>& v, Rng& rng, double sigma) {
    for (double& x : v) x = sigma * normal(rng);
}

}  // namespace deflare::nn
