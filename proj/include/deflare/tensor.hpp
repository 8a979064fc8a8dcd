#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace deflare {

// C x H x W real tensor, row-major, double precision.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {
        if (c_ < 0 || h_ < 0 || w_ < 0)
            throw std::invalid_argument("Tensor: negative dimension");
    }

    size_t size() const { return v.size(); }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    double& at(int ci, int hi, int wi) {
        return v[(static_cast<size_t>(ci) * h + hi) * w + wi];
    }
    const double& at(int ci, int hi, int wi) const {
        return v[(static_cast<size_t>(ci) * h + hi) * w + wi];
    }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    bool finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Tensor& operator+=(const Tensor& o) {
        for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        for (size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
        return *this;
    }
    Tensor& operator*=(double s) {
        for (double& x : v) x *= s;
        return *this;
    }

    std::string shape_str() const {
        return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }
};

// C x H x Wh complex tensor holding the non-redundant half-spectrum of a real
// C x H x W signal; w_full records W so Wh = W/2 + 1 stays invertible.
struct CTensor {
    int c = 0, h = 0, wh = 0, w_full = 0;
    std::vector<std::complex<double>> v;

    CTensor() = default;
    CTensor(int c_, int h_, int w_full_)
        : c(c_), h(h_), wh(w_full_ / 2 + 1), w_full(w_full_),
          v(static_cast<size_t>(c_) * h_ * (w_full_ / 2 + 1), {0.0, 0.0}) {}

    size_t size() const { return v.size(); }

    std::complex<double>& at(int ci, int hi, int wi) {
        return v[(static_cast<size_t>(ci) * h + hi) * wh + wi];
    }
    const std::complex<double>& at(int ci, int hi, int wi) const {
        return v[(static_cast<size_t>(ci) * h + hi) * wh + wi];
    }

    bool same_shape(const CTensor& o) const {
        return c == o.c && h == o.h && wh == o.wh && w_full == o.w_full;
    }

    void fill(std::complex<double> z) { std::fill(v.begin(), v.end(), z); }

    bool finite() const {
        for (const auto& z : v)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }
};

// Small dense matrix, row-major.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
};

using Rng = std::mt19937_64;

// Uniform in [lo, hi). Hand-rolled so sampled streams depend only on the
// engine, not on libstdc++ distribution internals.
inline double uniform(Rng& rng, double lo, double hi) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

// Standard normal via Box-Muller; stateless (the sine partner is discarded).
inline double normal(Rng& rng) {
    double u1 = uniform(rng, 0.0, 1.0);
    double u2 = uniform(rng, 0.0, 1.0);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline bool bernoulli(Rng& rng, double p = 0.5) { return uniform(rng, 0.0, 1.0) < p; }

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i)
        m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

inline double squared_norm(const Tensor& a) { return dot(a, a); }

inline Tensor clamp01(const Tensor& x) {
    Tensor y = x;
    for (double& t : y.v) t = std::clamp(t, 0.0, 1.0);
    return y;
}

// A named view over a flat parameter array and its gradient, used by the
// optimizer and the checkpoint writer. Order of registration is the canonical
// serialization order.
struct ParamView {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    size_t n = 0;
};

using ParamList = std::vector<ParamView>;

inline size_t total_param_count(const ParamList& params) {
    size_t n = 0;
    for (const auto& p : params) n += p.n;
    return n;
}

inline void zero_grads(const ParamList& params) {
    for (const auto& p : params) std::fill(p.grad, p.grad + p.n, 0.0);
}

}  // namespace deflare
