#include "deflare/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace deflare {
namespace {

// Per-size FFTW plans. FFTW_ESTIMATE keeps planning deterministic and
// FFTW_UNALIGNED lets the plans run on any buffer via the new-array API.
struct PlanPair {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

PlanPair& plans_for(int h, int w) {
    static std::map<std::pair<int, int>, PlanPair> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(h, w);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    int wh = w / 2 + 1;
    std::vector<double> real_buf(static_cast<size_t>(h) * w);
    std::vector<fftw_complex> cplx_buf(static_cast<size_t>(h) * wh);
    PlanPair p;
    p.r2c = fftw_plan_dft_r2c_2d(h, w, real_buf.data(), cplx_buf.data(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    p.c2r = fftw_plan_dft_c2r_2d(h, w, cplx_buf.data(), real_buf.data(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    return cache.emplace(key, p).first->second;
}

}  // namespace

CTensor rdft2(const Tensor& x) {
    if (x.c < 1 || x.h < 1 || x.w < 1)
        throw std::invalid_argument("rdft2: empty tensor");
    if (!x.finite()) throw std::invalid_argument("rdft2: non-finite input");

    PlanPair& p = plans_for(x.h, x.w);
    CTensor s(x.c, x.h, x.w);
    const double scale = 1.0 / std::sqrt(static_cast<double>(x.h) * x.w);
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    const size_t splane = static_cast<size_t>(x.h) * s.wh;
    std::vector<double> in(plane);
    for (int ci = 0; ci < x.c; ++ci) {
        std::copy(x.v.begin() + ci * plane, x.v.begin() + (ci + 1) * plane, in.begin());
        fftw_execute_dft_r2c(p.r2c, in.data(),
                             reinterpret_cast<fftw_complex*>(s.v.data() + ci * splane));
    }
    for (auto& z : s.v) z *= scale;
    return s;
}

Tensor irdft2(const CTensor& s, int height, int width) {
    if (s.h != height || s.w_full != width || s.wh != width / 2 + 1)
        throw std::invalid_argument("irdft2: spectrum shaped " + std::to_string(s.h) +
                                    "x" + std::to_string(s.wh) + " (w_full " +
                                    std::to_string(s.w_full) + ") does not match " +
                                    std::to_string(height) + "x" + std::to_string(width));

    PlanPair& p = plans_for(height, width);
    Tensor x(s.c, height, width);
    const double scale = 1.0 / std::sqrt(static_cast<double>(height) * width);
    const size_t plane = static_cast<size_t>(height) * width;
    const size_t splane = static_cast<size_t>(height) * s.wh;
    std::vector<std::complex<double>> in(splane);
    for (int ci = 0; ci < s.c; ++ci) {
        std::copy(s.v.begin() + ci * splane, s.v.begin() + (ci + 1) * splane, in.begin());
        // Self-conjugate bins carry no imaginary degree of freedom.
        for (int ui = 0; ui < height; ++ui)
            for (int vi = 0; vi < s.wh; ++vi)
                if (self_conjugate_bin(height, width, ui, vi))
                    in[static_cast<size_t>(ui) * s.wh + vi] = {
                        in[static_cast<size_t>(ui) * s.wh + vi].real(), 0.0};
        fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(in.data()),
                             x.v.data() + ci * plane);
    }
    for (auto& t : x.v) t *= scale;
    return x;
}

double spectral_energy(const CTensor& s) {
    double e = 0.0;
    for (int ci = 0; ci < s.c; ++ci)
        for (int ui = 0; ui < s.h; ++ui)
            for (int vi = 0; vi < s.wh; ++vi)
                e += column_multiplicity(s.w_full, vi) * std::norm(s.at(ci, ui, vi));
    return e;
}

Tensor rdft2_vjp(const CTensor& grad_spectrum, int height, int width) {
    CTensor d = grad_spectrum;
    for (int ci = 0; ci < d.c; ++ci)
        for (int ui = 0; ui < d.h; ++ui)
            for (int vi = 0; vi < d.wh; ++vi)
                d.at(ci, ui, vi) /= column_multiplicity(width, vi);
    return irdft2(d, height, width);
}

CTensor irdft2_vjp(const Tensor& grad_spatial) {
    CTensor g = rdft2(grad_spatial);
    for (int ci = 0; ci < g.c; ++ci)
        for (int ui = 0; ui < g.h; ++ui)
            for (int vi = 0; vi < g.wh; ++vi) {
                double m = column_multiplicity(g.w_full, vi);
                auto z = g.at(ci, ui, vi) * m;
                if (self_conjugate_bin(g.h, g.w_full, ui, vi)) z = {z.real(), 0.0};
                g.at(ci, ui, vi) = z;
            }
    return g;
}

}  // namespace deflare
