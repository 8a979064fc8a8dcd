#include "deflare/metrics.hpp"

#include "deflare/fft.hpp"
#include "deflare/synthesis.hpp"

namespace deflare {

namespace {

constexpr double kPsnrCap = 100.0;

double psnr_from_mse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace

double psnr(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("psnr: shape mismatch " + pred.shape_str() +
                                    " vs " + target.shape_str());
    double mse = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        double d = pred.v[i] - target.v[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred.v.size());
    return psnr_from_mse(mse);
}

double ssim(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("ssim: shape mismatch " + pred.shape_str() +
                                    " vs " + target.shape_str());
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (pred.h < kWin || pred.w < kWin)
        throw std::invalid_argument("ssim: image " + pred.shape_str() +
                                    " smaller than the 11x11 window");

    double window[kWin][kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
            double dy = i - kWin / 2, dx = j - kWin / 2;
            window[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
            wsum += window[i][j];
        }
    for (auto& row : window)
        for (double& w : row) w /= wsum;

    double total = 0.0;
    for (int c = 0; c < pred.c; ++c) {
        double acc = 0.0;
        int count = 0;
        for (int y = 0; y + kWin <= pred.h; ++y)
            for (int x = 0; x + kWin <= pred.w; ++x) {
                double mu_p = 0, mu_t = 0, pp = 0, tt = 0, pt = 0;
                for (int i = 0; i < kWin; ++i)
                    for (int j = 0; j < kWin; ++j) {
                        double w = window[i][j];
                        double a = pred.at(c, y + i, x + j);
                        double b = target.at(c, y + i, x + j);
                        mu_p += w * a;
                        mu_t += w * b;
                        pp += w * a * a;
                        tt += w * b * b;
                        pt += w * a * b;
                    }
                double var_p = pp - mu_p * mu_p;
                double var_t = tt - mu_t * mu_t;
                double cov = pt - mu_p * mu_t;
                double num = (2 * mu_p * mu_t + kC1) * (2 * cov + kC2);
                double den = (mu_p * mu_p + mu_t * mu_t + kC1) * (var_p + var_t + kC2);
                acc += num / den;
                ++count;
            }
        total += acc / count;
    }
    return total / pred.c;
}

std::optional<double> masked_psnr(const Tensor& pred, const Tensor& target,
                                  const Tensor& mask) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("masked_psnr: shape mismatch");
    if (mask.h != pred.h || mask.w != pred.w)
        throw std::invalid_argument("masked_psnr: mask resolution mismatch");

    const size_t plane = static_cast<size_t>(pred.h) * pred.w;
    double mse = 0.0;
    size_t n = 0;
    for (size_t p = 0; p < plane; ++p) {
        if (mask.v[p] <= 0.5) continue;
        for (int c = 0; c < pred.c; ++c) {
            double d = pred.v[c * plane + p] - target.v[c * plane + p];
            mse += d * d;
        }
        n += pred.c;
    }
    if (n == 0) return std::nullopt;
    return psnr_from_mse(mse / static_cast<double>(n));
}

namespace {

// Centered log-amplitude of the full spectrum, via the half-spectrum and
// conjugate symmetry.
Tensor centered_log_amplitude(const Tensor& image) {
    Tensor lum = image.c == 3 ? luminance(image) : image;
    CTensor s = rdft2(lum);
    const int H = lum.h, W = lum.w;
    Tensor out(1, H, W);
    for (int u = 0; u < H; ++u)
        for (int v = 0; v < W; ++v) {
            double amp;
            if (v < s.wh) {
                amp = std::abs(s.at(0, u, v));
            } else {
                amp = std::abs(s.at(0, (H - u) % H, W - v));
            }
            out.at(0, (u + H / 2) % H, (v + W / 2) % W) = std::log1p(amp);
        }
    return out;
}

}  // namespace

Tensor spectrum_image(const Tensor& image) {
    Tensor logmag = centered_log_amplitude(image);
    const int H = logmag.h, W = logmag.w;
    const int dc = (H / 2) * W + (W / 2);

    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < H * W; ++i) {
        if (i == dc) continue;
        lo = std::min(lo, logmag.v[i]);
        hi = std::max(hi, logmag.v[i]);
    }
    Tensor out(1, H, W);
    if (hi > lo) {
        for (int i = 0; i < H * W; ++i)
            out.v[i] = std::clamp((logmag.v[i] - lo) / (hi - lo), 0.0, 1.0);
    } else {
        out.v[dc] = logmag.v[dc] > 0.0 ? 1.0 : 0.0;
    }
    return out;
}

double mean_log_magnitude_outside(const Tensor& image, double radius_fraction) {
    Tensor logmag = centered_log_amplitude(image);
    const int H = logmag.h, W = logmag.w;
    const double cy = H / 2, cx = W / 2;
    const double radius = radius_fraction * std::min(H, W);
    double acc = 0.0;
    size_t n = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double d = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx));
            if (d <= radius) continue;
            acc += logmag.at(0, y, x);
            ++n;
        }
    return n > 0 ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace deflare
