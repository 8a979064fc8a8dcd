#include "deflare/losses.hpp"

#include "deflare/fft.hpp"

namespace deflare {

double perceptual_loss(const Tensor& pred, const Tensor& target, Tensor* grad_pred) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("perceptual_loss: shape mismatch " +
                                    pred.shape_str() + " vs " + target.shape_str());
    const double n = static_cast<double>(pred.v.size());
    double l1 = 0.0, mse = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        double d = pred.v[i] - target.v[i];
        l1 += std::abs(d);
        mse += d * d;
    }
    if (grad_pred) {
        *grad_pred = Tensor(pred.c, pred.h, pred.w);
        for (size_t i = 0; i < pred.v.size(); ++i) {
            double d = pred.v[i] - target.v[i];
            double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            grad_pred->v[i] = (sgn + 2.0 * d) / n;
        }
    }
    return l1 / n + mse / n;
}

namespace {

constexpr double kPhaseAmpFloor = 1e-8;

struct FreqWork {
    FrequencyLossParts parts;
    CTensor cot;  // dL/d(pred spectrum), only filled when grads are requested
};

FreqWork frequency_loss_impl(const Tensor& pred, const Tensor& target, bool want_grad) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("frequency_loss: shape mismatch " +
                                    pred.shape_str() + " vs " + target.shape_str());
    CTensor sp = rdft2(pred);
    CTensor st = rdft2(target);

    FreqWork work;
    if (want_grad) work.cot = CTensor(pred.c, pred.h, pred.w);

    const size_t n_bins = sp.v.size();
    // First pass: count unmasked bins so the phase mean is well-defined.
    size_t n_phase = 0;
    for (size_t i = 0; i < n_bins; ++i) {
        double ap = std::abs(sp.v[i]), at = std::abs(st.v[i]);
        if (!(ap < kPhaseAmpFloor && at < kPhaseAmpFloor)) ++n_phase;
    }

    double amp_sum = 0.0, phase_sum = 0.0;
    for (size_t i = 0; i < n_bins; ++i) {
        double ap = std::abs(sp.v[i]), at = std::abs(st.v[i]);
        double ad = ap - at;
        amp_sum += std::abs(ad);

        bool masked = ap < kPhaseAmpFloor && at < kPhaseAmpFloor;
        double dwrap_ddelta = 0.0, pp = 0.0;
        if (!masked) {
            pp = std::atan2(sp.v[i].imag(), sp.v[i].real());
            double pt = std::atan2(st.v[i].imag(), st.v[i].real());
            double delta = pp - pt;
            double adel = std::abs(delta);
            double wrapped = std::min(adel, 2.0 * M_PI - adel);
            phase_sum += wrapped;
            double sgn = delta > 0.0 ? 1.0 : (delta < 0.0 ? -1.0 : 0.0);
            dwrap_ddelta = adel < M_PI ? sgn : -sgn;
        }

        if (want_grad) {
            double re = sp.v[i].real(), im = sp.v[i].imag();
            double g_re = 0.0, g_im = 0.0;
            if (ap > 0.0) {
                double amp_sign = ad > 0.0 ? 1.0 : (ad < 0.0 ? -1.0 : 0.0);
                double g_amp = amp_sign / static_cast<double>(n_bins);
                g_re += g_amp * re / ap;
                g_im += g_amp * im / ap;
                if (!masked && n_phase > 0) {
                    double g_phase = dwrap_ddelta / static_cast<double>(n_phase);
                    double a2 = ap * ap;
                    g_re += g_phase * (-im / a2);
                    g_im += g_phase * (re / a2);
                }
            }
            work.cot.v[i] = {g_re, g_im};
        }
    }

    work.parts.amplitude = amp_sum / static_cast<double>(n_bins);
    work.parts.phase = n_phase > 0 ? phase_sum / static_cast<double>(n_phase) : 0.0;
    return work;
}

}  // namespace

FrequencyLossParts frequency_loss_parts(const Tensor& pred, const Tensor& target) {
    return frequency_loss_impl(pred, target, false).parts;
}

double frequency_loss(const Tensor& pred, const Tensor& target, Tensor* grad_pred) {
    FreqWork work = frequency_loss_impl(pred, target, grad_pred != nullptr);
    if (grad_pred) *grad_pred = rdft2_vjp(work.cot, pred.h, pred.w);
    return work.parts.amplitude + work.parts.phase;
}

LossBreakdown total_loss(const Tensor& restored, const Tensor& flare_pred,
                         const Tensor& reference, const Tensor& flare_true,
                         double ldg, const LossWeights& w, Tensor* g_restored,
                         Tensor* g_flare) {
    w.validate();
    LossBreakdown out;
    out.ldg = ldg;

    Tensor g_per_restored, g_per_flare, g_freq;
    double per_r = perceptual_loss(restored, reference,
                                   g_restored ? &g_per_restored : nullptr);
    double per_f =
        perceptual_loss(flare_pred, flare_true, g_flare ? &g_per_flare : nullptr);
    double freq = frequency_loss(restored, reference, g_restored ? &g_freq : nullptr);

    out.perceptual = per_r + per_f;
    out.frequency = freq;
    out.total = w.alpha * out.perceptual + w.lambda * out.frequency + ldg;

    if (g_restored) {
        *g_restored = Tensor(restored.c, restored.h, restored.w);
        for (size_t i = 0; i < g_restored->v.size(); ++i)
            g_restored->v[i] =
                w.alpha * g_per_restored.v[i] + w.lambda * g_freq.v[i];
    }
    if (g_flare) {
        *g_flare = g_per_flare;
        for (double& t : g_flare->v) t *= w.alpha;
    }
    return out;
}

}  // namespace deflare
