#pragma once

#include "deflare/tensor.hpp"

namespace deflare {

struct LossWeights {
    double alpha = 2.0;   // perceptual weight
    double lambda = 1.0;  // frequency weight

    void validate() const {
        if (alpha <= 0.0) throw std::invalid_argument("LossWeights: alpha must be > 0");
        if (lambda < 0.0) throw std::invalid_argument("LossWeights: lambda must be >= 0");
    }
};

// Mean absolute error plus mean squared error, both averaged over all
// elements. If grad_pred is non-null it receives dL/dpred.
double perceptual_loss(const Tensor& pred, const Tensor& target,
                       Tensor* grad_pred = nullptr);

// L1 distance between spectral amplitude maps plus L1 distance between
// wrapped phase maps under the shared orthonormal transform. Phase distance
// skips bins where both amplitudes are below 1e-8.
double frequency_loss(const Tensor& pred, const Tensor& target,
                      Tensor* grad_pred = nullptr);

// Components split out for amplitude/phase oracles; loss = amplitude + phase.
struct FrequencyLossParts {
    double amplitude = 0.0;
    double phase = 0.0;
};
FrequencyLossParts frequency_loss_parts(const Tensor& pred, const Tensor& target);

struct LossBreakdown {
    double total = 0.0;
    double perceptual = 0.0;  // restored + flare terms, unweighted
    double frequency = 0.0;   // unweighted
    double ldg = 0.0;
};

// alpha * (perceptual(restored, reference) + perceptual(flare_pred, flare_true))
// + lambda * frequency(restored, reference) + ldg. Gradients for the ldg term
// are the caller's responsibility (it routes through the patch sampler).
LossBreakdown total_loss(const Tensor& restored, const Tensor& flare_pred,
                         const Tensor& reference, const Tensor& flare_true,
                         double ldg, const LossWeights& w,
                         Tensor* g_restored = nullptr, Tensor* g_flare = nullptr);

}  // namespace deflare
