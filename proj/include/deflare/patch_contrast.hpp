#pragma once

#include "deflare/nn.hpp"

namespace deflare {

// Query/positive/negative patch triple for the patchwise contrastive loss.
// The query is cut from the restored image around a light-source pixel, the
// positive from the same location in the reference, negatives from reference
// locations overlapping the query patch by less than 25% area.
struct PatchSet {
    int patch_size = 0;
    std::pair<int, int> query_coord;  // top-left (y, x)
    Tensor query, positive;
    std::vector<Tensor> negatives;
    std::vector<std::pair<int, int>> negative_coords;
};

PatchSet sample_patches(const Tensor& restored, const Tensor& reference,
                        const Tensor& light_mask, int n_negatives, int patch_size,
                        uint64_t seed);

double cosine_sim(const std::vector<double>& z1, const std::vector<double>& z2);

// flatten -> linear -> StarReLU -> linear; callers L2-normalize the output.
struct ProjectionHead {
    nn::Linear l1, l2;
    nn::StarReLU act;
    int in_dim = 0, out_dim = 0;

    static ProjectionHead init(int in_dim, int hidden, int out_dim, uint64_t seed);
    std::vector<double> project(const Tensor& patch) const;
    void collect(ParamList& out, const std::string& prefix);
};

// -log[ exp(p/tau) / (exp(p/tau) + sum_n exp(n_i/tau)) ] via log-sum-exp.
double info_nce_from_sims(double pos_sim, const std::vector<double>& neg_sims,
                          double tau);

// Contrastive loss over a sampled patch set. When g_query is non-null it
// receives dL/d(query patch pixels) and the head accumulates its gradients
// (all three projection paths contribute).
double patch_contrast_loss(const PatchSet& patches, ProjectionHead& head, double tau,
                           Tensor* g_query = nullptr);

}  // namespace deflare
