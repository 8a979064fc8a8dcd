#include "deflare/patch_contrast.hpp"

namespace deflare {

namespace {

Tensor cut_patch(const Tensor& img, int top, int left, int size) {
    Tensor p(img.c, size, size);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                p.at(c, y, x) = img.at(c, top + y, left + x);
    return p;
}

int overlap_area(int ay, int ax, int by, int bx, int size) {
    int ih = std::max(0, std::min(ay, by) + size - std::max(ay, by));
    int iw = std::max(0, std::min(ax, bx) + size - std::max(ax, bx));
    return ih * iw;
}

double luminance_at(const Tensor& img, int y, int x) {
    return 0.2126 * img.at(0, y, x) + 0.7152 * img.at(1, y, x) +
           0.0722 * img.at(2, y, x);
}

}  // namespace

PatchSet sample_patches(const Tensor& restored, const Tensor& reference,
                        const Tensor& light_mask, int n_negatives, int patch_size,
                        uint64_t seed) {
    if (!restored.same_shape(reference))
        throw std::invalid_argument("sample_patches: image shapes differ");
    if (patch_size < 1 || patch_size > std::min(restored.h, restored.w))
        throw std::invalid_argument("sample_patches: patch size " +
                                    std::to_string(patch_size) +
                                    " exceeds image " + restored.shape_str());
    if (light_mask.h != restored.h || light_mask.w != restored.w)
        throw std::invalid_argument("sample_patches: mask resolution mismatch");

    Rng rng(seed);
    const int H = restored.h, W = restored.w, P = patch_size;

    // Query center: uniform over mask-positive pixels; falls back to the
    // brightest reference pixel when the mask is empty.
    std::vector<std::pair<int, int>> centers;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (light_mask.at(0, y, x) > 0.5) centers.emplace_back(y, x);

    int cy, cx;
    if (centers.empty()) {
        double best = -1.0;
        cy = cx = 0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double lum = luminance_at(reference, y, x);
                if (lum > best) {
                    best = lum;
                    cy = y;
                    cx = x;
                }
            }
    } else {
        size_t idx = std::min<size_t>(
            static_cast<size_t>(uniform(rng, 0.0, 1.0) * centers.size()),
            centers.size() - 1);
        cy = centers[idx].first;
        cx = centers[idx].second;
    }

    PatchSet out;
    out.patch_size = P;
    int qy = std::clamp(cy - P / 2, 0, H - P);
    int qx = std::clamp(cx - P / 2, 0, W - P);
    out.query_coord = {qy, qx};
    out.query = cut_patch(restored, qy, qx, P);
    out.positive = cut_patch(reference, qy, qx, P);

    std::vector<std::pair<int, int>> admissible;
    for (int y = 0; y + P <= H; ++y)
        for (int x = 0; x + P <= W; ++x)
            if (4 * overlap_area(qy, qx, y, x, P) < P * P)
                admissible.emplace_back(y, x);
    if (admissible.empty())
        throw std::invalid_argument(
            "sample_patches: no negative location with overlap below 25%");

    for (int i = 0; i < n_negatives; ++i) {
        size_t idx = std::min<size_t>(
            static_cast<size_t>(uniform(rng, 0.0, 1.0) * admissible.size()),
            admissible.size() - 1);
        auto [ny, nx] = admissible[idx];
        out.negative_coords.emplace_back(ny, nx);
        out.negatives.push_back(cut_patch(reference, ny, nx, P));
    }
    return out;
}

double cosine_sim(const std::vector<double>& z1, const std::vector<double>& z2) {
    if (z1.size() != z2.size())
        throw std::invalid_argument("cosine_sim: dimension mismatch");
    double d = 0.0, n1 = 0.0, n2 = 0.0;
    for (size_t i = 0; i < z1.size(); ++i) {
        d += z1[i] * z2[i];
        n1 += z1[i] * z1[i];
        n2 += z2[i] * z2[i];
    }
    if (n1 <= 0.0 || n2 <= 0.0)
        throw std::invalid_argument("cosine_sim: zero vector");
    return d / std::sqrt(n1 * n2);
}

ProjectionHead ProjectionHead::init(int in_dim, int hidden, int out_dim,
                                    uint64_t seed) {
    Rng rng(seed);
    ProjectionHead head;
    head.in_dim = in_dim;
    head.out_dim = out_dim;
    head.l1 = nn::Linear::make(in_dim, hidden, true);
    nn::fill_normal(head.l1.w, rng, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    head.l2 = nn::Linear::make(hidden, out_dim, true);
    nn::fill_normal(head.l2.w, rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
    return head;
}

std::vector<double> ProjectionHead::project(const Tensor& patch) const {
    if (static_cast<int>(patch.v.size()) != in_dim)
        throw std::invalid_argument("ProjectionHead: patch has " +
                                    std::to_string(patch.v.size()) +
                                    " values, head expects " + std::to_string(in_dim));
    return l2.forward(act.forward_vec(l1.forward(patch.v)));
}

void ProjectionHead::collect(ParamList& out, const std::string& prefix) {
    l1.collect(out, prefix + ".l1");
    act.collect(out, prefix + ".act");
    l2.collect(out, prefix + ".l2");
}

double info_nce_from_sims(double pos_sim, const std::vector<double>& neg_sims,
                          double tau) {
    if (tau <= 0.0) throw std::invalid_argument("info_nce: tau must be > 0");
    double m = pos_sim / tau;
    for (double s : neg_sims) m = std::max(m, s / tau);
    double sum = std::exp(pos_sim / tau - m);
    for (double s : neg_sims) sum += std::exp(s / tau - m);
    return m + std::log(sum) - pos_sim / tau;
}

namespace {

struct Projected {
    std::vector<double> x;   // flattened patch
    std::vector<double> h1;  // l1 output
    std::vector<double> a1;  // StarReLU output
    std::vector<double> z;   // l2 output
    std::vector<double> v;   // unit-normalized
    double norm = 0.0;
};

Projected run_head(const ProjectionHead& head, const Tensor& patch) {
    Projected p;
    p.x = patch.v;
    p.h1 = head.l1.forward(p.x);
    p.a1 = head.act.forward_vec(p.h1);
    p.z = head.l2.forward(p.a1);
    double n2 = 0.0;
    for (double t : p.z) n2 += t * t;
    p.norm = std::sqrt(n2);
    if (p.norm <= 0.0)
        throw std::invalid_argument("patch_contrast_loss: zero projection");
    p.v.resize(p.z.size());
    for (size_t i = 0; i < p.z.size(); ++i) p.v[i] = p.z[i] / p.norm;
    return p;
}

// dL/dz through v = z / |z| given dL/dv.
std::vector<double> normalize_backward(const Projected& p,
                                       const std::vector<double>& gv) {
    double vg = 0.0;
    for (size_t i = 0; i < gv.size(); ++i) vg += p.v[i] * gv[i];
    std::vector<double> gz(gv.size());
    for (size_t i = 0; i < gv.size(); ++i) gz[i] = (gv[i] - p.v[i] * vg) / p.norm;
    return gz;
}

std::vector<double> head_backward(ProjectionHead& head, const Projected& p,
                                  const std::vector<double>& gz) {
    auto ga1 = head.l2.backward(p.a1, gz);
    auto gh1 = head.act.backward_vec(p.h1, ga1);
    return head.l1.backward(p.x, gh1);
}

}  // namespace

double patch_contrast_loss(const PatchSet& patches, ProjectionHead& head, double tau,
                           Tensor* g_query) {
    if (tau <= 0.0)
        throw std::invalid_argument("patch_contrast_loss: tau must be > 0");

    Projected q = run_head(head, patches.query);
    Projected pos = run_head(head, patches.positive);
    std::vector<Projected> negs;
    negs.reserve(patches.negatives.size());
    for (const auto& n : patches.negatives) negs.push_back(run_head(head, n));

    const size_t M = negs.size();
    double pos_sim = 0.0;
    for (size_t i = 0; i < q.v.size(); ++i) pos_sim += q.v[i] * pos.v[i];
    std::vector<double> neg_sims(M, 0.0);
    for (size_t n = 0; n < M; ++n)
        for (size_t i = 0; i < q.v.size(); ++i) neg_sims[n] += q.v[i] * negs[n].v[i];

    double loss = info_nce_from_sims(pos_sim, neg_sims, tau);
    if (!g_query) return loss;

    // Softmax weights over [pos, negs] scaled by 1/tau.
    std::vector<double> logits(1 + M);
    logits[0] = pos_sim / tau;
    for (size_t n = 0; n < M; ++n) logits[1 + n] = neg_sims[n] / tau;
    auto p = nn::softmax(logits);

    double g_pos_sim = (p[0] - 1.0) / tau;
    std::vector<double> gv_q(q.v.size(), 0.0);
    for (size_t i = 0; i < q.v.size(); ++i) gv_q[i] = g_pos_sim * pos.v[i];
    std::vector<double> gv_pos(q.v.size());
    for (size_t i = 0; i < q.v.size(); ++i) gv_pos[i] = g_pos_sim * q.v[i];

    for (size_t n = 0; n < M; ++n) {
        double g_sim = p[1 + n] / tau;
        for (size_t i = 0; i < q.v.size(); ++i) {
            gv_q[i] += g_sim * negs[n].v[i];
        }
        std::vector<double> gv_neg(q.v.size());
        for (size_t i = 0; i < q.v.size(); ++i) gv_neg[i] = g_sim * q.v[i];
        head_backward(head, negs[n], normalize_backward(negs[n], gv_neg));
    }

    head_backward(head, pos, normalize_backward(pos, gv_pos));
    auto gx = head_backward(head, q, normalize_backward(q, gv_q));

    *g_query = Tensor(patches.query.c, patches.query.h, patches.query.w);
    g_query->v = gx;
    return loss;
}

}  // namespace deflare
