#include "deflare/trainer.hpp"

#include <cinttypes>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "deflare/image_io.hpp"
#include "deflare/losses.hpp"
#include "deflare/metrics.hpp"

namespace fs = std::filesystem;

namespace deflare {

void TrainConfig::validate() const {
    if (lr <= 0.0) throw std::invalid_argument("config: lr must be > 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (total_iters < 0) throw std::invalid_argument("config: total_iters must be >= 0");
    if (alpha <= 0.0) throw std::invalid_argument("config: alpha must be > 0");
    if (lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
    if (tau <= 0.0) throw std::invalid_argument("config: tau must be > 0");
    network().validate();
    if (crop % (1 << stages) != 0)
        throw std::invalid_argument("config: crop " + std::to_string(crop) +
                                    " not divisible by " + std::to_string(1 << stages));
    if (effective_patch_size() > crop)
        throw std::invalid_argument("config: patch_size exceeds crop");
    if (n_negatives < 1) throw std::invalid_argument("config: n_negatives must be >= 1");
    if (proj_dim < 2) throw std::invalid_argument("config: proj_dim must be >= 2");
    for (size_t i = 1; i < lr_halve_at.size(); ++i)
        if (lr_halve_at[i] <= lr_halve_at[i - 1])
            throw std::invalid_argument("config: lr_halve_at must be strictly increasing");
}

NetworkConfig TrainConfig::network() const {
    NetworkConfig n;
    n.stages = stages;
    n.base_channels = base_channels;
    n.n_filters = n_filters;
    n.blocks_per_stage = blocks_per_stage;
    return n;
}

std::vector<int> TrainConfig::milestones() const {
    if (!lr_halve_at.empty()) return lr_halve_at;
    // Scaled from the reference schedule: halve at 75% and 100% of budget.
    std::vector<int> ms;
    int a = static_cast<int>(std::lround(0.75 * total_iters));
    if (a > 0) ms.push_back(a);
    if (total_iters > 0 && (ms.empty() || total_iters > ms.back()))
        ms.push_back(total_iters);
    return ms;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: invalid boolean for '" + key + "': " + v);
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

TrainConfig TrainConfig::parse_text(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        size_t comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected 'key = value', got: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));

        if (key == "lr") cfg.lr = std::stod(val);
        else if (key == "beta1") cfg.beta1 = std::stod(val);
        else if (key == "beta2") cfg.beta2 = std::stod(val);
        else if (key == "batch_size") cfg.batch_size = std::stoi(val);
        else if (key == "crop") cfg.crop = std::stoi(val);
        else if (key == "total_iters") cfg.total_iters = std::stoi(val);
        else if (key == "lr_halve_at") {
            cfg.lr_halve_at.clear();
            std::istringstream vs(val);
            std::string tok;
            while (std::getline(vs, tok, ',')) {
                tok = trim(tok);
                if (!tok.empty()) cfg.lr_halve_at.push_back(std::stoi(tok));
            }
        } else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "alpha") cfg.alpha = std::stod(val);
        else if (key == "lambda") cfg.lambda = std::stod(val);
        else if (key == "tau") cfg.tau = std::stod(val);
        else if (key == "ldgm_enabled") cfg.ldgm_enabled = parse_bool(key, val);
        else if (key == "gdfg_enabled") cfg.gdfg_enabled = parse_bool(key, val);
        else if (key == "stages") cfg.stages = std::stoi(val);
        else if (key == "base_channels") cfg.base_channels = std::stoi(val);
        else if (key == "n_filters") cfg.n_filters = std::stoi(val);
        else if (key == "blocks_per_stage") cfg.blocks_per_stage = std::stoi(val);
        else if (key == "n_negatives") cfg.n_negatives = std::stoi(val);
        else if (key == "proj_dim") cfg.proj_dim = std::stoi(val);
        else if (key == "patch_size") cfg.patch_size = std::stoi(val);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return cfg;
}

TrainConfig TrainConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

std::string TrainConfig::serialize() const {
    std::ostringstream out;
    out << "lr = " << fmt_double(lr) << "\n";
    out << "beta1 = " << fmt_double(beta1) << "\n";
    out << "beta2 = " << fmt_double(beta2) << "\n";
    out << "batch_size = " << batch_size << "\n";
    out << "crop = " << crop << "\n";
    out << "total_iters = " << total_iters << "\n";
    out << "lr_halve_at = ";
    for (size_t i = 0; i < lr_halve_at.size(); ++i)
        out << (i ? "," : "") << lr_halve_at[i];
    out << "\n";
    out << "seed = " << seed << "\n";
    out << "alpha = " << fmt_double(alpha) << "\n";
    out << "lambda = " << fmt_double(lambda) << "\n";
    out << "tau = " << fmt_double(tau) << "\n";
    out << "ldgm_enabled = " << (ldgm_enabled ? "true" : "false") << "\n";
    out << "gdfg_enabled = " << (gdfg_enabled ? "true" : "false") << "\n";
    out << "stages = " << stages << "\n";
    out << "base_channels = " << base_channels << "\n";
    out << "n_filters = " << n_filters << "\n";
    out << "blocks_per_stage = " << blocks_per_stage << "\n";
    out << "n_negatives = " << n_negatives << "\n";
    out << "proj_dim = " << proj_dim << "\n";
    out << "patch_size = " << patch_size << "\n";
    return out.str();
}

void Adam::init(const ParamList& params) {
    t = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
        m.emplace_back(p.n, 0.0);
        v.emplace_back(p.n, 0.0);
    }
}

void Adam::step(const ParamList& params, double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        const auto& p = params[pi];
        double* mp = m[pi].data();
        double* vp = v[pi].data();
        for (size_t i = 0; i < p.n; ++i) {
            double g = p.grad[i];
            mp[i] = beta1 * mp[i] + (1.0 - beta1) * g;
            vp[i] = beta2 * vp[i] + (1.0 - beta2) * g * g;
            double mhat = mp[i] / bc1;
            double vhat = vp[i] / bc2;
            p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

ParamList TrainState::params() {
    ParamList out;
    model.collect(out);
    head.collect(out, "proj_head");
    return out;
}

namespace {

TrainState build_state(const TrainConfig& cfg) {
    TrainState st;
    st.config = cfg;
    st.model = Model::init(cfg.network(), cfg.crop, cfg.crop, cfg.gdfg_enabled,
                           cfg.seed);
    int p = cfg.effective_patch_size();
    st.head = ProjectionHead::init(3 * p * p, cfg.proj_dim, cfg.proj_dim,
                                   cfg.seed ^ 0x517cc1b727220a95ull);
    st.adam.beta1 = cfg.beta1;
    st.adam.beta2 = cfg.beta2;
    return st;
}

void write_bytes(std::ostream& out, const void* data, size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void write_u64(std::ostream& out, uint64_t x) { write_bytes(out, &x, 8); }
void write_i64(std::ostream& out, int64_t x) { write_bytes(out, &x, 8); }

void write_str(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    write_bytes(out, s.data(), s.size());
}

void read_bytes(std::istream& in, void* data, size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
}

uint64_t read_u64(std::istream& in) {
    uint64_t x;
    read_bytes(in, &x, 8);
    return x;
}

int64_t read_i64(std::istream& in) {
    int64_t x;
    read_bytes(in, &x, 8);
    return x;
}

std::string read_str(std::istream& in) {
    uint64_t n = read_u64(in);
    std::string s(n, '\0');
    read_bytes(in, s.data(), n);
    return s;
}

constexpr char kCkptMagic[8] = {'D', 'F', 'L', 'R', 'C', 'K', 'P', '1'};

}  // namespace

void save_checkpoint(const std::string& path, TrainState& state) {
    ParamList params = state.params();
    if (state.adam.m.empty()) state.adam.init(params);
    if (state.adam.m.size() != params.size())
        throw std::runtime_error("checkpoint: optimizer state does not match model");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    write_bytes(out, kCkptMagic, 8);
    write_str(out, state.config.serialize());
    write_i64(out, state.iteration);
    write_str(out, state.rng_state);
    write_i64(out, state.adam.t);
    write_u64(out, params.size());
    for (size_t pi = 0; pi < params.size(); ++pi) {
        const auto& p = params[pi];
        write_str(out, p.name);
        write_u64(out, p.n);
        write_bytes(out, p.value, p.n * sizeof(double));
        write_bytes(out, state.adam.m[pi].data(), p.n * sizeof(double));
        write_bytes(out, state.adam.v[pi].data(), p.n * sizeof(double));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    read_bytes(in, magic, 8);
    if (std::memcmp(magic, kCkptMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    TrainConfig cfg = TrainConfig::parse_text(read_str(in));
    TrainState st = build_state(cfg);
    st.iteration = read_i64(in);
    st.rng_state = read_str(in);

    ParamList params = st.params();
    st.adam.init(params);
    st.adam.t = read_i64(in);
    uint64_t n_params = read_u64(in);
    if (n_params != params.size())
        throw std::runtime_error("checkpoint: parameter registry size mismatch");
    for (size_t pi = 0; pi < params.size(); ++pi) {
        std::string name = read_str(in);
        uint64_t n = read_u64(in);
        if (name != params[pi].name || n != params[pi].n)
            throw std::runtime_error("checkpoint: parameter '" + name +
                                     "' does not match registry entry '" +
                                     params[pi].name + "'");
        read_bytes(in, params[pi].value, n * sizeof(double));
        read_bytes(in, st.adam.m[pi].data(), n * sizeof(double));
        read_bytes(in, st.adam.v[pi].data(), n * sizeof(double));
    }
    return st;
}

namespace {

Tensor crop_tensor(const Tensor& t, int top, int left, int size) {
    Tensor out(t.c, size, size);
    for (int c = 0; c < t.c; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                out.at(c, y, x) = t.at(c, top + y, left + x);
    return out;
}

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t x = seed ^ (a * 0x9E3779B97F4A7C15ull) ^ (b * 0xBF58476D1CE4E5B9ull);
    x ^= x >> 30;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

std::string rng_to_string(const Rng& rng) {
    std::ostringstream ss;
    ss << rng;
    return ss.str();
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::string& data_dir,
                  const std::string& out_dir) {
    cfg.validate();
    const int n_samples = validate_dataset(data_dir);
    fs::create_directories(out_dir);

    TrainState st = build_state(cfg);
    ParamList params = st.params();
    ParamList head_params;
    st.head.collect(head_params, "proj_head");
    st.adam.init(params);

    Rng rng(cfg.seed);
    LossWeights weights{cfg.alpha, cfg.lambda};
    const int patch = cfg.effective_patch_size();
    const std::vector<int> ms = cfg.milestones();

    const std::string log_path = (fs::path(out_dir) / "loss_log.csv").string();
    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.ckpt").string();
    std::ofstream log(log_path);
    if (!log) throw std::runtime_error("train: cannot write " + log_path);
    log << "iter,total,perceptual,frequency,ldg,lr\n";

    TrainResult result;
    result.checkpoint_path = ckpt_path;
    result.log_path = log_path;

    for (int iter = 1; iter <= cfg.total_iters; ++iter) {
        int halvings = 0;
        for (int m : ms)
            if (m <= iter) ++halvings;
        const double lr = cfg.lr / std::pow(2.0, halvings);

        zero_grads(params);
        double total = 0.0, perceptual = 0.0, frequency = 0.0, ldg_sum = 0.0;

        for (int slot = 0; slot < cfg.batch_size; ++slot) {
            int idx = std::min<int>(
                static_cast<int>(uniform(rng, 0.0, static_cast<double>(n_samples))),
                n_samples - 1);
            LoadedSample ls = load_sample(data_dir, idx);
            if (ls.input.h < cfg.crop || ls.input.w < cfg.crop)
                throw std::invalid_argument("train: dataset images are smaller than the crop");

            int top = 0, left = 0;
            if (ls.input.h > cfg.crop)
                top = std::min<int>(
                    static_cast<int>(uniform(rng, 0.0, ls.input.h - cfg.crop + 1.0)),
                    ls.input.h - cfg.crop);
            if (ls.input.w > cfg.crop)
                left = std::min<int>(
                    static_cast<int>(uniform(rng, 0.0, ls.input.w - cfg.crop + 1.0)),
                    ls.input.w - cfg.crop);

            Tensor input = crop_tensor(ls.input, top, left, cfg.crop);
            Tensor gt = crop_tensor(ls.gt, top, left, cfg.crop);
            Tensor flare = crop_tensor(ls.flare, top, left, cfg.crop);
            Tensor light = crop_tensor(ls.mask_light, top, left, cfg.crop);

            FwdCache cache;
            auto out = st.model.forward(input, &cache);

            double ldg = 0.0;
            PatchSet ps;
            Tensor g_query;
            if (cfg.ldgm_enabled) {
                ps = sample_patches(out.restored, gt, light, cfg.n_negatives, patch,
                                    mix_seed(cfg.seed, iter, slot));
                ldg = patch_contrast_loss(ps, st.head, cfg.tau, &g_query);
            }

            Tensor g_restored, g_flare;
            LossBreakdown parts = total_loss(out.restored, out.flare, gt, flare, ldg,
                                             weights, &g_restored, &g_flare);
            if (cfg.ldgm_enabled) {
                auto [qy, qx] = ps.query_coord;
                for (int c = 0; c < 3; ++c)
                    for (int y = 0; y < patch; ++y)
                        for (int x = 0; x < patch; ++x)
                            g_restored.at(c, qy + y, qx + x) += g_query.at(c, y, x);
            }

            const double inv_batch = 1.0 / cfg.batch_size;
            g_restored *= inv_batch;
            g_flare *= inv_batch;
            st.model.backward(cache, g_restored, g_flare);

            total += parts.total * inv_batch;
            perceptual += parts.perceptual * inv_batch;
            frequency += parts.frequency * inv_batch;
            ldg_sum += parts.ldg * inv_batch;
        }
        // The head only sees the contrastive term; average it over the batch.
        for (auto& p : head_params)
            for (size_t i = 0; i < p.n; ++i) p.grad[i] /= cfg.batch_size;

        if (!std::isfinite(total)) {
            st.iteration = iter - 1;
            st.rng_state = rng_to_string(rng);
            save_checkpoint(ckpt_path, st);
            throw std::runtime_error("train: non-finite loss at iteration " +
                                     std::to_string(iter) +
                                     "; last-good checkpoint saved to " + ckpt_path);
        }

        st.adam.step(params, lr);

        char line[256];
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", iter,
                      total, perceptual, frequency, ldg_sum, lr);
        log << line;

        if (iter == 1) result.first_loss = total;
        result.final_loss = total;
    }

    st.iteration = cfg.total_iters;
    st.rng_state = rng_to_string(rng);
    save_checkpoint(ckpt_path, st);
    log.close();
    return result;
}

namespace {

int reflect_index(int i, int n) {
    // Bounce i into [0, n-1] (mirror without repeating the edge sample).
    if (n == 1) return 0;
    int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

Tensor reflect_pad(const Tensor& t, int new_h, int new_w) {
    Tensor out(t.c, new_h, new_w);
    for (int c = 0; c < t.c; ++c)
        for (int y = 0; y < new_h; ++y)
            for (int x = 0; x < new_w; ++x)
                out.at(c, y, x) = t.at(c, reflect_index(y, t.h), reflect_index(x, t.w));
    return out;
}

nlohmann::json metric_or_null(const std::optional<double>& m) {
    if (m.has_value()) return *m;
    return nullptr;
}

}  // namespace

nlohmann::json evaluate(const std::string& ckpt_path, const std::string& data_dir,
                        const std::string& out_dir, const EvalOptions& opts) {
    TrainState st = load_checkpoint(ckpt_path);
    const int n = validate_dataset(data_dir);
    fs::create_directories(out_dir);
    if (opts.save_images) fs::create_directories(fs::path(out_dir) / "restored");

    const int divisor = st.model.cfg.divisor();
    std::map<std::pair<int, int>, Model> variants;

    nlohmann::json per_image = nlohmann::json::array();
    double sum_psnr = 0, sum_ssim = 0, sum_g = 0, sum_s = 0;
    int n_g = 0, n_s = 0, skipped_g = 0, skipped_s = 0;

    for (int i = 0; i < n; ++i) {
        LoadedSample ls = load_sample(data_dir, i);
        const int h = ls.input.h, w = ls.input.w;
        const int ph = (h + divisor - 1) / divisor * divisor;
        const int pw = (w + divisor - 1) / divisor * divisor;
        const bool padded = ph != h || pw != w;

        Tensor input = padded ? reflect_pad(ls.input, ph, pw) : ls.input;
        Model* model = &st.model;
        if (ph != st.model.height || pw != st.model.width) {
            auto key = std::make_pair(ph, pw);
            auto it = variants.find(key);
            if (it == variants.end())
                it = variants.emplace(key, st.model.resampled_for(ph, pw)).first;
            model = &it->second;
        }

        auto out = model->forward(input);
        Tensor restored = out.restored;
        if (padded) {
            Tensor cut(3, h, w);
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        cut.at(c, y, x) = out.restored.at(c, y, x);
            restored = std::move(cut);
        }
        restored = clamp01(restored);

        double p = psnr(restored, ls.gt);
        double s = ssim(restored, ls.gt);
        auto g_psnr = masked_psnr(restored, ls.gt, ls.mask_glare);
        auto s_psnr = masked_psnr(restored, ls.gt, ls.mask_streak);

        sum_psnr += p;
        sum_ssim += s;
        if (g_psnr) {
            sum_g += *g_psnr;
            ++n_g;
        } else {
            ++skipped_g;
        }
        if (s_psnr) {
            sum_s += *s_psnr;
            ++n_s;
        } else {
            ++skipped_s;
        }

        per_image.push_back({{"index", i},
                             {"psnr", p},
                             {"ssim", s},
                             {"g_psnr", metric_or_null(g_psnr)},
                             {"s_psnr", metric_or_null(s_psnr)},
                             {"padded", padded}});

        if (opts.save_images)
            write_png((fs::path(out_dir) / "restored" / sample_image_name(i)).string(),
                      restored);
    }

    nlohmann::json report;
    report["count"] = n;
    report["per_image"] = per_image;
    report["aggregate"] = {
        {"psnr", sum_psnr / n},
        {"ssim", sum_ssim / n},
        {"g_psnr", n_g > 0 ? nlohmann::json(sum_g / n_g) : nlohmann::json(nullptr)},
        {"s_psnr", n_s > 0 ? nlohmann::json(sum_s / n_s) : nlohmann::json(nullptr)},
    };
    report["skipped"] = {{"g_psnr", skipped_g}, {"s_psnr", skipped_s}};

    std::ofstream out(fs::path(out_dir) / "report.json");
    if (!out) throw std::runtime_error("evaluate: cannot write report.json");
    out << report.dump(2) << "\n";
    return report;
}

void synth_dataset(int n_samples, const std::string& out_dir, uint64_t seed,
                   int resolution) {
    if (n_samples < 1) throw std::invalid_argument("synth: need at least one sample");
    if (resolution < 8) throw std::invalid_argument("synth: resolution too small");
    for (int i = 0; i < n_samples; ++i) {
        Tensor scene = procedural_scene(mix_seed(seed, i, 0), resolution);
        FlareAsset asset = procedural_flare(mix_seed(seed, i, 1), resolution);
        CompositeSample sample = make_sample(scene, asset, mix_seed(seed, i, 2));
        write_sample(out_dir, i, sample);
    }
}

void spectrum_command(const std::string& image_path, const std::string& out_path) {
    Tensor img = read_png(image_path);
    write_png(out_path, spectrum_image(img));
}

}  // namespace deflare
