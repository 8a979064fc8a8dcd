#pragma once

#include <json.hpp>

#include "deflare/dataset.hpp"
#include "deflare/network.hpp"
#include "deflare/patch_contrast.hpp"

namespace deflare {

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.99;
    int batch_size = 2;
    int crop = 64;
    int total_iters = 500;
    std::vector<int> lr_halve_at;  // empty: milestones at 75% and 100% of budget
    uint64_t seed = 0;
    double alpha = 2.0, lambda = 1.0, tau = 0.07;
    bool ldgm_enabled = true;
    bool gdfg_enabled = true;
    int stages = 2, base_channels = 8, n_filters = 4, blocks_per_stage = 1;
    int n_negatives = 16;
    int proj_dim = 128;
    int patch_size = 0;  // 0: crop / 16, floored at 4

    void validate() const;
    NetworkConfig network() const;
    int effective_patch_size() const { return patch_size > 0 ? patch_size : std::max(4, crop / 16); }
    std::vector<int> milestones() const;

    // Flat key-value text document; '#' starts a comment; unknown keys are
    // errors. serialize() emits the canonical form embedded in checkpoints.
    static TrainConfig parse_text(const std::string& text);
    static TrainConfig parse_file(const std::string& path);
    std::string serialize() const;
};

struct Adam {
    double beta1 = 0.9, beta2 = 0.99, eps = 1e-8;
    int64_t t = 0;
    std::vector<std::vector<double>> m, v;

    void init(const ParamList& params);
    void step(const ParamList& params, double lr);
};

// Training state bundle; the checkpoint serializes all of it byte-stably.
struct TrainState {
    TrainConfig config;
    int64_t iteration = 0;
    Model model;
    ProjectionHead head;
    Adam adam;
    std::string rng_state;

    ParamList params();  // model followed by projection head, fixed order
};

void save_checkpoint(const std::string& path, TrainState& state);
TrainState load_checkpoint(const std::string& path);

struct TrainResult {
    std::string checkpoint_path;
    std::string log_path;
    double first_loss = 0.0;
    double final_loss = 0.0;
};

// Runs the optimization loop over a synthesized dataset directory, writing
// out_dir/loss_log.csv and out_dir/checkpoint.ckpt. Aborts on a non-finite
// loss after saving the last good state.
TrainResult train(const TrainConfig& cfg, const std::string& data_dir,
                  const std::string& out_dir);

struct EvalOptions {
    bool save_images = false;
};

// Evaluates a checkpoint over a dataset, writing out_dir/report.json with
// per-image and aggregate psnr/ssim/g_psnr/s_psnr plus skipped-mask counts.
// Inputs whose resolution is not divisible by 2^stages are padded
// reflectively and cropped back, which is recorded per image.
nlohmann::json evaluate(const std::string& ckpt_path, const std::string& data_dir,
                        const std::string& out_dir, const EvalOptions& opts = {});

// Writes n procedurally synthesized samples into the dataset layout.
void synth_dataset(int n_samples, const std::string& out_dir, uint64_t seed,
                   int resolution);

// Reads an image, writes its centered log-amplitude spectrum as 8-bit gray.
void spectrum_command(const std::string& image_path, const std::string& out_path);

}  // namespace deflare
