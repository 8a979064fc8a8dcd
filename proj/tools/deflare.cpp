#include <CLI11.hpp>

#include <iostream>

#include "deflare/trainer.hpp"

int main(int argc, char** argv) {
    CLI::App app{"deflare: train and evaluate a frequency-guided flare removal network"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "Synthesize a paired flare dataset");
    int n = 16;
    std::string synth_out;
    uint64_t synth_seed = 0;
    int size = 64;
    synth->add_option("--n", n, "Number of samples")->required();
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--seed", synth_seed, "Base seed");
    synth->add_option("--size", size, "Image resolution");

    auto* train_cmd = app.add_subcommand("train", "Train on a synthesized dataset");
    std::string config_path, train_data, train_out;
    train_cmd->add_option("--config", config_path, "Key-value config file");
    train_cmd->add_option("--data", train_data, "Dataset directory")->required();
    train_cmd->add_option("--out", train_out, "Output directory")->required();

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string ckpt, eval_data, eval_out;
    bool save_images = false;
    eval_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
    eval_cmd->add_option("--out", eval_out, "Report directory")->required();
    eval_cmd->add_flag("--save-images", save_images, "Write restored PNGs");

    auto* spectrum = app.add_subcommand("spectrum", "Write an image's log spectrum");
    std::string spec_in, spec_out;
    spectrum->add_option("--in", spec_in, "Input PNG")->required();
    spectrum->add_option("--out", spec_out, "Output grayscale PNG")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            deflare::synth_dataset(n, synth_out, synth_seed, size);
            std::cout << "wrote " << n << " samples to " << synth_out << "\n";
        } else if (train_cmd->parsed()) {
            deflare::TrainConfig cfg;
            if (!config_path.empty()) cfg = deflare::TrainConfig::parse_file(config_path);
            auto result = deflare::train(cfg, train_data, train_out);
            std::cout << "checkpoint: " << result.checkpoint_path << "\n"
                      << "loss log:   " << result.log_path << "\n"
                      << "loss " << result.first_loss << " -> " << result.final_loss
                      << "\n";
        } else if (eval_cmd->parsed()) {
            auto report = deflare::evaluate(ckpt, eval_data, eval_out, {save_images});
            std::cout << report["aggregate"].dump(2) << "\n"
                      << "report: " << eval_out << "/report.json\n";
        } else if (spectrum->parsed()) {
            deflare::spectrum_command(spec_in, spec_out);
            std::cout << "wrote " << spec_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
