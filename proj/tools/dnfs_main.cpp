#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dnfs/commands.hpp"

namespace {

// Config file first, CLI flags second, so flags override file values.
void preload_config(int argc, char** argv, dnfs::RunConfig& cfg) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") dnfs::load_config_file(cfg, argv[i + 1]);
}

void add_common_options(CLI::App* cmd, dnfs::RunConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "config file with key = value lines");
    cmd->add_option("--arch", cfg.arch, "architecture preset, e.g. dnfs-4 or unet-like-8");
    cmd->add_option("--multiplier", cfg.multiplier, "override the preset filter multiplier");
    cmd->add_option("--psi", cfg.psi, "cross-entropy weight in the composite loss");
    cmd->add_option("--smooth-eps", cfg.smooth_eps, "soft-Jaccard smoothing constant");
    cmd->add_option("--threshold", cfg.threshold, "binarization threshold");
    cmd->add_option("--learning-rate", cfg.learning_rate, "Adam learning rate");
    cmd->add_option("--batch-size", cfg.batch_size, "training batch size");
    cmd->add_option("--epochs", cfg.epochs, "number of training epochs");
    cmd->add_option("--seed", cfg.seed, "64-bit seed");
    cmd->add_option("--dataset-dir", cfg.dataset_dir, "dataset directory");
    cmd->add_option("--output-dir", cfg.output_dir, "run output directory");
}

}  // namespace

int main(int argc, char** argv) {
    dnfs::RunConfig cfg;
    try {
        preload_config(argc, argv, cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    CLI::App app{"Training and evaluation engine for binary seismic-facies "
                 "boundary segmentation"};
    app.require_subcommand(1);
    app.failure_message([](const CLI::App*, const CLI::Error& e) {
        return "error: " + std::string(e.what()) + "\n";
    });
    std::string config_path, resume, checkpoint, split = "val", image_path, out_path, preset;
    std::vector<int> multipliers{1, 2};
    std::vector<double> psis{0.3, 0.7};

    auto* gen = app.add_subcommand("generate", "generate a synthetic facies dataset");
    add_common_options(gen, cfg, config_path);
    gen->add_option("--samples", cfg.samples, "number of samples");
    gen->add_option("--image-size", cfg.image_size, "image height and width");
    gen->add_option("--horizons", cfg.horizons, "horizon curves per sample");
    gen->add_option("--thickness", cfg.thickness, "boundary line thickness in pixels");
    gen->add_option("--noise-level", cfg.noise_level, "Gaussian noise level");
    gen->add_option("--train-fraction", cfg.train_fraction, "train split fraction");
    gen->add_option("--val-fraction", cfg.val_fraction, "val split fraction");
    gen->add_option("--test-fraction", cfg.test_fraction, "test split fraction");

    auto* train = app.add_subcommand("train", "train a network on a generated dataset");
    add_common_options(train, cfg, config_path);
    train->add_option("--resume", resume, "checkpoint to resume from");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    add_common_options(eval, cfg, config_path);
    eval->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
    eval->add_option("--split", split, "train, val or test");

    auto* predict = app.add_subcommand("predict", "predict the boundary mask of one image");
    add_common_options(predict, cfg, config_path);
    predict->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
    predict->add_option("--image", image_path, "input image (PGM)")->required();
    predict->add_option("--output", out_path, "output mask path (PGM)")->required();

    auto* count = app.add_subcommand("count-params", "print the parameter count of a preset");
    count->add_option("preset", preset, "architecture preset, e.g. dnfs-8")->required();

    auto* sweep = app.add_subcommand("sweep", "train a multiplier x psi grid");
    add_common_options(sweep, cfg, config_path);
    sweep->add_option("--multipliers", multipliers, "multiplier list")->delimiter(',');
    sweep->add_option("--psis", psis, "psi list")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            dnfs::cmd_generate(cfg);
        } else if (train->parsed()) {
            dnfs::cmd_train(cfg, resume);
        } else if (eval->parsed()) {
            dnfs::cmd_eval(cfg, checkpoint, split);
        } else if (predict->parsed()) {
            dnfs::cmd_predict(cfg, checkpoint, image_path, out_path);
        } else if (count->parsed()) {
            dnfs::cmd_count_params(preset);
        } else if (sweep->parsed()) {
            dnfs::cmd_sweep(cfg, multipliers, psis);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
