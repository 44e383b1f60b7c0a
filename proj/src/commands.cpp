#include "dnfs/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "dnfs/checkpoint.hpp"
#include "dnfs/loss.hpp"
#include "dnfs/pgm.hpp"

namespace dnfs {

void cmd_generate(const RunConfig& cfg) {
    validate_run_config(cfg);
    if (cfg.dataset_dir.empty())
        throw std::invalid_argument("generate: dataset_dir is required");
    GenerateOptions opts;
    opts.count = cfg.samples;
    opts.height = opts.width = cfg.image_size;
    opts.num_horizons = cfg.horizons;
    opts.thickness = cfg.thickness;
    opts.noise_level = cfg.noise_level;
    opts.fractions = {cfg.train_fraction, cfg.val_fraction, cfg.test_fraction};
    opts.seed = cfg.seed;
    write_dataset(cfg.dataset_dir, opts);
    std::cout << "generated " << opts.count << " samples (" << opts.height << "x" << opts.width
              << ", thickness " << opts.thickness << ") in " << cfg.dataset_dir << "\n";
}

TrainResult cmd_train(const RunConfig& cfg, const std::string& resume_path) {
    if (cfg.dataset_dir.empty()) throw std::invalid_argument("train: dataset_dir is required");
    const Dataset data = load_dataset(cfg.dataset_dir);
    TrainResult result = train_model(cfg, data, resume_path, &std::cout);
    std::cout << "wrote " << cfg.output_dir << "/metrics.csv";
    if (!result.best_checkpoint.empty())
        std::cout << ", best epoch " << result.best_epoch
                  << " (val_iou=" << format_metric(result.best_val_iou) << ")";
    std::cout << "\n";
    return result;
}

EvalResult cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                    const std::string& split) {
    if (cfg.dataset_dir.empty()) throw std::invalid_argument("eval: dataset_dir is required");
    RestoredRun run = restore_checkpoint(load_checkpoint(checkpoint_path));
    const Dataset data = load_dataset(cfg.dataset_dir);
    const auto samples = data.split(split);
    if (samples.empty()) throw std::invalid_argument("eval: split '" + split + "' is empty");
    const EvalResult r = evaluate_samples(run.net, samples, cfg);
    std::cout << "split=" << split << " n=" << r.sample_count << " iou=" << format_metric(r.iou)
              << " black_recall=" << format_metric(r.black_recall) << "\n";
    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        const auto path = std::filesystem::path(cfg.output_dir) / ("eval_" + split + ".csv");
        std::ofstream out(path);
        if (!out) throw std::runtime_error("eval: cannot write " + path.string());
        out << "split,n,iou,black_recall\n"
            << split << ',' << r.sample_count << ',' << format_metric(r.iou) << ','
            << format_metric(r.black_recall) << "\n";
    }
    return r;
}

void cmd_predict(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& image_path, const std::string& out_path) {
    RestoredRun run = restore_checkpoint(load_checkpoint(checkpoint_path));
    const GridF img = read_pgm(image_path);
    const int divisor = run.net.spatial_divisor;
    if (img.h % divisor != 0 || img.w % divisor != 0 || img.h == 0 || img.w == 0)
        throw std::invalid_argument(
            "predict: image size " + std::to_string(img.w) + "x" + std::to_string(img.h) +
            " is invalid: height and width must be positive multiples of " +
            std::to_string(divisor));

    Tensor input(1, 1, img.h, img.w);
    std::copy(img.v.begin(), img.v.end(), input.data.begin());
    const Tensor pred = forward(run.net, input);

    MaskGrid mask(img.h, img.w);
    for (std::size_t i = 0; i < pred.numel(); ++i)
        mask.v[i] = double(pred.data[i]) > cfg.threshold ? 1 : 0;
    write_mask_pgm(out_path, mask);
    std::cout << "wrote " << out_path << "\n";
}

std::int64_t cmd_count_params(const std::string& preset) {
    const ArchSpec spec = parse_preset(preset);
    const Network net = build_network<float>(spec);
    const std::int64_t count = count_parameters(net);
    std::cout << preset << " " << count << "\n";
    return count;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, std::vector<int> multipliers,
                                std::vector<double> psis) {
    validate_run_config(cfg);
    if (multipliers.empty() || psis.empty())
        throw std::invalid_argument("sweep: multiplier and psi lists must be non-empty");
    if (cfg.epochs < 1) throw std::invalid_argument("sweep: epochs must be >= 1");
    if (cfg.dataset_dir.empty()) throw std::invalid_argument("sweep: dataset_dir is required");
    if (cfg.output_dir.empty()) throw std::invalid_argument("sweep: output_dir is required");

    std::sort(multipliers.begin(), multipliers.end());
    std::sort(psis.begin(), psis.end());
    const Dataset data = load_dataset(cfg.dataset_dir);
    const std::string family = arch_family_name(parse_preset(cfg.arch).family);

    std::vector<SweepRow> rows;
    for (int m : multipliers)
        for (double psi : psis) {
            SweepRow row;
            row.arch = family;
            row.multiplier = m;
            row.psi = psi;
            RunConfig cell = cfg;
            cell.multiplier = m;
            cell.psi = psi;
            cell.output_dir = (std::filesystem::path(cfg.output_dir) / "cells" /
                               (family + "-m" + std::to_string(m) + "-psi" + format_metric(psi)))
                                  .string();
            try {
                row.params = count_parameters(build_network<float>(resolve_arch(cell)));
                const TrainResult r = train_model(cell, data);
                row.train_seconds = r.train_seconds;
                row.val_iou = r.history.back().val_iou;
                row.val_black_recall = r.history.back().val_black_recall;
            } catch (const std::exception& e) {
                row.failed = true;
                std::cerr << "sweep cell " << family << "-" << m << " psi=" << psi
                          << " failed: " << e.what() << "\n";
            }
            rows.push_back(row);
            std::cout << "sweep " << family << " m=" << m << " psi=" << format_metric(psi)
                      << (row.failed ? " failed" : " done") << "\n";
        }

    std::filesystem::create_directories(cfg.output_dir);
    const auto path = std::filesystem::path(cfg.output_dir) / "sweep.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("sweep: cannot write " + path.string());
    out << "arch,multiplier,psi,params,train_seconds,val_iou,val_black_recall\n";
    for (const auto& row : rows) {
        out << row.arch << ',' << row.multiplier << ',' << format_metric(row.psi) << ',';
        if (row.params >= 0) out << row.params;
        out << ',';
        char secs[32];
        std::snprintf(secs, sizeof secs, "%.3f", row.train_seconds);
        out << secs << ',';
        if (row.failed)
            out << "failed,failed\n";
        else
            out << format_metric(row.val_iou) << ',' << format_metric(row.val_black_recall)
                << "\n";
    }
    std::cout << "wrote " << path.string() << "\n";
    return rows;
}

}  // namespace dnfs
