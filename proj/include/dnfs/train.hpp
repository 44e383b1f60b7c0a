#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "dnfs/arch.hpp"
#include "dnfs/config.hpp"
#include "dnfs/data.hpp"
#include "dnfs/network.hpp"
#include "dnfs/optimizer.hpp"

namespace dnfs {

struct EpochRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_iou = 0.0;
    double val_black_recall = 0.0;
};

struct TrainResult {
    std::vector<EpochRow> history;
    std::filesystem::path last_checkpoint;
    std::filesystem::path best_checkpoint;
    int best_epoch = 0;
    double best_val_iou = -1.0;
    double train_seconds = 0.0;  // optimization loop only
};

struct EvalResult {
    double loss = 0.0;
    double iou = 0.0;
    double black_recall = 0.0;
    int sample_count = 0;
};

/// Resolves the architecture from the preset name plus the optional
/// multiplier override.
ArchSpec resolve_arch(const RunConfig& cfg);

/// Stacks samples into (B, 1, H, W) image and mask tensors.
Tensor batch_images(const std::vector<const Sample*>& samples, std::size_t from, std::size_t to);
Tensor batch_masks(const std::vector<const Sample*>& samples, std::size_t from, std::size_t to);

/// Composite loss plus mean per-sample metrics over a sample list (eval mode).
/// Samples whose target has no black pixels are excluded from the recall mean.
EvalResult evaluate_samples(const Network& net, const std::vector<const Sample*>& samples,
                            const RunConfig& cfg);

/// Runs the training loop: per-epoch metrics.csv rows, a checkpoint per epoch,
/// last.ckpt and the best-val-iou checkpoint as best.ckpt under output_dir.
/// A non-empty resume_path continues from that checkpoint (bit-exact with the
/// uninterrupted run). Progress lines go to log when given.
TrainResult train_model(const RunConfig& cfg, const Dataset& data,
                        const std::string& resume_path = "", std::ostream* log = nullptr);

/// Canonical CSV number formatting ("%.9g").
std::string format_metric(double v);

}  // namespace dnfs
