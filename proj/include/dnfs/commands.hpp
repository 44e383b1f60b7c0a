#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dnfs/config.hpp"
#include "dnfs/train.hpp"

namespace dnfs {

/// Command implementations behind the CLI. All throw on error; the CLI layer
/// turns exceptions into a nonzero exit with an "error:" prefix.

/// Writes a synthetic dataset (images/, masks/, manifest.tsv) to dataset_dir.
void cmd_generate(const RunConfig& cfg);

/// Trains per cfg; optional resume from a checkpoint path.
TrainResult cmd_train(const RunConfig& cfg, const std::string& resume_path = "");

/// Evaluates a checkpoint on one split; prints and writes eval_<split>.csv.
EvalResult cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                    const std::string& split);

/// Predicts one image and writes the thresholded mask PGM.
void cmd_predict(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& image_path, const std::string& out_path);

/// Prints and returns the exact parameter count of a preset.
std::int64_t cmd_count_params(const std::string& preset);

struct SweepRow {
    std::string arch;
    int multiplier = 0;
    double psi = 0.0;
    std::int64_t params = -1;  // -1 when the cell failed before construction
    double train_seconds = 0.0;
    bool failed = false;
    double val_iou = 0.0;
    double val_black_recall = 0.0;
};

/// Trains every multiplier x psi combination at the config's scale and writes
/// sweep.csv; failed cells are recorded and the sweep continues.
std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, std::vector<int> multipliers,
                                std::vector<double> psis);

}  // namespace dnfs
