#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dnfs {

/// One training/evaluation run is fully determined by this config plus the
/// dataset. File format: `key = value` lines with `#` comments; CLI flags
/// override file values; every key has the default shown here.
struct RunConfig {
    std::string arch = "dnfs-4";   // architecture preset
    int multiplier = 0;            // overrides the preset multiplier when > 0
    double psi = 0.5;              // cross-entropy weight in the composite loss
    double smooth_eps = 1.0;       // soft-Jaccard smoothing constant
    double threshold = 0.5;        // binarization threshold for metrics
    double learning_rate = 1e-3;
    int batch_size = 8;
    int epochs = 20;
    std::uint64_t seed = 1;
    std::string dataset_dir;
    std::string output_dir;
    // Generation-only knobs.
    int image_size = 64;
    int thickness = 3;
    int samples = 200;
    int horizons = 4;
    double noise_level = 0.05;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
};

/// Applies one key/value pair; throws on unknown keys or unparsable values.
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Loads `key = value` lines from a config file into cfg.
void load_config_file(RunConfig& cfg, const std::string& path);

void validate_run_config(const RunConfig& cfg);

/// Key/default/description table, for --help and the README.
std::vector<std::string> config_key_help();

}  // namespace dnfs
