#include "dnfs/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

namespace dnfs {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_num(const std::string& key, const std::string& value, T (*conv)(const std::string&)) {
    try {
        return conv(value);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' has unparsable value '" + value +
                                    "'");
    }
}

int to_int(const std::string& s) { return std::stoi(s); }
double to_double(const std::string& s) { return std::stod(s); }
std::uint64_t to_u64(const std::string& s) { return std::stoull(s); }

}  // namespace

void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "arch")
        cfg.arch = value;
    else if (key == "multiplier")
        cfg.multiplier = parse_num(key, value, to_int);
    else if (key == "psi")
        cfg.psi = parse_num(key, value, to_double);
    else if (key == "smooth_eps")
        cfg.smooth_eps = parse_num(key, value, to_double);
    else if (key == "threshold")
        cfg.threshold = parse_num(key, value, to_double);
    else if (key == "learning_rate")
        cfg.learning_rate = parse_num(key, value, to_double);
    else if (key == "batch_size")
        cfg.batch_size = parse_num(key, value, to_int);
    else if (key == "epochs")
        cfg.epochs = parse_num(key, value, to_int);
    else if (key == "seed")
        cfg.seed = parse_num(key, value, to_u64);
    else if (key == "dataset_dir")
        cfg.dataset_dir = value;
    else if (key == "output_dir")
        cfg.output_dir = value;
    else if (key == "image_size")
        cfg.image_size = parse_num(key, value, to_int);
    else if (key == "thickness")
        cfg.thickness = parse_num(key, value, to_int);
    else if (key == "samples")
        cfg.samples = parse_num(key, value, to_int);
    else if (key == "horizons")
        cfg.horizons = parse_num(key, value, to_int);
    else if (key == "noise_level")
        cfg.noise_level = parse_num(key, value, to_double);
    else if (key == "train_fraction")
        cfg.train_fraction = parse_num(key, value, to_double);
    else if (key == "val_fraction")
        cfg.val_fraction = parse_num(key, value, to_double);
    else if (key == "test_fraction")
        cfg.test_fraction = parse_num(key, value, to_double);
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                        ": expected 'key = value'");
        apply_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void validate_run_config(const RunConfig& cfg) {
    auto reject = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (cfg.multiplier < 0) reject("multiplier must be >= 0");
    if (!(cfg.psi >= 0.0 && cfg.psi <= 1.0)) reject("psi must be in [0, 1]");
    if (!(cfg.smooth_eps > 0.0)) reject("smooth_eps must be positive");
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) reject("threshold must be in (0, 1)");
    if (!(cfg.learning_rate > 0.0)) reject("learning_rate must be positive");
    if (cfg.batch_size < 1) reject("batch_size must be >= 1");
    if (cfg.epochs < 0) reject("epochs must be >= 0");
    if (cfg.image_size < 16) reject("image_size must be >= 16");
    if (cfg.thickness < 1) reject("thickness must be >= 1");
    if (cfg.samples < 3) reject("samples must be >= 3");
    if (cfg.horizons < 1) reject("horizons must be >= 1");
    if (cfg.noise_level < 0.0) reject("noise_level must be >= 0");
    for (double f : {cfg.train_fraction, cfg.val_fraction, cfg.test_fraction})
        if (!(f > 0.0)) reject("split fractions must be positive");
}

std::vector<std::string> config_key_help() {
    return {
        "arch = dnfs-4            architecture preset (dnfs-<m> or unet-like-<m>)",
        "multiplier = 0           override the preset filter multiplier (0 = keep preset)",
        "psi = 0.5                cross-entropy weight in the composite loss, in [0, 1]",
        "smooth_eps = 1.0         soft-Jaccard smoothing constant",
        "threshold = 0.5          binarization threshold for metrics and prediction",
        "learning_rate = 0.001    Adam learning rate",
        "batch_size = 8",
        "epochs = 20",
        "seed = 1                 64-bit seed; fixes data order and initialization",
        "dataset_dir =            dataset directory (images/, masks/, manifest.tsv)",
        "output_dir =             run output directory (metrics.csv, checkpoints)",
        "image_size = 64          generated image height and width",
        "thickness = 3            boundary line thickness in generated masks",
        "samples = 200            number of generated samples",
        "horizons = 4             horizon curves per generated sample",
        "noise_level = 0.05       Gaussian noise level in generated images",
        "train_fraction = 0.8",
        "val_fraction = 0.1",
        "test_fraction = 0.1",
    };
}

}  // namespace dnfs
