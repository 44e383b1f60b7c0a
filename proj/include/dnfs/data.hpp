#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dnfs {

/// Integer facies labels on an (H, W) grid; labels increase downward.
struct FaciesLabelMap {
    int h = 0, w = 0;
    std::vector<int> labels;
    int num_facies = 0;

    int at(int r, int c) const { return labels[std::size_t(r) * w + c]; }
    int& at(int r, int c) { return labels[std::size_t(r) * w + c]; }
};

struct GridF {
    int h = 0, w = 0;
    std::vector<float> v;

    GridF() = default;
    GridF(int h_, int w_, float fill = 0.f) : h(h_), w(w_), v(std::size_t(h_) * w_, fill) {}
    float at(int r, int c) const { return v[std::size_t(r) * w + c]; }
    float& at(int r, int c) { return v[std::size_t(r) * w + c]; }
};

/// Binary grid; 1 = boundary (black), 0 = background (white).
struct MaskGrid {
    int h = 0, w = 0;
    std::vector<std::uint8_t> v;

    MaskGrid() = default;
    MaskGrid(int h_, int w_, std::uint8_t fill = 0) : h(h_), w(w_), v(std::size_t(h_) * w_, fill) {}
    std::uint8_t at(int r, int c) const { return v[std::size_t(r) * w + c]; }
    std::uint8_t& at(int r, int c) { return v[std::size_t(r) * w + c]; }
};

struct Sample {
    std::string id;
    GridF image;    // pseudo-seismic amplitudes in [0, 1]
    MaskGrid mask;  // facies-transition lines
};

struct SplitManifest {
    std::vector<std::string> train, val, test;
};

// Ricker wavelet constants for render_seismic.
constexpr double kRickerPeakFreq = 0.15;  // cycles per pixel
double ricker_wavelet(double t);
int ricker_half_width();

/// Layered geology: num_horizons non-crossing smooth horizon curves (random
/// low-order sums of sinusoids), clamped to preserve vertical order. Rows
/// between consecutive horizons share a facies label.
FaciesLabelMap generate_facies_model(int height, int width, int num_horizons, std::uint64_t seed);

/// A pixel is boundary iff any 4-neighbor carries a different label; the set
/// is then dilated by a square structuring element of the given thickness.
MaskGrid boundary_mask(const FaciesLabelMap& labels, int thickness);

/// Random per-facies reflectivity, column-wise Ricker convolution of the
/// vertical reflectivity derivative, Gaussian noise, min-max normalization to
/// [0, 1] (an all-constant response normalizes to 0.5).
GridF render_seismic(const FaciesLabelMap& labels, double noise_level, std::uint64_t seed);

/// Deterministic shuffle by seed, then a contiguous train/val/test partition;
/// val and test counts are rounded, train takes the remainder.
SplitManifest split_dataset(const std::vector<std::string>& ids,
                            const std::array<double, 3>& fractions, std::uint64_t seed);

struct GenerateOptions {
    int count = 200;
    int height = 64, width = 64;
    int num_horizons = 4;
    int thickness = 3;
    double noise_level = 0.05;
    std::array<double, 3> fractions = {0.8, 0.1, 0.1};
    std::uint64_t seed = 1;
};

Sample make_sample(const GenerateOptions& opts, std::uint64_t sample_seed, std::string id);

struct Dataset {
    std::vector<Sample> samples;  // manifest order: train, val, test
    SplitManifest manifest;

    const Sample& by_id(const std::string& id) const;
    std::vector<const Sample*> split(const std::string& name) const;
};

/// Writes images/<id>.pgm, masks/<id>.pgm and manifest.tsv under dir.
void write_dataset(const std::filesystem::path& dir, const GenerateOptions& opts);
Dataset load_dataset(const std::filesystem::path& dir);

void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
SplitManifest read_manifest(const std::filesystem::path& path);

}  // namespace dnfs
