#include "dnfs/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "dnfs/pgm.hpp"
#include "dnfs/rng.hpp"

namespace dnfs {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kDepthMargin = 2;  // horizons stay this many rows away from the borders

// Independent sub-streams drawn from one dataset seed.
constexpr std::uint64_t kLabelStream = 0x4C414245ull;
constexpr std::uint64_t kRenderStream = 0x52454E44ull;
constexpr std::uint64_t kSplitStream = 0x53504C49ull;

}  // namespace

double ricker_wavelet(double t) {
    const double a = kPi * kRickerPeakFreq * t;
    return (1.0 - 2.0 * a * a) * std::exp(-a * a);
}

int ricker_half_width() {
    // exp(-(pi f t)^2) is below ~1e-4 past 3/(pi f).
    return int(std::ceil(3.0 / (kPi * kRickerPeakFreq)));
}

FaciesLabelMap generate_facies_model(int height, int width, int num_horizons,
                                     std::uint64_t seed) {
    if (num_horizons < 1)
        throw std::invalid_argument("generate_facies_model: need at least one horizon");
    if (height < 16 || width < 16)
        throw std::invalid_argument("generate_facies_model: dims must be at least 16, got " +
                                    std::to_string(height) + "x" + std::to_string(width));

    SplitMix64 rng(seed);
    const double usable = double(height - 2 * kDepthMargin);
    const double spacing = usable / double(num_horizons + 1);

    // Each horizon: jittered base depth plus a low-order sum of sinusoids.
    std::vector<std::vector<double>> curves(num_horizons, std::vector<double>(width));
    for (int hz = 0; hz < num_horizons; ++hz) {
        const double base =
            kDepthMargin + spacing * (hz + 1) + rng.uniform(-0.4, 0.4) * spacing;
        double amp[3], phase[3];
        for (int k = 0; k < 3; ++k) {
            amp[k] = rng.uniform(0.0, 0.45 * spacing) / double(k + 1);
            phase[k] = rng.uniform(0.0, 2.0 * kPi);
        }
        for (int x = 0; x < width; ++x) {
            double y = base;
            for (int k = 0; k < 3; ++k)
                y += amp[k] * std::sin(2.0 * kPi * (k + 1) * x / double(width) + phase[k]);
            curves[hz][x] = y;
        }
    }

    // Clamp into the frame and force vertical order column by column.
    const double lo = kDepthMargin, hi = double(height - 1 - kDepthMargin);
    for (int x = 0; x < width; ++x) {
        double prev = lo;
        for (int hz = 0; hz < num_horizons; ++hz) {
            double y = std::clamp(curves[hz][x], lo, hi);
            y = std::max(y, prev);
            curves[hz][x] = y;
            prev = y;
        }
    }

    FaciesLabelMap map;
    map.h = height;
    map.w = width;
    map.num_facies = num_horizons + 1;
    map.labels.resize(std::size_t(height) * width);
    for (int x = 0; x < width; ++x)
        for (int r = 0; r < height; ++r) {
            int label = 0;
            for (int hz = 0; hz < num_horizons; ++hz)
                if (curves[hz][x] <= double(r)) ++label;
            map.at(r, x) = label;
        }
    return map;
}

MaskGrid boundary_mask(const FaciesLabelMap& labels, int thickness) {
    if (thickness < 1) throw std::invalid_argument("boundary_mask: thickness must be >= 1");
    const int h = labels.h, w = labels.w;
    MaskGrid raw(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const int v = labels.at(r, c);
            const bool edge = (r > 0 && labels.at(r - 1, c) != v) ||
                              (r + 1 < h && labels.at(r + 1, c) != v) ||
                              (c > 0 && labels.at(r, c - 1) != v) ||
                              (c + 1 < w && labels.at(r, c + 1) != v);
            raw.at(r, c) = edge ? 1 : 0;
        }
    if (thickness == 1) return raw;

    // Square structuring element; offsets grow as -(t-1)/2 .. t/2 so masks
    // nest as thickness increases.
    const int lo = -(thickness - 1) / 2, hi = thickness / 2;
    MaskGrid out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!raw.at(r, c)) continue;
            for (int dr = lo; dr <= hi; ++dr)
                for (int dc = lo; dc <= hi; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr >= 0 && rr < h && cc >= 0 && cc < w) out.at(rr, cc) = 1;
                }
        }
    return out;
}

GridF render_seismic(const FaciesLabelMap& labels, double noise_level, std::uint64_t seed) {
    if (noise_level < 0.0)
        throw std::invalid_argument("render_seismic: noise_level must be >= 0");
    SplitMix64 rng(seed);

    // Per-facies reflectivity; adjacent facies are kept well separated so
    // every transition produces a visible reflector.
    std::vector<double> reflectivity(std::size_t(labels.num_facies));
    for (std::size_t f = 0; f < reflectivity.size(); ++f) {
        double r = rng.uniform();
        if (f > 0) {
            int tries = 0;
            while (std::abs(r - reflectivity[f - 1]) < 0.25 && ++tries < 64) r = rng.uniform();
            if (std::abs(r - reflectivity[f - 1]) < 0.25)
                r = reflectivity[f - 1] >= 0.5 ? reflectivity[f - 1] - 0.3
                                               : reflectivity[f - 1] + 0.3;
        }
        reflectivity[f] = r;
    }

    const int h = labels.h, w = labels.w;
    const int hw = ricker_half_width();
    GridF img(h, w);
    std::vector<double> response(std::size_t(h) * w, 0.0);
    std::vector<double> deriv(std::size_t(h), 0.0);
    for (int x = 0; x < w; ++x) {
        deriv[0] = 0.0;
        for (int y = 1; y < h; ++y)
            deriv[y] = reflectivity[std::size_t(labels.at(y, x))] -
                       reflectivity[std::size_t(labels.at(y - 1, x))];
        for (int y = 0; y < h; ++y) {
            double acc = 0.0;
            for (int t = -hw; t <= hw; ++t) {
                const int src = y - t;
                if (src < 0 || src >= h) continue;
                acc += ricker_wavelet(double(t)) * deriv[std::size_t(src)];
            }
            response[std::size_t(y) * w + x] = acc;
        }
    }
    if (noise_level > 0.0)
        for (double& v : response) v += noise_level * rng.normal();

    double lo = response[0], hi = response[0];
    for (double v : response) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo < 1e-12) {
        for (float& v : img.v) v = 0.5f;
    } else {
        for (std::size_t i = 0; i < response.size(); ++i)
            img.v[i] = float((response[i] - lo) / (hi - lo));
    }
    return img;
}

SplitManifest split_dataset(const std::vector<std::string>& ids,
                            const std::array<double, 3>& fractions, std::uint64_t seed) {
    for (double f : fractions)
        if (!(f > 0.0)) throw std::invalid_argument("split_dataset: fractions must be positive");
    if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
        throw std::invalid_argument("split_dataset: fractions must sum to 1");
    if (ids.size() < 3)
        throw std::invalid_argument("split_dataset: need at least 3 samples, got " +
                                    std::to_string(ids.size()));

    std::vector<std::string> shuffled = ids;
    SplitMix64 rng(seed);
    deterministic_shuffle(shuffled.begin(), shuffled.end(), rng);

    const auto n = long(shuffled.size());
    const long n_val = std::lround(double(n) * fractions[1]);
    const long n_test = std::lround(double(n) * fractions[2]);
    const long n_train = n - n_val - n_test;
    if (n_train < 0) throw std::invalid_argument("split_dataset: rounded counts exceed samples");

    SplitManifest m;
    m.train.assign(shuffled.begin(), shuffled.begin() + n_train);
    m.val.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
    m.test.assign(shuffled.begin() + n_train + n_val, shuffled.end());
    return m;
}

Sample make_sample(const GenerateOptions& opts, std::uint64_t sample_seed, std::string id) {
    Sample s;
    s.id = std::move(id);
    const FaciesLabelMap labels = generate_facies_model(
        opts.height, opts.width, opts.num_horizons, mix_seed(sample_seed, kLabelStream));
    s.mask = boundary_mask(labels, opts.thickness);
    s.image = render_seismic(labels, opts.noise_level, mix_seed(sample_seed, kRenderStream));
    return s;
}

const Sample& Dataset::by_id(const std::string& id) const {
    for (const Sample& s : samples)
        if (s.id == id) return s;
    throw std::runtime_error("dataset: no sample with id '" + id + "'");
}

std::vector<const Sample*> Dataset::split(const std::string& name) const {
    const std::vector<std::string>* ids = nullptr;
    if (name == "train")
        ids = &manifest.train;
    else if (name == "val")
        ids = &manifest.val;
    else if (name == "test")
        ids = &manifest.test;
    else
        throw std::invalid_argument("dataset: unknown split '" + name +
                                    "' (expected train, val or test)");
    std::vector<const Sample*> out;
    out.reserve(ids->size());
    for (const auto& id : *ids) out.push_back(&by_id(id));
    return out;
}

void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot open " + path.string());
    for (const auto& id : manifest.train) out << "train\t" << id << "\n";
    for (const auto& id : manifest.val) out << "val\t" << id << "\n";
    for (const auto& id : manifest.test) out << "test\t" << id << "\n";
    if (!out) throw std::runtime_error("manifest: write failed for " + path.string());
}

SplitManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path.string());
    SplitManifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("manifest: malformed line '" + line + "' in " +
                                     path.string());
        const std::string split = line.substr(0, tab), id = line.substr(tab + 1);
        if (split == "train")
            m.train.push_back(id);
        else if (split == "val")
            m.val.push_back(id);
        else if (split == "test")
            m.test.push_back(id);
        else
            throw std::runtime_error("manifest: unknown split '" + split + "' in " +
                                     path.string());
    }
    return m;
}

void write_dataset(const std::filesystem::path& dir, const GenerateOptions& opts) {
    if (opts.count < 3)
        throw std::invalid_argument("write_dataset: need at least 3 samples for a split");
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "masks");

    std::vector<std::string> ids;
    ids.reserve(std::size_t(opts.count));
    for (int i = 0; i < opts.count; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "s%04d", i);
        ids.emplace_back(buf);
    }
    for (int i = 0; i < opts.count; ++i) {
        const Sample s = make_sample(opts, mix_seed(opts.seed, std::uint64_t(i)), ids[std::size_t(i)]);
        write_pgm(dir / "images" / (s.id + ".pgm"), s.image);
        write_mask_pgm(dir / "masks" / (s.id + ".pgm"), s.mask);
    }
    const SplitManifest manifest =
        split_dataset(ids, opts.fractions, mix_seed(opts.seed, kSplitStream));
    write_manifest(dir / "manifest.tsv", manifest);
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset d;
    d.manifest = read_manifest(dir / "manifest.tsv");
    auto load_one = [&](const std::string& id) {
        Sample s;
        s.id = id;
        s.image = read_pgm(dir / "images" / (id + ".pgm"));
        s.mask = read_mask_pgm(dir / "masks" / (id + ".pgm"));
        if (s.image.h != s.mask.h || s.image.w != s.mask.w)
            throw std::runtime_error("dataset: image/mask size mismatch for id '" + id + "'");
        d.samples.push_back(std::move(s));
    };
    for (const auto& id : d.manifest.train) load_one(id);
    for (const auto& id : d.manifest.val) load_one(id);
    for (const auto& id : d.manifest.test) load_one(id);
    if (d.samples.empty()) throw std::runtime_error("dataset: empty manifest in " + dir.string());
    return d;
}

}  // namespace dnfs
