#include "dnfs/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "dnfs/checkpoint.hpp"
#include "dnfs/loss.hpp"
#include "dnfs/rng.hpp"

namespace dnfs {

namespace {

constexpr float kClampEps = 1e-7f;
constexpr std::uint64_t kShuffleStream = 0x53485546ull;  // epoch shuffles

LossConfig loss_config_of(const RunConfig& cfg) {
    return LossConfig{cfg.psi, cfg.smooth_eps, cfg.threshold};
}

std::string epoch_checkpoint_name(int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04d.ckpt", epoch);
    return buf;
}

// Pulls one sample's prediction row out of a batch as a (1, 1, H, W) tensor.
Tensor slice_sample(const Tensor& batch, int index) {
    Tensor out(1, 1, batch.h, batch.w);
    const std::size_t stride = std::size_t(batch.c) * batch.h * batch.w;
    std::copy(batch.data.begin() + std::ptrdiff_t(stride) * index,
              batch.data.begin() + std::ptrdiff_t(stride) * (index + 1), out.data.begin());
    return out;
}

}  // namespace

std::string format_metric(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

ArchSpec resolve_arch(const RunConfig& cfg) {
    ArchSpec spec = parse_preset(cfg.arch);
    if (cfg.multiplier > 0) spec.multiplier = cfg.multiplier;
    return spec;
}

Tensor batch_images(const std::vector<const Sample*>& samples, std::size_t from, std::size_t to) {
    if (from >= to || to > samples.size())
        throw std::invalid_argument("batch_images: bad range");
    const int h = samples[from]->image.h, w = samples[from]->image.w;
    Tensor t(int(to - from), 1, h, w);
    for (std::size_t s = from; s < to; ++s) {
        const GridF& img = samples[s]->image;
        if (img.h != h || img.w != w)
            throw std::invalid_argument("batch_images: sample '" + samples[s]->id +
                                        "' has mismatched size");
        std::copy(img.v.begin(), img.v.end(),
                  t.data.begin() + std::ptrdiff_t((s - from) * img.v.size()));
    }
    return t;
}

Tensor batch_masks(const std::vector<const Sample*>& samples, std::size_t from, std::size_t to) {
    if (from >= to || to > samples.size()) throw std::invalid_argument("batch_masks: bad range");
    const int h = samples[from]->mask.h, w = samples[from]->mask.w;
    Tensor t(int(to - from), 1, h, w);
    std::size_t o = 0;
    for (std::size_t s = from; s < to; ++s) {
        const MaskGrid& m = samples[s]->mask;
        if (m.h != h || m.w != w)
            throw std::invalid_argument("batch_masks: sample '" + samples[s]->id +
                                        "' has mismatched size");
        for (std::uint8_t b : m.v) t.data[o++] = b ? 1.f : 0.f;
    }
    return t;
}

EvalResult evaluate_samples(const Network& net, const std::vector<const Sample*>& samples,
                            const RunConfig& cfg) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty sample list");
    const LossConfig loss_cfg = loss_config_of(cfg);
    EvalResult r;
    r.sample_count = int(samples.size());
    double loss_sum = 0.0, iou_sum = 0.0, recall_sum = 0.0;
    int recall_defined = 0;
    const std::size_t batch = std::size_t(std::max(cfg.batch_size, 1));
    for (std::size_t from = 0; from < samples.size(); from += batch) {
        const std::size_t to = std::min(from + batch, samples.size());
        const Tensor input = batch_images(samples, from, to);
        const Tensor target = batch_masks(samples, from, to);
        const Tensor pred = clamp_probabilities(forward(net, input), kClampEps);
        loss_sum += composite_loss(pred, target, loss_cfg).value * double(to - from);
        for (std::size_t s = from; s < to; ++s) {
            const Tensor p = slice_sample(pred, int(s - from));
            const Tensor y = slice_sample(target, int(s - from));
            iou_sum += iou_metric(p, y, cfg.threshold);
            bool has_black = false;
            for (float v : y.data)
                if (v == 1.f) {
                    has_black = true;
                    break;
                }
            if (has_black) {
                recall_sum += black_pixel_correctness(p, y, cfg.threshold);
                ++recall_defined;
            }
        }
    }
    r.loss = loss_sum / double(samples.size());
    r.iou = iou_sum / double(samples.size());
    r.black_recall = recall_defined > 0 ? recall_sum / double(recall_defined) : 0.0;
    return r;
}

TrainResult train_model(const RunConfig& cfg, const Dataset& data,
                        const std::string& resume_path, std::ostream* log) {
    validate_run_config(cfg);
    if (cfg.output_dir.empty()) throw std::invalid_argument("train: output_dir is required");
    if (data.manifest.train.empty() || data.manifest.val.empty())
        throw std::invalid_argument("train: dataset needs non-empty train and val splits");

    const ArchSpec arch = resolve_arch(cfg);
    Network net;
    OptimizerState state;
    std::uint64_t seed = cfg.seed;
    int start_epoch = 0;

    if (!resume_path.empty()) {
        RestoredRun run = restore_checkpoint(load_checkpoint(resume_path));
        // Resume keeps the checkpoint's seed and optimizer hyperparameters so
        // the continued run is bit-identical to an uninterrupted one.
        if (arch_spec_to_string(run.arch) != arch_spec_to_string(arch))
            throw std::invalid_argument("train: checkpoint architecture " +
                                        arch_spec_to_string(run.arch) +
                                        " does not match configured " +
                                        arch_spec_to_string(arch));
        net = std::move(run.net);
        state = std::move(run.state);
        seed = run.seed;
        start_epoch = int(run.epoch);
    } else {
        net = build_network<float>(arch);
        init_parameters(net, seed);
        AdamConfig<float> adam;
        adam.learning_rate = float(cfg.learning_rate);
        state = OptimizerState::zeros_like(net, adam);
    }

    const std::filesystem::path out_dir(cfg.output_dir);
    std::filesystem::create_directories(out_dir);
    std::ofstream metrics(out_dir / "metrics.csv");
    if (!metrics) throw std::runtime_error("train: cannot write " + (out_dir / "metrics.csv").string());
    metrics << "epoch,train_loss,val_loss,val_iou,val_black_recall\n";
    metrics.flush();

    const std::vector<const Sample*> train_samples = data.split("train");
    const std::vector<const Sample*> val_samples = data.split("val");
    const LossConfig loss_cfg = loss_config_of(cfg);

    TrainResult result;
    auto write_ckpt = [&](int epoch) {
        const Checkpoint ckpt = make_checkpoint(net, state, arch, std::uint32_t(epoch), seed);
        const std::filesystem::path epoch_path = out_dir / epoch_checkpoint_name(epoch);
        save_checkpoint(epoch_path, ckpt);
        std::filesystem::copy_file(epoch_path, out_dir / "last.ckpt",
                                   std::filesystem::copy_options::overwrite_existing);
        result.last_checkpoint = out_dir / "last.ckpt";
        return epoch_path;
    };

    if (start_epoch >= cfg.epochs) {
        write_ckpt(start_epoch);
        return result;
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::int64_t step = 0;
    for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<const Sample*> order = train_samples;
        SplitMix64 shuffle_rng(mix_seed(seed, kShuffleStream + std::uint64_t(epoch)));
        deterministic_shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        const std::size_t batch = std::size_t(cfg.batch_size);
        for (std::size_t from = 0; from < order.size(); from += batch) {
            const std::size_t to = std::min(from + batch, order.size());
            ++step;
            try {
                const Tensor input = batch_images(order, from, to);
                const Tensor target = batch_masks(order, from, to);
                ForwardCache<float> cache;
                const Tensor raw = forward(net, input, &cache);
                const Tensor pred = clamp_probabilities(raw, kClampEps);
                LossResult<float> loss = composite_loss(pred, target, loss_cfg);
                if (!std::isfinite(loss.value))
                    throw std::invalid_argument("non-finite loss");
                zero_clamped_gradient(raw, kClampEps, loss.grad);
                backward(net, cache, loss.grad);
                optimizer_step(net, state);
                loss_sum += loss.value * double(to - from);
            } catch (const std::invalid_argument& e) {
                // diverged runs surface here as non-finite activations or loss
                throw std::runtime_error("train: aborted at epoch " + std::to_string(epoch) +
                                         ", step " + std::to_string(step) + ": " + e.what());
            }
        }

        EpochRow row;
        row.epoch = epoch;
        row.train_loss = loss_sum / double(order.size());
        const EvalResult val = evaluate_samples(net, val_samples, cfg);
        row.val_loss = val.loss;
        row.val_iou = val.iou;
        row.val_black_recall = val.black_recall;
        result.history.push_back(row);

        metrics << row.epoch << ',' << format_metric(row.train_loss) << ','
                << format_metric(row.val_loss) << ',' << format_metric(row.val_iou) << ','
                << format_metric(row.val_black_recall) << '\n';
        metrics.flush();
        if (log)
            (*log) << "epoch " << row.epoch << " train_loss=" << format_metric(row.train_loss)
                   << " val_loss=" << format_metric(row.val_loss)
                   << " val_iou=" << format_metric(row.val_iou)
                   << " val_black_recall=" << format_metric(row.val_black_recall) << "\n";

        const std::filesystem::path epoch_path = write_ckpt(epoch);
        if (row.val_iou > result.best_val_iou) {
            result.best_val_iou = row.val_iou;
            result.best_epoch = epoch;
            std::filesystem::copy_file(epoch_path, out_dir / "best.ckpt",
                                       std::filesystem::copy_options::overwrite_existing);
            result.best_checkpoint = out_dir / "best.ckpt";
        }
    }
    result.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace dnfs
