#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "dnfs/tensor.hpp"

namespace dnfs {

/// psi weighs cross-entropy against the soft Jaccard term; smooth_eps is the
/// Jaccard smoothing constant; threshold binarizes predictions for metrics.
struct LossConfig {
    double psi = 0.5;
    double smooth_eps = 1.0;
    double threshold = 0.5;
};

inline void validate_loss_config(const LossConfig& cfg) {
    if (!(cfg.psi >= 0.0 && cfg.psi <= 1.0))
        throw std::invalid_argument("loss: psi must be in [0, 1]");
    if (!(cfg.smooth_eps > 0.0)) throw std::invalid_argument("loss: smooth_eps must be positive");
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0))
        throw std::invalid_argument("loss: threshold must be in (0, 1)");
}

template <typename T>
struct LossResult {
    double value = 0.0;
    BasicTensor<T> grad;  // d(value)/d(prediction), same shape as the prediction
};

/// Label convention: 1 = black boundary pixel, 0 = white background.
template <typename T>
void check_mask_pair(const BasicTensor<T>& prediction, const BasicTensor<T>& target,
                     const char* op) {
    if (!prediction.same_shape(target))
        throw std::invalid_argument(std::string(op) + ": prediction " + prediction.shape_str() +
                                    " and target " + target.shape_str() + " differ");
    if (prediction.c != 1)
        throw std::invalid_argument(std::string(op) + ": masks are single-channel, got " +
                                    prediction.shape_str());
    for (const T& y : target.data)
        if (y != T(0) && y != T(1))
            throw std::invalid_argument(std::string(op) + ": target must be strictly binary");
    for (const T& p : prediction.data)
        if (!(p >= T(0) && p <= T(1)))
            throw std::invalid_argument(std::string(op) + ": prediction outside [0, 1]");
}

/// Clamps probabilities into [eps, 1 - eps] for log stability.
template <typename T>
BasicTensor<T> clamp_probabilities(const BasicTensor<T>& t, T eps = T(1e-7)) {
    BasicTensor<T> out = t;
    const T hi = T(1) - eps;
    for (T& v : out.data) v = v < eps ? eps : (v > hi ? hi : v);
    return out;
}

/// Zeroes gradient components where the raw value was clamped away.
template <typename T>
void zero_clamped_gradient(const BasicTensor<T>& raw, T eps, BasicTensor<T>& grad) {
    const T hi = T(1) - eps;
    for (std::size_t i = 0; i < raw.numel(); ++i)
        if (raw.data[i] < eps || raw.data[i] > hi) grad.data[i] = T(0);
}

/// Mean over all pixels of -[y log p + (1-y) log(1-p)]. Predictions exactly 0
/// or 1 are rejected; callers clamp upstream.
template <typename T>
LossResult<T> cross_entropy_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target) {
    check_mask_pair(prediction, target, "cross_entropy_loss");
    const double count = double(prediction.numel());
    if (count == 0.0) throw std::invalid_argument("cross_entropy_loss: empty mask pair");
    LossResult<T> r;
    r.grad = BasicTensor<T>(prediction.n, prediction.c, prediction.h, prediction.w);
    double sum = 0.0;
    for (std::size_t i = 0; i < prediction.numel(); ++i) {
        const double p = double(prediction.data[i]);
        const double y = double(target.data[i]);
        if (p <= 0.0 || p >= 1.0)
            throw std::invalid_argument(
                "cross_entropy_loss: prediction hit 0 or 1 exactly; clamp upstream");
        // log1p keeps the background term accurate for p near 0.
        sum += -(y * std::log(p) + (1.0 - y) * std::log1p(-p));
        r.grad.data[i] = T((-y / p + (1.0 - y) / (1.0 - p)) / count);
    }
    r.value = sum / count;
    return r;
}

/// Soft Jaccard over the whole batch: 1 - (I + eps) / (U + eps) with
/// I = sum(p*y) and U = sum(p) + sum(y) - I.
template <typename T>
LossResult<T> jaccard_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target,
                           double smooth_eps = 1.0) {
    check_mask_pair(prediction, target, "jaccard_loss");
    if (!(smooth_eps > 0.0)) throw std::invalid_argument("jaccard_loss: smooth_eps must be > 0");
    double inter = 0.0, sum_p = 0.0, sum_y = 0.0;
    for (std::size_t i = 0; i < prediction.numel(); ++i) {
        const double p = double(prediction.data[i]);
        const double y = double(target.data[i]);
        inter += p * y;
        sum_p += p;
        sum_y += y;
    }
    const double uni = sum_p + sum_y - inter;
    LossResult<T> r;
    r.value = 1.0 - (inter + smooth_eps) / (uni + smooth_eps);
    r.grad = BasicTensor<T>(prediction.n, prediction.c, prediction.h, prediction.w);
    const double denom = (uni + smooth_eps) * (uni + smooth_eps);
    for (std::size_t i = 0; i < prediction.numel(); ++i) {
        const double y = double(target.data[i]);
        r.grad.data[i] = T(((inter + smooth_eps) * (1.0 - y) - y * (uni + smooth_eps)) / denom);
    }
    return r;
}

/// psi * CrossEntropy + (1 - psi) * Jaccard, gradients combined the same way.
template <typename T>
LossResult<T> composite_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target,
                             const LossConfig& cfg) {
    validate_loss_config(cfg);
    const LossResult<T> ce = cross_entropy_loss(prediction, target);
    const LossResult<T> jc = jaccard_loss(prediction, target, cfg.smooth_eps);
    LossResult<T> r;
    r.value = cfg.psi * ce.value + (1.0 - cfg.psi) * jc.value;
    r.grad = BasicTensor<T>(prediction.n, prediction.c, prediction.h, prediction.w);
    for (std::size_t i = 0; i < prediction.numel(); ++i)
        r.grad.data[i] =
            T(cfg.psi * double(ce.grad.data[i]) + (1.0 - cfg.psi) * double(jc.grad.data[i]));
    return r;
}

/// IoU of the black class after binarizing the prediction (p > threshold),
/// counted over all pixels. Both sets empty counts as 1.0.
template <typename T>
double iou_metric(const BasicTensor<T>& prediction, const BasicTensor<T>& target,
                  double threshold = 0.5) {
    check_mask_pair(prediction, target, "iou_metric");
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < prediction.numel(); ++i) {
        const bool p = double(prediction.data[i]) > threshold;
        const bool y = target.data[i] == T(1);
        inter += (p && y) ? 1 : 0;
        uni += (p || y) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

/// Fraction of ground-truth boundary pixels predicted as boundary (recall of
/// the black class). Undefined, hence rejected, for an all-white target.
template <typename T>
double black_pixel_correctness(const BasicTensor<T>& prediction, const BasicTensor<T>& target,
                               double threshold = 0.5) {
    check_mask_pair(prediction, target, "black_pixel_correctness");
    std::int64_t black = 0, hit = 0;
    for (std::size_t i = 0; i < prediction.numel(); ++i) {
        if (target.data[i] != T(1)) continue;
        ++black;
        if (double(prediction.data[i]) > threshold) ++hit;
    }
    if (black == 0)
        throw std::invalid_argument("black_pixel_correctness: target has no black pixels");
    return double(hit) / double(black);
}

}  // namespace dnfs
