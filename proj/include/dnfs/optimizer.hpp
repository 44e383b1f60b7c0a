#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dnfs/network.hpp"

namespace dnfs {

template <typename T>
struct AdamConfig {
    T learning_rate = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);
};

/// Bias-corrected adaptive-moment update of one parameter array. Moment math
/// runs in double so float32 state stays deterministic across resume.
template <typename T>
void adam_update(std::span<T> values, std::span<const T> grads, std::span<T> first_moment,
                 std::span<T> second_moment, std::int64_t step, const AdamConfig<T>& cfg) {
    if (values.size() != grads.size() || values.size() != first_moment.size() ||
        values.size() != second_moment.size())
        throw std::invalid_argument("adam_update: array sizes disagree");
    if (step < 1) throw std::invalid_argument("adam_update: step must be >= 1");
    const double b1 = double(cfg.beta1), b2 = double(cfg.beta2);
    const double bc1 = 1.0 - std::pow(b1, double(step));
    const double bc2 = 1.0 - std::pow(b2, double(step));
    const double lr = double(cfg.learning_rate), eps = double(cfg.epsilon);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = double(grads[i]);
        const double m = b1 * double(first_moment[i]) + (1.0 - b1) * g;
        const double v = b2 * double(second_moment[i]) + (1.0 - b2) * g * g;
        first_moment[i] = T(m);
        second_moment[i] = T(v);
        values[i] = T(double(values[i]) - lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
    }
}

/// Per-parameter moment accumulators, parallel to the visit_params order.
template <typename T>
struct BasicOptimizerState {
    AdamConfig<T> config;
    std::int64_t step_count = 0;
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;

    static BasicOptimizerState zeros_like(const BasicNetwork<T>& net, AdamConfig<T> cfg = {}) {
        BasicOptimizerState s;
        s.config = cfg;
        visit_params(net, [&](const std::string&, const std::vector<T>& values,
                              const std::vector<T>&) {
            s.first_moment.emplace_back(values.size(), T(0));
            s.second_moment.emplace_back(values.size(), T(0));
        });
        return s;
    }
};

using OptimizerState = BasicOptimizerState<float>;

/// Applies one Adam step from the accumulated gradients, then zeroes the
/// gradient stores. Rejected if no backward pass armed the gradients.
template <typename T>
void optimizer_step(BasicNetwork<T>& net, BasicOptimizerState<T>& state) {
    if (!net.grads_armed)
        throw std::logic_error("optimizer_step: no backward pass since the last step");
    state.step_count += 1;
    std::size_t slot = 0;
    visit_params(net, [&](const std::string& name, std::vector<T>& values,
                          std::vector<T>& grads) {
        if (slot >= state.first_moment.size() ||
            state.first_moment[slot].size() != values.size())
            throw std::invalid_argument("optimizer_step: state does not match parameter '" +
                                        name + "'");
        adam_update<T>(values, grads, state.first_moment[slot], state.second_moment[slot],
                       state.step_count, state.config);
        ++slot;
    });
    zero_gradients(net);
}

}  // namespace dnfs
