#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dnfs/ops.hpp"
#include "dnfs/rng.hpp"
#include "dnfs/tensor.hpp"

namespace dnfs {

enum class LayerKind {
    conv,
    conv_transpose,
    maxpool,
    relu,
    sigmoid,
    concat_skip_source,
    concat_skip_sink,
    output_head,  // behaves exactly like conv; marks the final projection
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::conv_transpose: return "conv_transpose";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::relu: return "relu";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::concat_skip_source: return "concat_skip_source";
        case LayerKind::concat_skip_sink: return "concat_skip_sink";
        case LayerKind::output_head: return "output_head";
    }
    return "?";
}

template <typename T>
struct BasicLayer {
    LayerKind kind = LayerKind::relu;
    std::string name;
    BasicConvParams<T> params;  // conv / conv_transpose / output_head only
    BasicConvParams<T> grads;   // congruent with params
    std::string skip_source;    // concat_skip_sink only

    bool has_params() const {
        return kind == LayerKind::conv || kind == LayerKind::conv_transpose ||
               kind == LayerKind::output_head;
    }
};

template <typename T>
BasicLayer<T> make_conv_layer(LayerKind kind, std::string name, int c_in, int c_out, int k,
                              int stride, int padding, int out_pad = 0) {
    BasicLayer<T> layer;
    layer.kind = kind;
    layer.name = std::move(name);
    layer.params.kernel = BasicTensor<T>(c_out, c_in, k, k);
    layer.params.bias.assign(std::size_t(c_out), T(0));
    layer.params.stride = stride;
    layer.params.padding = padding;
    layer.params.out_pad = out_pad;
    layer.grads = layer.params;
    return layer;
}

template <typename T>
BasicLayer<T> make_plain_layer(LayerKind kind, std::string name) {
    BasicLayer<T> layer;
    layer.kind = kind;
    layer.name = std::move(name);
    return layer;
}

template <typename T>
BasicLayer<T> make_skip_sink(std::string name, std::string source) {
    BasicLayer<T> layer;
    layer.kind = LayerKind::concat_skip_sink;
    layer.name = std::move(name);
    layer.skip_source = std::move(source);
    return layer;
}

struct ChanShape {
    int c = 0, h = 0, w = 0;
};

/// Ordered layer list with skip-edge annotations. Mutation (backward,
/// optimizer step) is single-writer; eval-mode forward on a frozen network is
/// safe to share.
template <typename T>
struct BasicNetwork {
    std::vector<BasicLayer<T>> layers;
    int input_channels = 1;
    // Reference spatial size used for the construction-time shape check.
    int reference_h = 64, reference_w = 64;
    // Input H and W must be positive multiples of this (set by validate()).
    int spatial_divisor = 1;
    bool grads_armed = false;

    const BasicLayer<T>* find(const std::string& name) const {
        for (const auto& l : layers)
            if (l.name == name) return &l;
        return nullptr;
    }

    /// Checks name uniqueness, skip wiring and that one forward pass at the
    /// reference size is shape-consistent. Throws on any violation.
    void validate() {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (!index.emplace(layers[i].name, i).second)
                throw std::invalid_argument("network: duplicate layer name '" + layers[i].name +
                                            "'");
        }
        std::map<std::string, int> source_uses;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            if (l.kind == LayerKind::concat_skip_source) source_uses.emplace(l.name, 0);
            if (l.kind != LayerKind::concat_skip_sink) continue;
            auto it = index.find(l.skip_source);
            if (it == index.end() || it->second >= i ||
                layers[it->second].kind != LayerKind::concat_skip_source)
                throw std::invalid_argument("network: sink '" + l.name +
                                            "' must reference an earlier skip source, got '" +
                                            l.skip_source + "'");
            source_uses[l.skip_source] += 1;
        }
        for (const auto& [name, uses] : source_uses)
            if (uses != 1)
                throw std::invalid_argument("network: skip source '" + name + "' has " +
                                            std::to_string(uses) + " sinks, expected 1");

        int pools = 0;
        for (const auto& l : layers)
            if (l.kind == LayerKind::maxpool) ++pools;
        spatial_divisor = 1 << pools;

        infer_shapes(reference_h, reference_w);  // throws if inconsistent
    }

    /// Walks the layer list symbolically and returns the per-layer output
    /// (C, H, W); uses the same size formulas as the ops.
    std::vector<ChanShape> infer_shapes(int h, int w) const {
        std::vector<ChanShape> out;
        out.reserve(layers.size());
        std::map<std::string, ChanShape> saved;
        ChanShape cur{input_channels, h, w};
        for (const auto& l : layers) {
            switch (l.kind) {
                case LayerKind::conv:
                case LayerKind::output_head: {
                    if (cur.c != l.params.c_in())
                        throw std::invalid_argument("network: layer '" + l.name + "' expects " +
                                                    std::to_string(l.params.c_in()) +
                                                    " channels, gets " + std::to_string(cur.c));
                    cur = {l.params.c_out(),
                           conv_out_size(cur.h, l.params.ksize(), l.params.stride,
                                         l.params.padding, l.name.c_str()),
                           conv_out_size(cur.w, l.params.ksize(), l.params.stride,
                                         l.params.padding, l.name.c_str())};
                    break;
                }
                case LayerKind::conv_transpose: {
                    if (cur.c != l.params.c_in())
                        throw std::invalid_argument("network: layer '" + l.name + "' expects " +
                                                    std::to_string(l.params.c_in()) +
                                                    " channels, gets " + std::to_string(cur.c));
                    cur = {l.params.c_out(),
                           conv_transpose_out_size(cur.h, l.params.ksize(), l.params.stride,
                                                   l.params.padding, l.params.out_pad,
                                                   l.name.c_str()),
                           conv_transpose_out_size(cur.w, l.params.ksize(), l.params.stride,
                                                   l.params.padding, l.params.out_pad,
                                                   l.name.c_str())};
                    break;
                }
                case LayerKind::maxpool: {
                    if (cur.h % 2 != 0 || cur.w % 2 != 0 || cur.h == 0 || cur.w == 0)
                        throw std::invalid_argument("network: layer '" + l.name +
                                                    "' needs even spatial dims, gets " +
                                                    std::to_string(cur.h) + "x" +
                                                    std::to_string(cur.w));
                    cur = {cur.c, cur.h / 2, cur.w / 2};
                    break;
                }
                case LayerKind::relu:
                case LayerKind::sigmoid:
                    break;
                case LayerKind::concat_skip_source:
                    saved[l.name] = cur;
                    break;
                case LayerKind::concat_skip_sink: {
                    const ChanShape s = saved.at(l.skip_source);
                    if (s.h != cur.h || s.w != cur.w)
                        throw std::invalid_argument(
                            "network: sink '" + l.name + "' spatial mismatch with source '" +
                            l.skip_source + "': " + std::to_string(cur.h) + "x" +
                            std::to_string(cur.w) + " vs " + std::to_string(s.h) + "x" +
                            std::to_string(s.w));
                    cur = {cur.c + s.c, cur.h, cur.w};
                    break;
                }
            }
            out.push_back(cur);
        }
        return out;
    }
};

using Network = BasicNetwork<float>;
using Network64 = BasicNetwork<double>;

/// Visits every parameter array (kernel then bias per parameterized layer, in
/// layer order). The single enumeration shared by init, optimizer, checkpoints
/// and parameter counting.
template <typename T, typename F>
void visit_params(BasicNetwork<T>& net, F&& f) {
    for (auto& l : net.layers) {
        if (!l.has_params()) continue;
        f(l.name + ".kernel", l.params.kernel.data, l.grads.kernel.data);
        f(l.name + ".bias", l.params.bias, l.grads.bias);
    }
}

template <typename T, typename F>
void visit_params(const BasicNetwork<T>& net, F&& f) {
    for (const auto& l : net.layers) {
        if (!l.has_params()) continue;
        f(l.name + ".kernel", l.params.kernel.data, l.grads.kernel.data);
        f(l.name + ".bias", l.params.bias, l.grads.bias);
    }
}

/// He initialization: kernels ~ N(0, 2 / fan_in), biases zero. Each layer
/// draws from its own seed stream so the result is independent of the sizes
/// of other layers.
template <typename T>
void init_parameters(BasicNetwork<T>& net, std::uint64_t seed) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& l = net.layers[i];
        if (!l.has_params()) continue;
        SplitMix64 rng(mix_seed(seed, i));
        const double fan_in = double(l.params.c_in()) * l.params.ksize() * l.params.ksize();
        const double stddev = std::sqrt(2.0 / fan_in);
        for (T& v : l.params.kernel.data) v = T(stddev * rng.normal());
        for (T& v : l.params.bias) v = T(0);
        for (T& v : l.grads.kernel.data) v = T(0);
        for (T& v : l.grads.bias) v = T(0);
    }
    net.grads_armed = false;
}

template <typename T>
void zero_gradients(BasicNetwork<T>& net) {
    for (auto& l : net.layers) {
        if (!l.has_params()) continue;
        for (T& v : l.grads.kernel.data) v = T(0);
        for (T& v : l.grads.bias) v = T(0);
    }
    net.grads_armed = false;
}

template <typename T>
struct LayerCacheEntry {
    BasicTensor<T> saved;               // op input, or output for sigmoid
    std::vector<std::uint8_t> argmax;   // maxpool only
    int main_channels = 0;              // concat sink: channels on the main path
};

template <typename T>
struct ForwardCache {
    std::vector<LayerCacheEntry<T>> entries;  // one per layer when caching
};

/// Runs the network. Passing a cache selects train mode: every intermediate
/// needed by backward() is retained. With cache == nullptr (eval mode) nothing
/// is kept. Both modes compute identical outputs.
template <typename T>
BasicTensor<T> forward(const BasicNetwork<T>& net, const BasicTensor<T>& input,
                       ForwardCache<T>* cache = nullptr) {
    if (input.c != net.input_channels)
        throw std::invalid_argument("forward: input channels " + std::to_string(input.c) +
                                    " do not match network input " +
                                    std::to_string(net.input_channels));
    if (input.h <= 0 || input.w <= 0 || input.h % net.spatial_divisor != 0 ||
        input.w % net.spatial_divisor != 0)
        throw std::invalid_argument("forward: spatial dims of " + input.shape_str() +
                                    " must be positive multiples of " +
                                    std::to_string(net.spatial_divisor));
    if (cache) {
        cache->entries.clear();
        cache->entries.resize(net.layers.size());
    }

    std::map<std::string, BasicTensor<T>> skip_values;
    BasicTensor<T> cur = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        switch (l.kind) {
            case LayerKind::conv:
            case LayerKind::output_head: {
                BasicTensor<T> next = conv2d_forward(cur, l.params);
                if (cache) cache->entries[i].saved = std::move(cur);
                cur = std::move(next);
                break;
            }
            case LayerKind::conv_transpose: {
                BasicTensor<T> next = conv_transpose2d_forward(cur, l.params);
                if (cache) cache->entries[i].saved = std::move(cur);
                cur = std::move(next);
                break;
            }
            case LayerKind::maxpool: {
                MaxPoolResult<T> r = maxpool2_forward(cur);
                if (cache) cache->entries[i].argmax = std::move(r.argmax);
                cur = std::move(r.output);
                break;
            }
            case LayerKind::relu: {
                BasicTensor<T> next = relu_forward(cur);
                if (cache) cache->entries[i].saved = std::move(cur);
                cur = std::move(next);
                break;
            }
            case LayerKind::sigmoid: {
                cur = sigmoid_forward(cur);
                if (cache) cache->entries[i].saved = cur;  // backward wants the output
                break;
            }
            case LayerKind::concat_skip_source: {
                skip_values[l.name] = cur;
                break;
            }
            case LayerKind::concat_skip_sink: {
                auto it = skip_values.find(l.skip_source);
                if (it == skip_values.end())
                    throw std::invalid_argument("forward: sink '" + l.name +
                                                "' found no stored activation for '" +
                                                l.skip_source + "'");
                if (cache) cache->entries[i].main_channels = cur.c;
                cur = concat_channels(cur, it->second);
                skip_values.erase(it);
                break;
            }
        }
    }
    return cur;
}

/// Backpropagates grad_output, accumulating parameter gradients into each
/// layer's grad store (+=). Skip edges route gradients through both branches
/// additively. Returns the gradient w.r.t. the network input.
template <typename T>
BasicTensor<T> backward(BasicNetwork<T>& net, const ForwardCache<T>& cache,
                        const BasicTensor<T>& grad_output) {
    if (cache.entries.size() != net.layers.size())
        throw std::invalid_argument("backward: cache does not match network (size " +
                                    std::to_string(cache.entries.size()) + " vs " +
                                    std::to_string(net.layers.size()) + " layers)");

    std::map<std::string, BasicTensor<T>> pending_skip_grads;
    BasicTensor<T> grad = grad_output;
    for (std::size_t pos = net.layers.size(); pos-- > 0;) {
        auto& l = net.layers[pos];
        const auto& entry = cache.entries[pos];
        switch (l.kind) {
            case LayerKind::conv:
            case LayerKind::output_head: {
                ConvGradients<T> g = conv2d_backward(entry.saved, l.params, grad);
                accumulate_param_grads(l, g);
                grad = std::move(g.input);
                break;
            }
            case LayerKind::conv_transpose: {
                ConvGradients<T> g = conv_transpose2d_backward(entry.saved, l.params, grad);
                accumulate_param_grads(l, g);
                grad = std::move(g.input);
                break;
            }
            case LayerKind::maxpool:
                grad = maxpool2_backward(entry.argmax, grad);
                break;
            case LayerKind::relu:
                grad = relu_backward(entry.saved, grad);
                break;
            case LayerKind::sigmoid:
                grad = sigmoid_backward(entry.saved, grad);
                break;
            case LayerKind::concat_skip_source: {
                auto it = pending_skip_grads.find(l.name);
                if (it != pending_skip_grads.end()) {
                    if (!grad.same_shape(it->second))
                        throw std::invalid_argument("backward: skip gradient shape mismatch at '" +
                                                    l.name + "'");
                    for (std::size_t i = 0; i < grad.numel(); ++i)
                        grad.data[i] += it->second.data[i];
                    pending_skip_grads.erase(it);
                }
                break;
            }
            case LayerKind::concat_skip_sink: {
                auto [g_main, g_skip] = concat_channels_backward(grad, entry.main_channels);
                pending_skip_grads[l.skip_source] = std::move(g_skip);
                grad = std::move(g_main);
                break;
            }
        }
    }
    net.grads_armed = true;
    return grad;
}

template <typename T>
void accumulate_param_grads(BasicLayer<T>& l, const ConvGradients<T>& g) {
    for (std::size_t i = 0; i < l.grads.kernel.numel(); ++i)
        l.grads.kernel.data[i] += g.kernel.data[i];
    for (std::size_t i = 0; i < l.grads.bias.size(); ++i) l.grads.bias[i] += g.bias[i];
}

}  // namespace dnfs
