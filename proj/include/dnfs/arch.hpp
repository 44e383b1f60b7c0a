#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dnfs/network.hpp"

namespace dnfs {

enum class ArchFamily { dnfs, unet_like };

inline const char* arch_family_name(ArchFamily f) {
    return f == ArchFamily::dnfs ? "dnfs" : "unet-like";
}

/// Declarative architecture description. The multiplier scales the channel
/// width of every layer; depth is the number of encoder levels.
struct ArchSpec {
    ArchFamily family = ArchFamily::dnfs;
    int multiplier = 4;
    int depth = 3;
    int input_channels = 1;
};

inline void validate_arch_spec(const ArchSpec& spec) {
    if (spec.multiplier < 1) throw std::invalid_argument("arch: multiplier must be positive");
    if (spec.depth < 1) throw std::invalid_argument("arch: depth must be positive");
    if (spec.input_channels < 1)
        throw std::invalid_argument("arch: input_channels must be positive");
}

inline const std::vector<int>& preset_multipliers() {
    static const std::vector<int> m{1, 2, 4, 8, 16, 32, 64, 128};
    return m;
}

inline std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const char* fam : {"dnfs", "unet-like"})
        for (int m : preset_multipliers()) names.push_back(std::string(fam) + "-" + std::to_string(m));
    return names;
}

/// Parses a preset such as "dnfs-8" or "unet-like-4". Unknown names raise an
/// error that lists the available presets.
inline ArchSpec parse_preset(const std::string& name) {
    for (ArchFamily fam : {ArchFamily::dnfs, ArchFamily::unet_like}) {
        const std::string prefix = std::string(arch_family_name(fam)) + "-";
        if (name.rfind(prefix, 0) != 0) continue;
        const std::string rest = name.substr(prefix.size());
        for (int m : preset_multipliers())
            if (rest == std::to_string(m)) return ArchSpec{fam, m, 3, 1};
    }
    std::string known;
    for (const auto& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
    throw std::invalid_argument("unknown architecture preset '" + name +
                                "'; available presets: " + known);
}

inline std::string arch_spec_to_string(const ArchSpec& spec) {
    return std::string(arch_family_name(spec.family)) + "-" + std::to_string(spec.multiplier) +
           ";depth=" + std::to_string(spec.depth) + ";cin=" + std::to_string(spec.input_channels);
}

inline ArchSpec arch_spec_from_string(const std::string& text) {
    ArchSpec spec;
    const auto semi1 = text.find(';');
    const auto semi2 = text.find(';', semi1 == std::string::npos ? semi1 : semi1 + 1);
    if (semi1 == std::string::npos || semi2 == std::string::npos)
        throw std::invalid_argument("arch: malformed spec string '" + text + "'");
    const std::string head = text.substr(0, semi1);
    const std::string depth_part = text.substr(semi1 + 1, semi2 - semi1 - 1);
    const std::string cin_part = text.substr(semi2 + 1);
    const auto dash = head.rfind('-');
    if (dash == std::string::npos || depth_part.rfind("depth=", 0) != 0 ||
        cin_part.rfind("cin=", 0) != 0)
        throw std::invalid_argument("arch: malformed spec string '" + text + "'");
    const std::string fam = head.substr(0, dash);
    if (fam == "dnfs")
        spec.family = ArchFamily::dnfs;
    else if (fam == "unet-like")
        spec.family = ArchFamily::unet_like;
    else
        throw std::invalid_argument("arch: unknown family in '" + text + "'");
    spec.multiplier = std::stoi(head.substr(dash + 1));
    spec.depth = std::stoi(depth_part.substr(6));
    spec.input_channels = std::stoi(cin_part.substr(4));
    validate_arch_spec(spec);
    return spec;
}

namespace detail {

// Upsampling transposed conv: 3x3, stride 2, pad 1, out_pad 1 doubles the
// spatial size exactly.
template <typename T>
void add_upsample(BasicNetwork<T>& net, const std::string& name, int c_in, int c_out) {
    net.layers.push_back(
        make_conv_layer<T>(LayerKind::conv_transpose, name, c_in, c_out, 3, 2, 1, 1));
}

template <typename T>
void add_conv_relu(BasicNetwork<T>& net, const std::string& name, int c_in, int c_out) {
    net.layers.push_back(make_conv_layer<T>(LayerKind::conv, name, c_in, c_out, 3, 1, 1));
    net.layers.push_back(make_plain_layer<T>(LayerKind::relu, name + "_relu"));
}

}  // namespace detail

/// Encoder-decoder with a single conv per level and a single-layer
/// bottleneck. Channel ladder m*2^level, bottleneck m*2^depth; each decoder
/// level upsamples, concatenates the matching encoder skip and merges back to
/// the skip width; 1x1 head + sigmoid.
template <typename T>
BasicNetwork<T> build_dnfs(const ArchSpec& spec) {
    validate_arch_spec(spec);
    const int m = spec.multiplier, depth = spec.depth;
    BasicNetwork<T> net;
    net.input_channels = spec.input_channels;
    net.reference_h = net.reference_w = 8 << depth;

    int prev = spec.input_channels;
    for (int level = 0; level < depth; ++level) {
        const int width = m << level;
        detail::add_conv_relu(net, "enc" + std::to_string(level), prev, width);
        net.layers.push_back(
            make_plain_layer<T>(LayerKind::concat_skip_source, "skip" + std::to_string(level)));
        net.layers.push_back(make_plain_layer<T>(LayerKind::maxpool, "pool" + std::to_string(level)));
        prev = width;
    }
    detail::add_conv_relu(net, "bottleneck", prev, m << depth);
    prev = m << depth;
    for (int level = depth - 1; level >= 0; --level) {
        const int width = m << level;
        detail::add_upsample(net, "up" + std::to_string(level), prev, width);
        net.layers.push_back(
            make_skip_sink<T>("cat" + std::to_string(level), "skip" + std::to_string(level)));
        detail::add_conv_relu(net, "dec" + std::to_string(level), 2 * width, width);
        prev = width;
    }
    net.layers.push_back(make_conv_layer<T>(LayerKind::output_head, "head", prev, 1, 1, 1, 0));
    net.layers.push_back(make_plain_layer<T>(LayerKind::sigmoid, "head_sigmoid"));
    net.validate();
    return net;
}

/// Reference network with two convs per encoder/decoder block and a two-layer
/// bottleneck, otherwise the same topology as build_dnfs. Exists to compare
/// parameter counts against the single-layer variant.
template <typename T>
BasicNetwork<T> build_unet_like(const ArchSpec& spec) {
    validate_arch_spec(spec);
    const int m = spec.multiplier, depth = spec.depth;
    BasicNetwork<T> net;
    net.input_channels = spec.input_channels;
    net.reference_h = net.reference_w = 8 << depth;

    int prev = spec.input_channels;
    for (int level = 0; level < depth; ++level) {
        const int width = m << level;
        const std::string base = "enc" + std::to_string(level);
        detail::add_conv_relu(net, base + "a", prev, width);
        detail::add_conv_relu(net, base + "b", width, width);
        net.layers.push_back(
            make_plain_layer<T>(LayerKind::concat_skip_source, "skip" + std::to_string(level)));
        net.layers.push_back(make_plain_layer<T>(LayerKind::maxpool, "pool" + std::to_string(level)));
        prev = width;
    }
    detail::add_conv_relu(net, "bottlenecka", prev, m << depth);
    detail::add_conv_relu(net, "bottleneckb", m << depth, m << depth);
    prev = m << depth;
    for (int level = depth - 1; level >= 0; --level) {
        const int width = m << level;
        const std::string base = "dec" + std::to_string(level);
        detail::add_upsample(net, "up" + std::to_string(level), prev, width);
        net.layers.push_back(
            make_skip_sink<T>("cat" + std::to_string(level), "skip" + std::to_string(level)));
        detail::add_conv_relu(net, base + "a", 2 * width, width);
        detail::add_conv_relu(net, base + "b", width, width);
        prev = width;
    }
    net.layers.push_back(make_conv_layer<T>(LayerKind::output_head, "head", prev, 1, 1, 1, 0));
    net.layers.push_back(make_plain_layer<T>(LayerKind::sigmoid, "head_sigmoid"));
    net.validate();
    return net;
}

template <typename T>
BasicNetwork<T> build_network(const ArchSpec& spec) {
    return spec.family == ArchFamily::dnfs ? build_dnfs<T>(spec) : build_unet_like<T>(spec);
}

/// Exact parameter count from the layer dimensions: (K*K*C_in + 1) * C_out per
/// conv, K*K*C_in*C_out + C_out per transposed conv, 0 for everything else.
template <typename T>
std::int64_t count_parameters(const BasicNetwork<T>& net) {
    std::int64_t total = 0;
    for (const auto& l : net.layers) {
        if (!l.has_params()) continue;
        const std::int64_t k = l.params.ksize(), ci = l.params.c_in(), co = l.params.c_out();
        if (l.kind == LayerKind::conv_transpose)
            total += k * k * ci * co + co;
        else
            total += (k * k * ci + 1) * co;
    }
    return total;
}

}  // namespace dnfs
