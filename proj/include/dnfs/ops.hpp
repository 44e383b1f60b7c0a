#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dnfs/tensor.hpp"

namespace dnfs {

/// Parameters shared by forward and transposed convolution. The kernel is
/// (C_out, C_in, K, K); for the transposed operator C_in indexes its input
/// side and C_out its output side, i.e. the same container serves both ops.
template <typename T>
struct BasicConvParams {
    BasicTensor<T> kernel;  // (C_out, C_in, K, K)
    std::vector<T> bias;    // length C_out
    int stride = 1;
    int padding = 0;
    int out_pad = 0;  // transposed conv only: extra rows/cols appended at bottom/right

    int c_out() const { return kernel.n; }
    int c_in() const { return kernel.c; }
    int ksize() const { return kernel.h; }
};

using ConvParams = BasicConvParams<float>;
using ConvParams64 = BasicConvParams<double>;

template <typename T>
struct ConvGradients {
    BasicTensor<T> input;
    BasicTensor<T> kernel;
    std::vector<T> bias;
};

inline void op_require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

/// Forward conv output size; the division must be exact.
inline int conv_out_size(int in, int k, int stride, int pad, const char* op) {
    const int span = in + 2 * pad - k;
    if (span < 0 || span % stride != 0)
        throw std::invalid_argument(std::string(op) + ": spatial size " + std::to_string(in) +
                                    " with kernel " + std::to_string(k) + ", stride " +
                                    std::to_string(stride) + ", padding " + std::to_string(pad) +
                                    " does not divide exactly");
    return span / stride + 1;
}

inline int conv_transpose_out_size(int in, int k, int stride, int pad, int out_pad,
                                   const char* op) {
    const int out = (in - 1) * stride - 2 * pad + k + out_pad;
    if (in < 1 || out < 1)
        throw std::invalid_argument(std::string(op) + ": computed output size " +
                                    std::to_string(out) + " is not positive");
    return out;
}

template <typename T>
void check_conv_args(const BasicTensor<T>& input, const BasicConvParams<T>& params,
                     const char* op) {
    op_require(params.kernel.h == params.kernel.w,
               std::string(op) + ": kernel must be square, got " + params.kernel.shape_str());
    op_require(int(params.bias.size()) == params.c_out(),
               std::string(op) + ": bias length " + std::to_string(params.bias.size()) +
                   " does not match C_out " + std::to_string(params.c_out()));
    op_require(params.stride >= 1, std::string(op) + ": stride must be positive");
    op_require(params.padding >= 0, std::string(op) + ": padding must be non-negative");
    op_require(params.out_pad >= 0, std::string(op) + ": out_pad must be non-negative");
    op_require(input.c == params.c_in(),
               std::string(op) + ": input channels " + std::to_string(input.c) +
                   " do not match kernel C_in " + std::to_string(params.c_in()));
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Direct 2-D convolution (cross-correlation). Per output element the
/// accumulation starts from the bias and runs in (c_in, ki, kj) order; keep
/// that order fixed, it is what makes results reproducible bit for bit.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicConvParams<T>& params) {
    check_conv_args(input, params, "conv2d_forward");
    op_require(input.all_finite(), "conv2d_forward: non-finite input");
    const int k = params.ksize(), s = params.stride, p = params.padding;
    const int ho = conv_out_size(input.h, k, s, p, "conv2d_forward");
    const int wo = conv_out_size(input.w, k, s, p, "conv2d_forward");

    BasicTensor<T> out(input.n, params.c_out(), ho, wo);
    for (int n = 0; n < input.n; ++n)
        for (int co = 0; co < params.c_out(); ++co) {
            const T b = params.bias[co];
            for (int i = 0; i < ho; ++i)
                for (int j = 0; j < wo; ++j) {
                    T acc = b;
                    for (int ci = 0; ci < input.c; ++ci)
                        for (int ki = 0; ki < k; ++ki) {
                            const int ih = i * s + ki - p;
                            if (ih < 0 || ih >= input.h) continue;
                            for (int kj = 0; kj < k; ++kj) {
                                const int iw = j * s + kj - p;
                                if (iw < 0 || iw >= input.w) continue;
                                acc += input.at(n, ci, ih, iw) * params.kernel.at(co, ci, ki, kj);
                            }
                        }
                    out.at(n, co, i, j) = acc;
                }
        }
    return out;
}

/// Gradients of sum(grad_out * conv2d_forward(input)) w.r.t. input, kernel, bias.
template <typename T>
ConvGradients<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvParams<T>& params,
                                 const BasicTensor<T>& grad_out) {
    check_conv_args(input, params, "conv2d_backward");
    const int k = params.ksize(), s = params.stride, p = params.padding;
    const int ho = conv_out_size(input.h, k, s, p, "conv2d_backward");
    const int wo = conv_out_size(input.w, k, s, p, "conv2d_backward");
    op_require(grad_out.n == input.n && grad_out.c == params.c_out() && grad_out.h == ho &&
                   grad_out.w == wo,
               "conv2d_backward: grad_out shape " + grad_out.shape_str() + " does not match " +
                   BasicTensor<T>::shape_str(input.n, params.c_out(), ho, wo));

    ConvGradients<T> g{BasicTensor<T>(input.n, input.c, input.h, input.w),
                       BasicTensor<T>(params.kernel.n, params.kernel.c, k, k),
                       std::vector<T>(params.bias.size(), T(0))};
    for (int n = 0; n < input.n; ++n)
        for (int co = 0; co < params.c_out(); ++co)
            for (int i = 0; i < ho; ++i)
                for (int j = 0; j < wo; ++j) {
                    const T go = grad_out.at(n, co, i, j);
                    g.bias[co] += go;
                    for (int ci = 0; ci < input.c; ++ci)
                        for (int ki = 0; ki < k; ++ki) {
                            const int ih = i * s + ki - p;
                            if (ih < 0 || ih >= input.h) continue;
                            for (int kj = 0; kj < k; ++kj) {
                                const int iw = j * s + kj - p;
                                if (iw < 0 || iw >= input.w) continue;
                                g.kernel.at(co, ci, ki, kj) += go * input.at(n, ci, ih, iw);
                                g.input.at(n, ci, ih, iw) += go * params.kernel.at(co, ci, ki, kj);
                            }
                        }
                }
    return g;
}

// ---------------------------------------------------------------------------
// Transposed convolution
// ---------------------------------------------------------------------------

/// Scatter-add adjoint of the strided convolution. Input channels are C_in,
/// output channels C_out; out_pad appends rows/cols that only receive bias.
template <typename T>
BasicTensor<T> conv_transpose2d_forward(const BasicTensor<T>& input,
                                        const BasicConvParams<T>& params) {
    check_conv_args(input, params, "conv_transpose2d_forward");
    op_require(input.all_finite(), "conv_transpose2d_forward: non-finite input");
    const int k = params.ksize(), s = params.stride, p = params.padding;
    const int ho = conv_transpose_out_size(input.h, k, s, p, params.out_pad,
                                           "conv_transpose2d_forward");
    const int wo = conv_transpose_out_size(input.w, k, s, p, params.out_pad,
                                           "conv_transpose2d_forward");

    BasicTensor<T> out(input.n, params.c_out(), ho, wo);
    for (int n = 0; n < input.n; ++n)
        for (int co = 0; co < params.c_out(); ++co) {
            const T b = params.bias[co];
            for (int i = 0; i < ho; ++i)
                for (int j = 0; j < wo; ++j) out.at(n, co, i, j) = b;
        }
    for (int n = 0; n < input.n; ++n)
        for (int ci = 0; ci < input.c; ++ci)
            for (int i = 0; i < input.h; ++i)
                for (int j = 0; j < input.w; ++j) {
                    const T v = input.at(n, ci, i, j);
                    for (int co = 0; co < params.c_out(); ++co)
                        for (int ki = 0; ki < k; ++ki) {
                            const int oh = i * s + ki - p;
                            if (oh < 0 || oh >= ho) continue;
                            for (int kj = 0; kj < k; ++kj) {
                                const int ow = j * s + kj - p;
                                if (ow < 0 || ow >= wo) continue;
                                out.at(n, co, oh, ow) += v * params.kernel.at(co, ci, ki, kj);
                            }
                        }
                }
    return out;
}

/// Gradients of sum(grad_out * conv_transpose2d_forward(input)). grad_input is
/// a gather with per-element (c_out, ki, kj) accumulation order, which makes it
/// coincide exactly with a forward conv of grad_out under a channel-swapped
/// kernel.
template <typename T>
ConvGradients<T> conv_transpose2d_backward(const BasicTensor<T>& input,
                                           const BasicConvParams<T>& params,
                                           const BasicTensor<T>& grad_out) {
    check_conv_args(input, params, "conv_transpose2d_backward");
    const int k = params.ksize(), s = params.stride, p = params.padding;
    const int ho = conv_transpose_out_size(input.h, k, s, p, params.out_pad,
                                           "conv_transpose2d_backward");
    const int wo = conv_transpose_out_size(input.w, k, s, p, params.out_pad,
                                           "conv_transpose2d_backward");
    op_require(grad_out.n == input.n && grad_out.c == params.c_out() && grad_out.h == ho &&
                   grad_out.w == wo,
               "conv_transpose2d_backward: grad_out shape " + grad_out.shape_str() +
                   " does not match " +
                   BasicTensor<T>::shape_str(input.n, params.c_out(), ho, wo));

    ConvGradients<T> g{BasicTensor<T>(input.n, input.c, input.h, input.w),
                       BasicTensor<T>(params.kernel.n, params.kernel.c, k, k),
                       std::vector<T>(params.bias.size(), T(0))};
    for (int n = 0; n < grad_out.n; ++n)
        for (int co = 0; co < params.c_out(); ++co)
            for (int i = 0; i < ho; ++i)
                for (int j = 0; j < wo; ++j) g.bias[co] += grad_out.at(n, co, i, j);

    for (int n = 0; n < input.n; ++n)
        for (int ci = 0; ci < input.c; ++ci)
            for (int i = 0; i < input.h; ++i)
                for (int j = 0; j < input.w; ++j) {
                    const T v = input.at(n, ci, i, j);
                    T acc = T(0);
                    for (int co = 0; co < params.c_out(); ++co)
                        for (int ki = 0; ki < k; ++ki) {
                            const int oh = i * s + ki - p;
                            if (oh < 0 || oh >= ho) continue;
                            for (int kj = 0; kj < k; ++kj) {
                                const int ow = j * s + kj - p;
                                if (ow < 0 || ow >= wo) continue;
                                const T go = grad_out.at(n, co, oh, ow);
                                acc += go * params.kernel.at(co, ci, ki, kj);
                                g.kernel.at(co, ci, ki, kj) += v * go;
                            }
                        }
                    g.input.at(n, ci, i, j) = acc;
                }
    return g;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling
// ---------------------------------------------------------------------------

template <typename T>
struct MaxPoolResult {
    BasicTensor<T> output;
    // Winning offset per output element: 0..3 in row-major window order.
    std::vector<std::uint8_t> argmax;
};

/// 2x2, stride-2 max pooling. Ties resolve to the first occurrence in
/// row-major window order so the backward routing is deterministic.
template <typename T>
MaxPoolResult<T> maxpool2_forward(const BasicTensor<T>& input) {
    op_require(input.h % 2 == 0 && input.w % 2 == 0 && input.h > 0 && input.w > 0,
               "maxpool2_forward: spatial dims must be positive and even, got " +
                   input.shape_str());
    MaxPoolResult<T> r{BasicTensor<T>(input.n, input.c, input.h / 2, input.w / 2), {}};
    r.argmax.resize(r.output.numel());
    std::size_t o = 0;
    for (int n = 0; n < input.n; ++n)
        for (int c = 0; c < input.c; ++c)
            for (int i = 0; i < r.output.h; ++i)
                for (int j = 0; j < r.output.w; ++j, ++o) {
                    T best = input.at(n, c, 2 * i, 2 * j);
                    std::uint8_t win = 0;
                    for (std::uint8_t off = 1; off < 4; ++off) {
                        const T v = input.at(n, c, 2 * i + off / 2, 2 * j + off % 2);
                        if (v > best) {
                            best = v;
                            win = off;
                        }
                    }
                    r.output.data[o] = best;
                    r.argmax[o] = win;
                }
    return r;
}

template <typename T>
BasicTensor<T> maxpool2_backward(const std::vector<std::uint8_t>& argmax,
                                 const BasicTensor<T>& grad_out) {
    op_require(argmax.size() == grad_out.numel(),
               "maxpool2_backward: argmax map does not match grad_out " + grad_out.shape_str());
    BasicTensor<T> g(grad_out.n, grad_out.c, grad_out.h * 2, grad_out.w * 2);
    std::size_t o = 0;
    for (int n = 0; n < grad_out.n; ++n)
        for (int c = 0; c < grad_out.c; ++c)
            for (int i = 0; i < grad_out.h; ++i)
                for (int j = 0; j < grad_out.w; ++j, ++o) {
                    const std::uint8_t off = argmax[o];
                    g.at(n, c, 2 * i + off / 2, 2 * j + off % 2) += grad_out.data[o];
                }
    return g;
}

// ---------------------------------------------------------------------------
// Elementwise activations
// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
    BasicTensor<T> out = input;
    for (T& v : out.data)
        if (v < T(0)) v = T(0);
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
    op_require(input.same_shape(grad_out), "relu_backward: shape mismatch " + input.shape_str() +
                                               " vs " + grad_out.shape_str());
    BasicTensor<T> g(input.n, input.c, input.h, input.w);
    for (std::size_t i = 0; i < input.numel(); ++i)
        g.data[i] = input.data[i] > T(0) ? grad_out.data[i] : T(0);
    return g;
}

/// Numerically stable logistic: never evaluates exp of a positive argument.
template <typename T>
T sigmoid_scalar(T x) {
    if (x >= T(0)) {
        const T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
BasicTensor<T> sigmoid_forward(const BasicTensor<T>& input) {
    BasicTensor<T> out = input;
    for (T& v : out.data) v = sigmoid_scalar(v);
    return out;
}

/// Takes the forward *output* (sigma(x)), not the input.
template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out) {
    op_require(output.same_shape(grad_out), "sigmoid_backward: shape mismatch " +
                                                output.shape_str() + " vs " +
                                                grad_out.shape_str());
    BasicTensor<T> g(output.n, output.c, output.h, output.w);
    for (std::size_t i = 0; i < output.numel(); ++i) {
        const T s = output.data[i];
        g.data[i] = grad_out.data[i] * s * (T(1) - s);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Channel concatenation
// ---------------------------------------------------------------------------

/// Concatenates along the channel axis; a occupies the leading channels.
template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    op_require(a.n == b.n && a.h == b.h && a.w == b.w,
               "concat_channels: batch/spatial mismatch " + a.shape_str() + " vs " +
                   b.shape_str());
    BasicTensor<T> out(a.n, a.c + b.c, a.h, a.w);
    for (int n = 0; n < a.n; ++n) {
        for (int c = 0; c < a.c; ++c)
            for (int i = 0; i < a.h; ++i)
                for (int j = 0; j < a.w; ++j) out.at(n, c, i, j) = a.at(n, c, i, j);
        for (int c = 0; c < b.c; ++c)
            for (int i = 0; i < a.h; ++i)
                for (int j = 0; j < a.w; ++j) out.at(n, a.c + c, i, j) = b.at(n, c, i, j);
    }
    return out;
}

/// Splits grad_out back into the two channel ranges of concat_channels(a, b).
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> concat_channels_backward(const BasicTensor<T>& grad_out,
                                                                   int c_a) {
    op_require(c_a >= 0 && c_a <= grad_out.c,
               "concat_channels_backward: split at " + std::to_string(c_a) +
                   " outside channel range of " + grad_out.shape_str());
    BasicTensor<T> ga(grad_out.n, c_a, grad_out.h, grad_out.w);
    BasicTensor<T> gb(grad_out.n, grad_out.c - c_a, grad_out.h, grad_out.w);
    for (int n = 0; n < grad_out.n; ++n) {
        for (int c = 0; c < c_a; ++c)
            for (int i = 0; i < grad_out.h; ++i)
                for (int j = 0; j < grad_out.w; ++j) ga.at(n, c, i, j) = grad_out.at(n, c, i, j);
        for (int c = c_a; c < grad_out.c; ++c)
            for (int i = 0; i < grad_out.h; ++i)
                for (int j = 0; j < grad_out.w; ++j)
                    gb.at(n, c - c_a, i, j) = grad_out.at(n, c, i, j);
    }
    return {std::move(ga), std::move(gb)};
}

}  // namespace dnfs
