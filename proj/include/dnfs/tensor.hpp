#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnfs {

/// Dense rank-4 tensor, row-major in (batch, channels, height, width) order.
/// This is the single numeric carrier for all feature maps, kernels and
/// gradients. float is used for training; double for gradient checking.
template <typename T>
struct BasicTensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    BasicTensor() = default;

    BasicTensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_), data(checked_numel(n_, c_, h_, w_), fill) {}

    static std::size_t checked_numel(int n, int c, int h, int w) {
        if (n < 0 || c < 0 || h < 0 || w < 0)
            throw std::invalid_argument("tensor: dims must be non-negative, got " +
                                        shape_str(n, c, h, w));
        return std::size_t(n) * std::size_t(c) * std::size_t(h) * std::size_t(w);
    }

    std::size_t numel() const { return data.size(); }

    std::size_t idx(int in, int ic, int ih, int iw) const {
        return ((std::size_t(in) * c + ic) * h + ih) * w + iw;
    }

    T& at(int in, int ic, int ih, int iw) { return data[idx(in, ic, ih, iw)]; }
    const T& at(int in, int ic, int ih, int iw) const { return data[idx(in, ic, ih, iw)]; }

    bool same_shape(const BasicTensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static std::string shape_str(int n, int c, int h, int w) {
        return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " +
               std::to_string(h) + ", " + std::to_string(w) + ")";
    }

    std::string shape_str() const { return shape_str(n, c, h, w); }
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("dot: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += double(a.data[i]) * double(b.data[i]);
    return s;
}

}  // namespace dnfs
