#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "rollnet/errors.hpp"

namespace rollnet {

// Dense NCHW tensor. Trailing dimensions of 1 cover vectors and matrices
// (e.g. conv bias = {C,1,1,1}).
template <class T>
struct Tensor4 {
    std::array<std::size_t, 4> shape{0, 0, 0, 0}; // N, C, H, W
    std::vector<T> data;

    Tensor4() = default;
    Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w)
        : shape{n, c, h, w}, data(n * c * h * w, T(0)) {}

    std::size_t size() const { return data.size(); }
    std::size_t n() const { return shape[0]; }
    std::size_t c() const { return shape[1]; }
    std::size_t h() const { return shape[2]; }
    std::size_t w() const { return shape[3]; }

    std::size_t idx(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_) const {
        return ((n_ * shape[1] + c_) * shape[2] + h_) * shape[3] + w_;
    }
    T at(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_) const {
        return data[idx(n_, c_, h_, w_)];
    }
    T& at(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_) {
        return data[idx(n_, c_, h_, w_)];
    }

    bool same_shape(const Tensor4& other) const { return shape == other.shape; }
    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <class U>
    Tensor4<U> cast() const {
        Tensor4<U> out(shape[0], shape[1], shape[2], shape[3]);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

} // namespace rollnet
