#pragma once

#include <cmath>
#include <cstdint>

#include "rollnet/tensor.hpp"

// Data-parallel layer kernels. Every parallel loop writes disjoint output
// slices and keeps a fixed inner summation order, so results are identical
// for any thread count.

namespace rollnet::kern {

namespace detail {

// output positions o in [lo, hi) with 0 <= o*stride + k - pad < limit
inline void valid_range(std::size_t k, std::size_t pad, std::size_t stride, std::size_t limit,
                        std::size_t count, std::size_t& lo, std::size_t& hi) {
    lo = pad > k ? (pad - k + stride - 1) / stride : 0;
    auto top = static_cast<int64_t>(limit - 1 + pad) - static_cast<int64_t>(k);
    hi = top < 0 ? 0 : std::min(count, static_cast<std::size_t>(top) / stride + 1);
}

} // namespace detail

template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& in, const Tensor4<T>& weight,
                          const Tensor4<T>& bias, std::size_t stride, std::size_t pad) {
    std::size_t N = in.n(), Cin = in.c(), H = in.h(), W = in.w();
    std::size_t Cout = weight.n(), KH = weight.h(), KW = weight.w();
    if (weight.c() != Cin) throw ConfigError("conv2d: channel mismatch");
    std::size_t Ho = (H + 2 * pad - KH) / stride + 1;
    std::size_t Wo = (W + 2 * pad - KW) / stride + 1;
    Tensor4<T> out(N, Cout, Ho, Wo);

#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < static_cast<int64_t>(N); ++n) {
        for (int64_t oc = 0; oc < static_cast<int64_t>(Cout); ++oc) {
            T* o = &out.data[out.idx(static_cast<std::size_t>(n), static_cast<std::size_t>(oc), 0, 0)];
            T b = bias.data[static_cast<std::size_t>(oc)];
            for (std::size_t i = 0; i < Ho * Wo; ++i) o[i] = b;
            for (std::size_t ic = 0; ic < Cin; ++ic) {
                const T* x = &in.data[in.idx(static_cast<std::size_t>(n), ic, 0, 0)];
                for (std::size_t ky = 0; ky < KH; ++ky) {
                    for (std::size_t kx = 0; kx < KW; ++kx) {
                        T wv = weight.at(static_cast<std::size_t>(oc), ic, ky, kx);
                        if (wv == T(0)) continue;
                        std::size_t oh_lo, oh_hi, ow_lo, ow_hi;
                        detail::valid_range(ky, pad, stride, H, Ho, oh_lo, oh_hi);
                        detail::valid_range(kx, pad, stride, W, Wo, ow_lo, ow_hi);
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            T* orow = o + oh * Wo;
                            // unsigned wrap-around cancels for in-range ow
                            const T* xrow = x + (oh * stride + ky - pad) * W;
                            if (stride == 1) {
                                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                                    orow[ow] += wv * xrow[ow + kx - pad];
                            } else {
                                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                                    orow[ow] += wv * xrow[ow * stride + kx - pad];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <class T>
Tensor4<T> conv2d_backward_input(const Tensor4<T>& dout, const Tensor4<T>& weight,
                                 std::size_t stride, std::size_t pad, std::size_t H,
                                 std::size_t W) {
    std::size_t N = dout.n(), Cout = dout.c(), Ho = dout.h(), Wo = dout.w();
    std::size_t Cin = weight.c(), KH = weight.h(), KW = weight.w();
    Tensor4<T> din(N, Cin, H, W);

#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < static_cast<int64_t>(N); ++n) {
        for (int64_t ic = 0; ic < static_cast<int64_t>(Cin); ++ic) {
            T* d = &din.data[din.idx(static_cast<std::size_t>(n), static_cast<std::size_t>(ic), 0, 0)];
            for (std::size_t oc = 0; oc < Cout; ++oc) {
                const T* g = &dout.data[dout.idx(static_cast<std::size_t>(n), oc, 0, 0)];
                for (std::size_t ky = 0; ky < KH; ++ky) {
                    for (std::size_t kx = 0; kx < KW; ++kx) {
                        T wv = weight.at(oc, static_cast<std::size_t>(ic), ky, kx);
                        if (wv == T(0)) continue;
                        std::size_t oh_lo, oh_hi, ow_lo, ow_hi;
                        detail::valid_range(ky, pad, stride, H, Ho, oh_lo, oh_hi);
                        detail::valid_range(kx, pad, stride, W, Wo, ow_lo, ow_hi);
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const T* grow = g + oh * Wo;
                            T* drow = d + (oh * stride + ky - pad) * W;
                            if (stride == 1) {
                                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                                    drow[ow + kx - pad] += wv * grow[ow];
                            } else {
                                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                                    drow[ow * stride + kx - pad] += wv * grow[ow];
                            }
                        }
                    }
                }
            }
        }
    }
    return din;
}

template <class T>
void conv2d_backward_params(const Tensor4<T>& in, const Tensor4<T>& dout, std::size_t stride,
                            std::size_t pad, Tensor4<T>& dweight, Tensor4<T>& dbias) {
    std::size_t N = in.n(), Cin = in.c(), H = in.h(), W = in.w();
    std::size_t Cout = dout.c(), Ho = dout.h(), Wo = dout.w();
    std::size_t KH = dweight.h(), KW = dweight.w();

#pragma omp parallel for schedule(static)
    for (int64_t oc = 0; oc < static_cast<int64_t>(Cout); ++oc) {
        T bsum = T(0);
        for (std::size_t n = 0; n < N; ++n) {
            const T* g = &dout.data[dout.idx(n, static_cast<std::size_t>(oc), 0, 0)];
            for (std::size_t i = 0; i < Ho * Wo; ++i) bsum += g[i];
        }
        dbias.data[static_cast<std::size_t>(oc)] = bsum;
        for (std::size_t ic = 0; ic < Cin; ++ic) {
            for (std::size_t ky = 0; ky < KH; ++ky) {
                for (std::size_t kx = 0; kx < KW; ++kx) {
                    T acc = T(0);
                    std::size_t oh_lo, oh_hi, ow_lo, ow_hi;
                    detail::valid_range(ky, pad, stride, H, Ho, oh_lo, oh_hi);
                    detail::valid_range(kx, pad, stride, W, Wo, ow_lo, ow_hi);
                    for (std::size_t n = 0; n < N; ++n) {
                        const T* x = &in.data[in.idx(n, ic, 0, 0)];
                        const T* g = &dout.data[dout.idx(n, static_cast<std::size_t>(oc), 0, 0)];
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const T* grow = g + oh * Wo;
                            const T* xrow = x + (oh * stride + ky - pad) * W;
                            if (stride == 1) {
                                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                                    acc += xrow[ow + kx - pad] * grow[ow];
                            } else {
                                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                                    acc += xrow[ow * stride + kx - pad] * grow[ow];
                            }
                        }
                    }
                    dweight.at(static_cast<std::size_t>(oc), ic, ky, kx) = acc;
                }
            }
        }
    }
}

template <class T>
struct BatchNormCache {
    Tensor4<T> input;
    std::vector<T> mean, invstd;
};

// Train-mode batch norm; normalizes with biased batch variance and folds
// the batch statistics into the running estimates.
template <class T>
Tensor4<T> batchnorm_forward_train(const Tensor4<T>& in, const std::vector<T>& gamma,
                                   const std::vector<T>& beta, std::vector<T>& running_mean,
                                   std::vector<T>& running_var, T eps, T momentum,
                                   BatchNormCache<T>& cache) {
    std::size_t N = in.n(), C = in.c(), HW = in.h() * in.w();
    if (N * HW < 2) throw NumericError("batchnorm: batch too small for batch statistics");
    Tensor4<T> out(in.n(), in.c(), in.h(), in.w());
    cache.input = in;
    cache.mean.assign(C, T(0));
    cache.invstd.assign(C, T(0));
    auto count = static_cast<T>(N * HW);

#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < static_cast<int64_t>(C); ++c) {
        auto cc = static_cast<std::size_t>(c);
        T sum = T(0);
        for (std::size_t n = 0; n < N; ++n) {
            const T* x = &in.data[in.idx(n, cc, 0, 0)];
            for (std::size_t i = 0; i < HW; ++i) sum += x[i];
        }
        T mean = sum / count;
        T var = T(0);
        for (std::size_t n = 0; n < N; ++n) {
            const T* x = &in.data[in.idx(n, cc, 0, 0)];
            for (std::size_t i = 0; i < HW; ++i) var += (x[i] - mean) * (x[i] - mean);
        }
        var /= count;
        T invstd = T(1) / std::sqrt(var + eps);
        cache.mean[cc] = mean;
        cache.invstd[cc] = invstd;

        T unbiased = var * count / (count - T(1));
        running_mean[cc] = (T(1) - momentum) * running_mean[cc] + momentum * mean;
        running_var[cc] = (T(1) - momentum) * running_var[cc] + momentum * unbiased;

        for (std::size_t n = 0; n < N; ++n) {
            const T* x = &in.data[in.idx(n, cc, 0, 0)];
            T* y = &out.data[out.idx(n, cc, 0, 0)];
            for (std::size_t i = 0; i < HW; ++i)
                y[i] = gamma[cc] * (x[i] - mean) * invstd + beta[cc];
        }
    }
    return out;
}

template <class T>
Tensor4<T> batchnorm_forward_infer(const Tensor4<T>& in, const std::vector<T>& gamma,
                                   const std::vector<T>& beta,
                                   const std::vector<T>& running_mean,
                                   const std::vector<T>& running_var, T eps) {
    std::size_t N = in.n(), C = in.c(), HW = in.h() * in.w();
    Tensor4<T> out(in.n(), in.c(), in.h(), in.w());
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < static_cast<int64_t>(C); ++c) {
        auto cc = static_cast<std::size_t>(c);
        T invstd = T(1) / std::sqrt(running_var[cc] + eps);
        for (std::size_t n = 0; n < N; ++n) {
            const T* x = &in.data[in.idx(n, cc, 0, 0)];
            T* y = &out.data[out.idx(n, cc, 0, 0)];
            for (std::size_t i = 0; i < HW; ++i)
                y[i] = gamma[cc] * (x[i] - running_mean[cc]) * invstd + beta[cc];
        }
    }
    return out;
}

// Exact gradient through the batch statistics.
template <class T>
Tensor4<T> batchnorm_backward(const Tensor4<T>& dout, const BatchNormCache<T>& cache,
                              const std::vector<T>& gamma, std::vector<T>& dgamma,
                              std::vector<T>& dbeta) {
    const Tensor4<T>& in = cache.input;
    std::size_t N = in.n(), C = in.c(), HW = in.h() * in.w();
    Tensor4<T> din(in.n(), in.c(), in.h(), in.w());
    auto count = static_cast<T>(N * HW);

#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < static_cast<int64_t>(C); ++c) {
        auto cc = static_cast<std::size_t>(c);
        T mean = cache.mean[cc], invstd = cache.invstd[cc];
        T sum_dy = T(0), sum_dy_xhat = T(0);
        for (std::size_t n = 0; n < N; ++n) {
            const T* x = &in.data[in.idx(n, cc, 0, 0)];
            const T* g = &dout.data[dout.idx(n, cc, 0, 0)];
            for (std::size_t i = 0; i < HW; ++i) {
                T xhat = (x[i] - mean) * invstd;
                sum_dy += g[i];
                sum_dy_xhat += g[i] * xhat;
            }
        }
        dgamma[cc] = sum_dy_xhat;
        dbeta[cc] = sum_dy;
        T k = gamma[cc] * invstd / count;
        for (std::size_t n = 0; n < N; ++n) {
            const T* x = &in.data[in.idx(n, cc, 0, 0)];
            const T* g = &dout.data[dout.idx(n, cc, 0, 0)];
            T* d = &din.data[din.idx(n, cc, 0, 0)];
            for (std::size_t i = 0; i < HW; ++i) {
                T xhat = (x[i] - mean) * invstd;
                d[i] = k * (count * g[i] - sum_dy - xhat * sum_dy_xhat);
            }
        }
    }
    return din;
}

template <class T>
Tensor4<T> leaky_relu_forward(const Tensor4<T>& in, T slope) {
    Tensor4<T> out(in.n(), in.c(), in.h(), in.w());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(in.size()); ++i) {
        T x = in.data[static_cast<std::size_t>(i)];
        out.data[static_cast<std::size_t>(i)] = x > T(0) ? x : slope * x;
    }
    return out;
}

template <class T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& dout, const Tensor4<T>& in, T slope) {
    Tensor4<T> din(in.n(), in.c(), in.h(), in.w());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(in.size()); ++i) {
        auto ii = static_cast<std::size_t>(i);
        din.data[ii] = in.data[ii] > T(0) ? dout.data[ii] : slope * dout.data[ii];
    }
    return din;
}

template <class T>
Tensor4<T> upsample2x_forward(const Tensor4<T>& in) {
    std::size_t N = in.n(), C = in.c(), H = in.h(), W = in.w();
    Tensor4<T> out(N, C, 2 * H, 2 * W);
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < static_cast<int64_t>(N); ++n)
        for (int64_t c = 0; c < static_cast<int64_t>(C); ++c)
            for (std::size_t h = 0; h < 2 * H; ++h)
                for (std::size_t w = 0; w < 2 * W; ++w)
                    out.at(static_cast<std::size_t>(n), static_cast<std::size_t>(c), h, w) =
                        in.at(static_cast<std::size_t>(n), static_cast<std::size_t>(c), h / 2,
                              w / 2);
    return out;
}

template <class T>
Tensor4<T> upsample2x_backward(const Tensor4<T>& dout) {
    std::size_t N = dout.n(), C = dout.c(), H = dout.h() / 2, W = dout.w() / 2;
    Tensor4<T> din(N, C, H, W);
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < static_cast<int64_t>(N); ++n)
        for (int64_t c = 0; c < static_cast<int64_t>(C); ++c)
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t w = 0; w < W; ++w) {
                    T s = T(0);
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx)
                            s += dout.at(static_cast<std::size_t>(n),
                                         static_cast<std::size_t>(c), 2 * h + dy, 2 * w + dx);
                    din.at(static_cast<std::size_t>(n), static_cast<std::size_t>(c), h, w) = s;
                }
    return din;
}

// Zero-pad rows (the frequency axis) at the top end: H -> H + extra.
template <class T>
Tensor4<T> pad_rows(const Tensor4<T>& in, std::size_t extra) {
    Tensor4<T> out(in.n(), in.c(), in.h() + extra, in.w());
    for (std::size_t n = 0; n < in.n(); ++n)
        for (std::size_t c = 0; c < in.c(); ++c)
            for (std::size_t h = 0; h < in.h(); ++h)
                for (std::size_t w = 0; w < in.w(); ++w)
                    out.at(n, c, h, w) = in.at(n, c, h, w);
    return out;
}

template <class T>
Tensor4<T> crop_rows(const Tensor4<T>& in, std::size_t rows) {
    Tensor4<T> out(in.n(), in.c(), rows, in.w());
    for (std::size_t n = 0; n < in.n(); ++n)
        for (std::size_t c = 0; c < in.c(); ++c)
            for (std::size_t h = 0; h < rows; ++h)
                for (std::size_t w = 0; w < in.w(); ++w)
                    out.at(n, c, h, w) = in.at(n, c, h, w);
    return out;
}

template <class T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
        throw ConfigError("concat: spatial shape mismatch");
    Tensor4<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
    std::size_t hw = a.h() * a.w();
    for (std::size_t n = 0; n < a.n(); ++n) {
        for (std::size_t c = 0; c < a.c(); ++c)
            std::copy_n(&a.data[a.idx(n, c, 0, 0)], hw, &out.data[out.idx(n, c, 0, 0)]);
        for (std::size_t c = 0; c < b.c(); ++c)
            std::copy_n(&b.data[b.idx(n, c, 0, 0)], hw, &out.data[out.idx(n, a.c() + c, 0, 0)]);
    }
    return out;
}

template <class T>
void split_channels(const Tensor4<T>& dout, Tensor4<T>& da, Tensor4<T>& db) {
    std::size_t hw = dout.h() * dout.w();
    for (std::size_t n = 0; n < dout.n(); ++n) {
        for (std::size_t c = 0; c < da.c(); ++c)
            std::copy_n(&dout.data[dout.idx(n, c, 0, 0)], hw, &da.data[da.idx(n, c, 0, 0)]);
        for (std::size_t c = 0; c < db.c(); ++c)
            std::copy_n(&dout.data[dout.idx(n, da.c() + c, 0, 0)], hw,
                        &db.data[db.idx(n, c, 0, 0)]);
    }
}

template <class T>
void add_inplace(Tensor4<T>& a, const Tensor4<T>& b) {
    if (!a.same_shape(b)) throw ConfigError("add: shape mismatch");
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(a.size()); ++i)
        a.data[static_cast<std::size_t>(i)] += b.data[static_cast<std::size_t>(i)];
}

template <class T>
T sigmoid(T z) {
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    T e = std::exp(z);
    return e / (T(1) + e);
}

namespace ref {

// Naive serial convolution, the reference the parallel kernel is tested
// and benchmarked against.
template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& in, const Tensor4<T>& weight,
                          const Tensor4<T>& bias, std::size_t stride, std::size_t pad) {
    std::size_t N = in.n(), Cin = in.c(), H = in.h(), W = in.w();
    std::size_t Cout = weight.n(), KH = weight.h(), KW = weight.w();
    std::size_t Ho = (H + 2 * pad - KH) / stride + 1;
    std::size_t Wo = (W + 2 * pad - KW) / stride + 1;
    Tensor4<T> out(N, Cout, Ho, Wo);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t oc = 0; oc < Cout; ++oc)
            for (std::size_t oh = 0; oh < Ho; ++oh)
                for (std::size_t ow = 0; ow < Wo; ++ow) {
                    T acc = bias.data[oc];
                    for (std::size_t ic = 0; ic < Cin; ++ic)
                        for (std::size_t ky = 0; ky < KH; ++ky)
                            for (std::size_t kx = 0; kx < KW; ++kx) {
                                int64_t ih = static_cast<int64_t>(oh * stride + ky) -
                                             static_cast<int64_t>(pad);
                                int64_t iw = static_cast<int64_t>(ow * stride + kx) -
                                             static_cast<int64_t>(pad);
                                if (ih < 0 || ih >= static_cast<int64_t>(H) || iw < 0 ||
                                    iw >= static_cast<int64_t>(W))
                                    continue;
                                acc += in.at(n, ic, static_cast<std::size_t>(ih),
                                             static_cast<std::size_t>(iw)) *
                                       weight.at(oc, ic, ky, kx);
                            }
                    out.at(n, oc, oh, ow) = acc;
                }
    return out;
}

} // namespace ref

} // namespace rollnet::kern
