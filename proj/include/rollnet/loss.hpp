#pragma once

#include <cmath>
#include <vector>

#include "rollnet/kernels.hpp"
#include "rollnet/tensor.hpp"

namespace rollnet {

// The three BCE sums plus their range-equalizing weights. At zero logits
// every weighted term equals ln 2.
struct LossBreakdown {
    double l_roll = 0, l_p = 0, l_i = 0; // raw sums over valid cells
    double w_roll = 0, w_p = 0, w_i = 0;

    double total() const { return w_roll * l_roll + w_p * l_p + w_i * l_i; }
};

namespace detail {

template <class T>
T softplus(T z) {
    return std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
}

// BCE against a sigmoid of the logit, in the numerically stable form.
template <class T>
T bce_with_logit(T z, T y) {
    return softplus(z) - z * y;
}

} // namespace detail

// logits, labels: (N, M, F, T); labels binary; valid_frames[n] = number of
// real frames in segment n (a prefix of the time axis). The pitch marginal
// uses max over m and the instrument marginal max over f, both computed on
// logits (max commutes with the sigmoid). The marginal gradients route to
// the argmax cells, split equally on ties. If dlogits is non-null it
// receives d(total)/dz.
template <class T>
LossBreakdown multitask_loss(const Tensor4<T>& logits, const Tensor4<T>& labels,
                             const std::vector<std::size_t>& valid_frames,
                             Tensor4<T>* dlogits = nullptr) {
    if (!logits.same_shape(labels)) throw DataError("loss: logits/labels shape mismatch");
    std::size_t N = logits.n(), M = logits.c(), F = logits.h(), Tw = logits.w();
    if (valid_frames.size() != N) throw DataError("loss: one valid-frame count per segment");
    for (T y : labels.data)
        if (y != T(0) && y != T(1)) throw DataError("loss: labels must be binary");

    std::size_t total_valid = 0;
    for (auto v : valid_frames) {
        if (v > Tw) throw DataError("loss: valid frames exceed segment length");
        total_valid += v;
    }
    if (total_valid == 0) throw DataError("loss: no valid frames");

    LossBreakdown out;
    // T_v is the per-segment valid frame count (batch average); the batch
    // loss is the sum of per-segment losses, so the gradient scales with
    // the number of segments as in classical minibatch SGD.
    double tv = static_cast<double>(total_valid) / static_cast<double>(N);
    out.w_roll = 1.0 / (static_cast<double>(F) * tv * static_cast<double>(M));
    out.w_p = 1.0 / (static_cast<double>(F) * tv);
    out.w_i = 1.0 / (static_cast<double>(M) * tv);

    if (dlogits) {
        *dlogits = Tensor4<T>(N, M, F, Tw);
    }

    for (std::size_t n = 0; n < N; ++n) {
        std::size_t Tv = valid_frames[n];
        // roll term
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t f = 0; f < F; ++f)
                for (std::size_t t = 0; t < Tv; ++t) {
                    T z = logits.at(n, m, f, t), y = labels.at(n, m, f, t);
                    out.l_roll += static_cast<double>(detail::bce_with_logit(z, y));
                    if (dlogits)
                        dlogits->at(n, m, f, t) =
                            static_cast<T>(out.w_roll) * (kern::sigmoid(z) - y);
                }
        // pitch marginal: max over m
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t t = 0; t < Tv; ++t) {
                T zmax = logits.at(n, 0, f, t);
                T ymax = labels.at(n, 0, f, t);
                for (std::size_t m = 1; m < M; ++m) {
                    zmax = std::max(zmax, logits.at(n, m, f, t));
                    ymax = std::max(ymax, labels.at(n, m, f, t));
                }
                out.l_p += static_cast<double>(detail::bce_with_logit(zmax, ymax));
                if (dlogits) {
                    std::size_t ties = 0;
                    for (std::size_t m = 0; m < M; ++m)
                        if (logits.at(n, m, f, t) == zmax) ++ties;
                    T g = static_cast<T>(out.w_p) * (kern::sigmoid(zmax) - ymax) /
                          static_cast<T>(ties);
                    for (std::size_t m = 0; m < M; ++m)
                        if (logits.at(n, m, f, t) == zmax) dlogits->at(n, m, f, t) += g;
                }
            }
        // instrument marginal: max over f
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t t = 0; t < Tv; ++t) {
                T zmax = logits.at(n, m, 0, t);
                T ymax = labels.at(n, m, 0, t);
                for (std::size_t f = 1; f < F; ++f) {
                    zmax = std::max(zmax, logits.at(n, m, f, t));
                    ymax = std::max(ymax, labels.at(n, m, f, t));
                }
                out.l_i += static_cast<double>(detail::bce_with_logit(zmax, ymax));
                if (dlogits) {
                    std::size_t ties = 0;
                    for (std::size_t f = 0; f < F; ++f)
                        if (logits.at(n, m, f, t) == zmax) ++ties;
                    T g = static_cast<T>(out.w_i) * (kern::sigmoid(zmax) - ymax) /
                          static_cast<T>(ties);
                    for (std::size_t f = 0; f < F; ++f)
                        if (logits.at(n, m, f, t) == zmax) dlogits->at(n, m, f, t) += g;
                }
            }
    }
    return out;
}

} // namespace rollnet
