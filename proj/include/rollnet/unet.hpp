#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rollnet/kernels.hpp"
#include "rollnet/tensor.hpp"

namespace rollnet {

struct ModelConfig {
    std::vector<std::size_t> widths{16, 32, 64, 128}; // encoder channel widths
    std::size_t instruments = 8;                      // M, output channels
    std::size_t in_rows = 88;                         // frequency bins
    std::size_t frames = 320;                         // segment length
    double leaky_slope = 0.2;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;
    uint64_t init_seed = 1;

    std::size_t levels() const { return widths.size(); }

    // rows padded up to a multiple of 2^levels so every downsampling halves
    std::size_t padded_rows() const {
        std::size_t unit = std::size_t{1} << levels();
        return ((in_rows + unit - 1) / unit) * unit;
    }

    void validate() const {
        if (widths.empty()) throw ConfigError("model: at least one encoder level required");
        if (instruments < 1) throw ConfigError("model: M must be >= 1");
        std::size_t unit = std::size_t{1} << levels();
        if (frames % unit != 0)
            throw ConfigError("model: frames must be divisible by 2^levels");
        for (auto w : widths)
            if (w == 0) throw ConfigError("model: zero channel width");
    }
};

// Ordered name -> tensor map. Order is fixed at construction and shared by
// the checkpoint format, SGD, and gradient reductions.
template <class T>
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor4<T>> tensors;
    std::map<std::string, std::size_t> index;

    void add(const std::string& name, Tensor4<T> t) {
        if (index.count(name)) throw ConfigError("params: duplicate name " + name);
        index[name] = names.size();
        names.push_back(name);
        tensors.push_back(std::move(t));
    }
    Tensor4<T>& get(const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw ConfigError("params: missing " + name);
        return tensors[it->second];
    }
    const Tensor4<T>& get(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw ConfigError("params: missing " + name);
        return tensors[it->second];
    }
    bool has(const std::string& name) const { return index.count(name) != 0; }
    std::size_t size() const { return names.size(); }

    ParamSet zeros_like() const {
        ParamSet out;
        for (std::size_t i = 0; i < names.size(); ++i) {
            const auto& s = tensors[i].shape;
            out.add(names[i], Tensor4<T>(s[0], s[1], s[2], s[3]));
        }
        return out;
    }

    template <class U>
    ParamSet<U> cast() const {
        ParamSet<U> out;
        for (std::size_t i = 0; i < names.size(); ++i)
            out.add(names[i], tensors[i].template cast<U>());
        return out;
    }

    // running batch-norm statistics are state, not learnable weights
    static bool is_learnable(const std::string& name) {
        return name.find("running_") == std::string::npos;
    }
};

namespace detail {

// Box-Muller on raw 53-bit uniforms; identical streams on every platform.
template <class T>
class SeededNormal {
public:
    explicit SeededNormal(uint64_t seed) : rng_(seed) {}
    T operator()() {
        double u1 = (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
        double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return static_cast<T>(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2));
    }

private:
    std::mt19937_64 rng_;
};

} // namespace detail

template <class T>
class UNet {
public:
    ModelConfig cfg;
    ParamSet<T> params;

    static UNet init(const ModelConfig& cfg) {
        cfg.validate();
        UNet net;
        net.cfg = cfg;
        detail::SeededNormal<T> normal(cfg.init_seed);

        auto conv = [&](const std::string& name, std::size_t cout, std::size_t cin,
                        std::size_t k) {
            Tensor4<T> w(cout, cin, k, k);
            T std_dev = std::sqrt(T(2) / static_cast<T>(cin * k * k));
            for (auto& v : w.data) v = normal() * std_dev;
            net.params.add(name + ".w", std::move(w));
            net.params.add(name + ".b", Tensor4<T>(cout, 1, 1, 1));
        };
        auto bn = [&](const std::string& name, std::size_t c) {
            Tensor4<T> gamma(c, 1, 1, 1);
            gamma.fill(T(1));
            Tensor4<T> var(c, 1, 1, 1);
            var.fill(T(1));
            net.params.add(name + ".gamma", std::move(gamma));
            net.params.add(name + ".beta", Tensor4<T>(c, 1, 1, 1));
            net.params.add(name + ".running_mean", Tensor4<T>(c, 1, 1, 1));
            net.params.add(name + ".running_var", std::move(var));
        };
        auto block = [&](const std::string& name, std::size_t cin, std::size_t cout) {
            conv(name + ".conv1", cout, cin, 3);
            bn(name + ".bn1", cout);
            conv(name + ".conv2", cout, cout, 3);
            bn(name + ".bn2", cout);
            conv(name + ".conv3", cout, cout, 3);
            conv(name + ".skip", cout, cin, 1);
        };

        std::size_t L = cfg.levels();
        std::size_t cin = 1;
        for (std::size_t i = 0; i < L; ++i) {
            block("enc" + std::to_string(i), cin, cfg.widths[i]);
            cin = cfg.widths[i];
        }
        for (std::size_t j = 0; j < L; ++j) {
            std::size_t skip_c = j + 1 < L ? cfg.widths[L - 2 - j] : 1; // last skip is the input
            std::size_t cout = j + 1 < L ? cfg.widths[L - 2 - j] : cfg.widths[0];
            block("dec" + std::to_string(j), cin + skip_c, cout);
            cin = cout;
        }
        conv("head", cfg.instruments, cin, 1);
        // bias the head toward silence: rolls are sparse
        net.params.get("head.b").fill(T(-2));
        return net;
    }

    // x: (N, 1, in_rows, frames) -> logits (N, M, in_rows, frames).
    // Train mode caches activations for backward and updates running stats.
    Tensor4<T> forward(const Tensor4<T>& x, bool train) {
        if (x.c() != 1 || x.h() != cfg.in_rows || x.w() != cfg.frames)
            throw ConfigError("unet: input shape mismatch");
        cache_ = Cache{};
        cache_.train = train;

        Tensor4<T> padded = kern::pad_rows(x, cfg.padded_rows() - cfg.in_rows);
        cache_.input = padded;

        std::size_t L = cfg.levels();
        std::vector<Tensor4<T>> enc_out;
        Tensor4<T> cur = padded;
        for (std::size_t i = 0; i < L; ++i) {
            cur = block_forward("enc" + std::to_string(i), cur, 2, train);
            enc_out.push_back(cur);
        }
        for (std::size_t j = 0; j < L; ++j) {
            Tensor4<T> up = kern::upsample2x_forward(cur);
            const Tensor4<T>& skip = j + 1 < L ? enc_out[L - 2 - j] : padded;
            Tensor4<T> cat = kern::concat_channels(up, skip);
            if (train) cache_.dec_up_channels.push_back(up.c());
            cur = block_forward("dec" + std::to_string(j), cat, 1, train);
        }
        if (train) cache_.head_in = cur;
        Tensor4<T> logits = kern::conv2d_forward(cur, params.get("head.w"),
                                                 params.get("head.b"), 1, 0);
        cache_.valid = train;
        return kern::crop_rows(logits, cfg.in_rows);
    }

    // Gradients for every learnable parameter; requires a cached train-mode
    // forward on the same input.
    ParamSet<T> backward(const Tensor4<T>& dlogits) {
        if (!cache_.valid) throw Error("unet: backward without cached train-mode forward");
        cache_.valid = false;
        ParamSet<T> grads = params.zeros_like();

        Tensor4<T> d = kern::pad_rows(dlogits, cfg.padded_rows() - cfg.in_rows);
        // head
        {
            auto& dw = grads.get("head.w");
            auto& db = grads.get("head.b");
            kern::conv2d_backward_params(cache_.head_in, d, 1, 0, dw, db);
            d = kern::conv2d_backward_input(d, params.get("head.w"), 1, 0,
                                            cache_.head_in.h(), cache_.head_in.w());
        }

        std::size_t L = cfg.levels();
        std::vector<Tensor4<T>> enc_grad(L); // accumulated via skip connections
        for (std::size_t j = L; j-- > 0;) {
            Tensor4<T> dcat = block_backward("dec" + std::to_string(j), d, 1, grads);
            std::size_t up_c = cache_.dec_up_channels[j];
            Tensor4<T> dup(dcat.n(), up_c, dcat.h(), dcat.w());
            Tensor4<T> dskip(dcat.n(), dcat.c() - up_c, dcat.h(), dcat.w());
            kern::split_channels(dcat, dup, dskip);
            if (j + 1 < L)
                enc_grad[L - 2 - j] = std::move(dskip);
            else
                cache_.dinput = std::move(dskip); // gradient w.r.t. padded input
            d = kern::upsample2x_backward(dup);
        }
        for (std::size_t i = L; i-- > 0;) {
            if (i + 1 < L && enc_grad[i].size() > 0) kern::add_inplace(d, enc_grad[i]);
            d = block_backward("enc" + std::to_string(i), d, 2, grads);
        }
        return grads;
    }

private:
    struct BlockCache {
        Tensor4<T> x, a1, a2;          // conv inputs
        Tensor4<T> b1, b2;             // leaky-relu inputs
        kern::BatchNormCache<T> bn1, bn2;
    };
    struct Cache {
        bool train = false;
        bool valid = false;
        Tensor4<T> input;
        Tensor4<T> head_in;
        Tensor4<T> dinput;
        std::vector<std::size_t> dec_up_channels;
        std::map<std::string, BlockCache> blocks;
    };
    Cache cache_;

    Tensor4<T> block_forward(const std::string& name, const Tensor4<T>& x, std::size_t stride,
                             bool train) {
        auto slope = static_cast<T>(cfg.leaky_slope);
        auto eps = static_cast<T>(cfg.bn_eps);
        auto momentum = static_cast<T>(cfg.bn_momentum);
        BlockCache bc;

        Tensor4<T> z1 = kern::conv2d_forward(x, params.get(name + ".conv1.w"),
                                             params.get(name + ".conv1.b"), stride, 1);
        Tensor4<T> b1 = train
            ? kern::batchnorm_forward_train(z1, params.get(name + ".bn1.gamma").data,
                                            params.get(name + ".bn1.beta").data,
                                            params.get(name + ".bn1.running_mean").data,
                                            params.get(name + ".bn1.running_var").data, eps,
                                            momentum, bc.bn1)
            : kern::batchnorm_forward_infer(z1, params.get(name + ".bn1.gamma").data,
                                            params.get(name + ".bn1.beta").data,
                                            params.get(name + ".bn1.running_mean").data,
                                            params.get(name + ".bn1.running_var").data, eps);
        Tensor4<T> a1 = kern::leaky_relu_forward(b1, slope);
        Tensor4<T> z2 = kern::conv2d_forward(a1, params.get(name + ".conv2.w"),
                                             params.get(name + ".conv2.b"), 1, 1);
        Tensor4<T> b2 = train
            ? kern::batchnorm_forward_train(z2, params.get(name + ".bn2.gamma").data,
                                            params.get(name + ".bn2.beta").data,
                                            params.get(name + ".bn2.running_mean").data,
                                            params.get(name + ".bn2.running_var").data, eps,
                                            momentum, bc.bn2)
            : kern::batchnorm_forward_infer(z2, params.get(name + ".bn2.gamma").data,
                                            params.get(name + ".bn2.beta").data,
                                            params.get(name + ".bn2.running_mean").data,
                                            params.get(name + ".bn2.running_var").data, eps);
        Tensor4<T> a2 = kern::leaky_relu_forward(b2, slope);
        Tensor4<T> out = kern::conv2d_forward(a2, params.get(name + ".conv3.w"),
                                              params.get(name + ".conv3.b"), 1, 1);
        Tensor4<T> sc = kern::conv2d_forward(x, params.get(name + ".skip.w"),
                                             params.get(name + ".skip.b"), stride, 0);
        kern::add_inplace(out, sc);

        if (train) {
            bc.x = x;
            bc.b1 = std::move(b1);
            bc.a1 = std::move(a1);
            bc.b2 = std::move(b2);
            bc.a2 = std::move(a2);
            cache_.blocks[name] = std::move(bc);
        }
        return out;
    }

    Tensor4<T> block_backward(const std::string& name, const Tensor4<T>& dout,
                              std::size_t stride, ParamSet<T>& grads) {
        auto slope = static_cast<T>(cfg.leaky_slope);
        BlockCache& bc = cache_.blocks.at(name);

        // shortcut branch
        kern::conv2d_backward_params(bc.x, dout, stride, 0, grads.get(name + ".skip.w"),
                                     grads.get(name + ".skip.b"));
        Tensor4<T> dx = kern::conv2d_backward_input(dout, params.get(name + ".skip.w"), stride,
                                                    0, bc.x.h(), bc.x.w());
        // main branch
        kern::conv2d_backward_params(bc.a2, dout, 1, 1, grads.get(name + ".conv3.w"),
                                     grads.get(name + ".conv3.b"));
        Tensor4<T> da2 = kern::conv2d_backward_input(dout, params.get(name + ".conv3.w"), 1, 1,
                                                     bc.a2.h(), bc.a2.w());
        Tensor4<T> db2 = kern::leaky_relu_backward(da2, bc.b2, slope);
        Tensor4<T> dz2 = kern::batchnorm_backward(db2, bc.bn2, params.get(name + ".bn2.gamma").data,
                                                  grads.get(name + ".bn2.gamma").data,
                                                  grads.get(name + ".bn2.beta").data);
        kern::conv2d_backward_params(bc.a1, dz2, 1, 1, grads.get(name + ".conv2.w"),
                                     grads.get(name + ".conv2.b"));
        Tensor4<T> da1 = kern::conv2d_backward_input(dz2, params.get(name + ".conv2.w"), 1, 1,
                                                     bc.a1.h(), bc.a1.w());
        Tensor4<T> db1 = kern::leaky_relu_backward(da1, bc.b1, slope);
        Tensor4<T> dz1 = kern::batchnorm_backward(db1, bc.bn1, params.get(name + ".bn1.gamma").data,
                                                  grads.get(name + ".bn1.gamma").data,
                                                  grads.get(name + ".bn1.beta").data);
        kern::conv2d_backward_params(bc.x, dz1, stride, 1, grads.get(name + ".conv1.w"),
                                     grads.get(name + ".conv1.b"));
        Tensor4<T> dx_main = kern::conv2d_backward_input(dz1, params.get(name + ".conv1.w"),
                                                         stride, 1, bc.x.h(), bc.x.w());
        kern::add_inplace(dx, dx_main);
        return dx;
    }
};

} // namespace rollnet
