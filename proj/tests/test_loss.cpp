#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rollnet/loss.hpp"

using namespace rollnet;

namespace {

std::mt19937_64 g_rng(99);
double unit() { return static_cast<double>(g_rng() % 1000000) / 1000000.0; }

// scalar triple-loop oracle written independently of the library code:
// probabilities first, max-marginals on probabilities, clamped logs
double loss_oracle(const Tensor4<double>& logits, const Tensor4<double>& labels,
                   const std::vector<std::size_t>& valid) {
    std::size_t N = logits.n(), M = logits.c(), F = logits.h(), Tw = logits.w();
    std::size_t tv = 0;
    for (auto v : valid) tv += v;
    auto bce = [](double p, double y) {
        const double eps = 1e-300;
        return -(y * std::log(std::max(p, eps)) + (1 - y) * std::log(std::max(1 - p, eps)));
    };
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };

    double l_roll = 0, l_p = 0, l_i = 0;
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t t = 0; t < valid[n]; ++t) {
            for (std::size_t m = 0; m < M; ++m)
                for (std::size_t f = 0; f < F; ++f)
                    l_roll += bce(sig(logits.at(n, m, f, t)), labels.at(n, m, f, t));
            for (std::size_t f = 0; f < F; ++f) {
                double pm = 0, ym = 0;
                for (std::size_t m = 0; m < M; ++m) {
                    pm = std::max(pm, sig(logits.at(n, m, f, t)));
                    ym = std::max(ym, labels.at(n, m, f, t));
                }
                l_p += bce(pm, ym);
            }
            for (std::size_t m = 0; m < M; ++m) {
                double pm = 0, ym = 0;
                for (std::size_t f = 0; f < F; ++f) {
                    pm = std::max(pm, sig(logits.at(n, m, f, t)));
                    ym = std::max(ym, labels.at(n, m, f, t));
                }
                l_i += bce(pm, ym);
            }
        }
    }
    // T_v = per-segment valid frame count, averaged over the batch, so the
    // batch loss sums per-segment losses (minibatch-sum convention)
    double ftv = static_cast<double>(tv) / static_cast<double>(N);
    return l_roll / (F * ftv * M) + l_p / (F * ftv) + l_i / (M * ftv);
}

Tensor4<double> random_labels(std::size_t n, std::size_t m, std::size_t f, std::size_t t) {
    Tensor4<double> y(n, m, f, t);
    for (auto& v : y.data) v = static_cast<double>(g_rng() % 2);
    return y;
}

Tensor4<double> random_logits(std::size_t n, std::size_t m, std::size_t f, std::size_t t) {
    Tensor4<double> z(n, m, f, t);
    for (auto& v : z.data) v = 8.0 * unit() - 4.0;
    return z;
}

} // namespace

TEST_CASE("confident correct predictions give near-zero loss") {
    auto labels = random_labels(2, 3, 5, 7);
    Tensor4<double> logits(2, 3, 5, 7);
    for (std::size_t i = 0; i < labels.size(); ++i)
        logits.data[i] = labels.data[i] > 0.5 ? 40.0 : -40.0;
    auto lb = multitask_loss(logits, labels, {7, 7});
    CHECK(lb.total() < 1e-6);
}

TEST_CASE("zero logits make each weighted term ln 2") {
    Tensor4<double> logits(1, 4, 6, 10);
    auto labels = random_labels(1, 4, 6, 10);
    auto lb = multitask_loss(logits, labels, {10});
    CHECK(lb.w_roll * lb.l_roll == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(lb.w_p * lb.l_p == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(lb.w_i * lb.l_i == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(lb.total() == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("weights normalize by per-segment valid frames") {
    Tensor4<double> logits(2, 3, 4, 8);
    Tensor4<double> labels(2, 3, 4, 8);
    // valid {8, 2} -> T_v averages to 5; the batch loss is the sum over
    // segments, not the mean, so weights do not shrink with batch size
    auto lb = multitask_loss(logits, labels, {8, 2});
    CHECK(lb.w_roll == doctest::Approx(1.0 / (4.0 * 5.0 * 3.0)).epsilon(1e-15));
    CHECK(lb.w_p == doctest::Approx(1.0 / (4.0 * 5.0)).epsilon(1e-15));
    CHECK(lb.w_i == doctest::Approx(1.0 / (3.0 * 5.0)).epsilon(1e-15));
}

TEST_CASE("matches the scalar oracle on random inputs") {
    for (int trial = 0; trial < 10; ++trial) {
        auto logits = random_logits(2, 3, 4, 8);
        auto labels = random_labels(2, 3, 4, 8);
        std::vector<std::size_t> valid{8, 1 + g_rng() % 8};
        auto lb = multitask_loss(logits, labels, valid);
        CHECK(lb.total() == doctest::Approx(loss_oracle(logits, labels, valid)).epsilon(1e-9));
    }
}

TEST_CASE("padding frames do not contribute") {
    auto logits = random_logits(1, 3, 4, 8);
    auto labels = random_labels(1, 3, 4, 8);
    auto lb_full = multitask_loss(logits, labels, {5});
    // mutate the invalid tail; loss and gradients must not move
    Tensor4<double> dl1, dl2;
    multitask_loss(logits, labels, {5}, &dl1);
    for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t f = 0; f < 4; ++f)
            for (std::size_t t = 5; t < 8; ++t) {
                logits.at(0, m, f, t) = 100.0;
                labels.at(0, m, f, t) = 1.0;
            }
    auto lb_mut = multitask_loss(logits, labels, {5}, &dl2);
    CHECK(lb_full.total() == doctest::Approx(lb_mut.total()).epsilon(1e-15));
    for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t f = 0; f < 4; ++f) {
            for (std::size_t t = 0; t < 5; ++t)
                CHECK(dl1.at(0, m, f, t) == dl2.at(0, m, f, t));
            for (std::size_t t = 5; t < 8; ++t) CHECK(dl2.at(0, m, f, t) == 0.0);
        }
}

TEST_CASE("gradient matches central finite differences") {
    auto logits = random_logits(1, 3, 4, 6);
    auto labels = random_labels(1, 3, 4, 6);
    std::vector<std::size_t> valid{6};

    Tensor4<double> grad;
    multitask_loss(logits, labels, valid, &grad);

    const double eps = 1e-6;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        double z0 = logits.data[i];
        logits.data[i] = z0 + eps;
        double hi = multitask_loss(logits, labels, valid).total();
        logits.data[i] = z0 - eps;
        double lo = multitask_loss(logits, labels, valid).total();
        logits.data[i] = z0;
        double want = (hi - lo) / (2 * eps);
        CHECK(grad.data[i] == doctest::Approx(want).epsilon(1e-6).scale(1e-3));
    }
}

TEST_CASE("tied maxima split the marginal gradient equally") {
    // two instruments with identical logits at every cell: each gets half of
    // the pitch-marginal gradient on top of its own roll gradient
    Tensor4<double> logits(1, 2, 1, 1);
    Tensor4<double> labels(1, 2, 1, 1);
    logits.data = {0.7, 0.7};
    labels.data = {1.0, 0.0};
    Tensor4<double> grad;
    multitask_loss(logits, labels, {1}, &grad);

    double s = 1.0 / (1.0 + std::exp(-0.7));
    // w_roll = 1/2, w_p = 1, w_i = 1/2 for F=1,Tv=1,M=2
    double roll0 = 0.5 * (s - 1.0), roll1 = 0.5 * s;
    double pitch_share = 1.0 * (s - 1.0) / 2.0; // ymax = 1, split across the tie
    double inst0 = 0.5 * (s - 1.0), inst1 = 0.5 * s; // per-instrument max over F=1
    CHECK(grad.data[0] == doctest::Approx(roll0 + pitch_share + inst0).epsilon(1e-12));
    CHECK(grad.data[1] == doctest::Approx(roll1 + pitch_share + inst1).epsilon(1e-12));
}

TEST_CASE("rejects non-binary labels and bad frame counts") {
    Tensor4<double> logits(1, 2, 2, 2);
    Tensor4<double> labels(1, 2, 2, 2);
    labels.data[0] = 0.5;
    CHECK_THROWS_AS(multitask_loss(logits, labels, {2}), DataError);
    labels.data[0] = 0.0;
    CHECK_THROWS_AS(multitask_loss(logits, labels, {3}), DataError);
    CHECK_THROWS_AS(multitask_loss(logits, labels, {0}), DataError);
    CHECK_THROWS_AS(multitask_loss(logits, labels, {2, 2}), DataError);
}
