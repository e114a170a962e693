#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rollnet/eval.hpp"

using namespace rollnet;

namespace {

std::mt19937_64 g_rng(31);

// all-pairs AUC oracle: P(score_pos > score_neg) + 0.5 * P(equal)
double auc_oracle(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    double wins = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (!(labels[i] == 1 && labels[j] == 0)) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    return wins / static_cast<double>(pairs);
}

Counts count_oracle(const std::vector<float>& pred, const std::vector<float>& truth) {
    Counts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        bool p = pred[i] != 0.0f, t = truth[i] != 0.0f;
        if (p && t) ++c.tp;
        if (p && !t) ++c.fp;
        if (!p && t) ++c.fn;
    }
    return c;
}

} // namespace

TEST_CASE("frame accuracy: hand example 2/(2+1+1)") {
    PitchRoll pred(2, 2), truth(2, 2);
    // truth active: (0,0),(1,0),(0,1); pred active: (0,0),(1,0),(1,1)
    truth.at(0, 0) = 1;
    truth.at(1, 0) = 1;
    truth.at(0, 1) = 1;
    pred.at(0, 0) = 1;
    pred.at(1, 0) = 1;
    pred.at(1, 1) = 1;
    CHECK(frame_accuracy(pred, truth) == doctest::Approx(2.0 / 4.0));
}

TEST_CASE("frame accuracy edge cases") {
    PitchRoll a(3, 4), b(3, 4);
    CHECK(frame_accuracy(a, b) == 1.0); // both empty
    a.at(0, 0) = 1;
    CHECK(frame_accuracy(a, b) == 0.0);
    CHECK(frame_accuracy(a, a) == 1.0);
}

TEST_CASE("f1: hand example and edge cases") {
    Counts c{2, 1, 1};
    CHECK(f1_from_counts(c) == doctest::Approx(2.0 / 3.0));
    CHECK(f1_from_counts({0, 0, 0}) == 1.0);
    CHECK(f1_from_counts({0, 3, 0}) == 0.0);
    CHECK(f1_from_counts({5, 0, 0}) == 1.0);
}

TEST_CASE("frame counts match the brute-force oracle") {
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + g_rng() % 64;
        std::vector<float> pred(n), truth(n);
        for (auto& v : pred) v = static_cast<float>(g_rng() % 2);
        for (auto& v : truth) v = static_cast<float>(g_rng() % 2);
        auto got = frame_counts(pred, truth);
        auto want = count_oracle(pred, truth);
        CHECK(got.tp == want.tp);
        CHECK(got.fp == want.fp);
        CHECK(got.fn == want.fn);
    }
}

TEST_CASE("accuracy is bounded by F1 through Acc = F1/(2-F1)") {
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 1 + g_rng() % 40;
        std::vector<float> pred(n), truth(n);
        for (auto& v : pred) v = static_cast<float>(g_rng() % 2);
        for (auto& v : truth) v = static_cast<float>(g_rng() % 2);
        auto c = frame_counts(pred, truth);
        double acc = c.tp + c.fp + c.fn == 0
                         ? 1.0
                         : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp + c.fn);
        double f1 = f1_from_counts(c);
        CHECK(acc == doctest::Approx(f1 / (2.0 - f1)).epsilon(1e-12));
    }
}

TEST_CASE("auc: exact hand examples") {
    CHECK(auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}).value() == doctest::Approx(1.0));
    CHECK(auc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}).value() == doctest::Approx(0.0));
    // one inversion among 2x2 pairs -> 0.75
    CHECK(auc({0.9, 0.3, 0.5, 0.1}, {1, 1, 0, 0}).value() == doctest::Approx(0.75));
    // all tied -> 0.5
    CHECK(auc({0.5, 0.5, 0.5}, {1, 0, 0}).value() == doctest::Approx(0.5));
    CHECK(!auc({0.5, 0.6}, {1, 1}).has_value());
    CHECK(!auc({0.5, 0.6}, {0, 0}).has_value());
    CHECK(!auc({}, {}).has_value());
}

TEST_CASE("auc matches the all-pairs oracle with ties") {
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 2 + g_rng() % 30;
        std::vector<double> scores(n);
        std::vector<uint8_t> labels(n);
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(g_rng() % 8) / 8.0; // force ties
            labels[i] = static_cast<uint8_t>(g_rng() % 2);
            (labels[i] ? has1 : has0) = true;
        }
        auto got = auc(scores, labels);
        if (!has0 || !has1) {
            CHECK(!got.has_value());
            continue;
        }
        CHECK(got.value() == doctest::Approx(auc_oracle(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("auc is invariant to order and monotone transforms") {
    std::vector<double> scores{0.1, 0.7, 0.3, 0.7, 0.9, 0.2};
    std::vector<uint8_t> labels{0, 1, 0, 0, 1, 1};
    double base = auc(scores, labels).value();

    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<double> ps(6);
    std::vector<uint8_t> pl(6);
    for (std::size_t i = 0; i < 6; ++i) {
        ps[i] = scores[perm[i]];
        pl[i] = labels[perm[i]];
    }
    CHECK(auc(ps, pl).value() == doctest::Approx(base).epsilon(1e-12));

    std::vector<double> ms(6);
    for (std::size_t i = 0; i < 6; ++i) ms[i] = std::exp(3.0 * scores[i]) + 2.0;
    CHECK(auc(ms, labels).value() == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("per-second reduction: 63 frames at 31.25 fps make 3 seconds") {
    InstrumentRoll probs(2, 63);
    probs.frame_rate = 31.25;
    // instrument 0: peak 0.8 in second 0 (frame 12), 0.3 in second 1,
    // nothing in the 1-frame trailing second
    probs.at(0, 12) = 0.8f;
    probs.at(0, 40) = 0.3f;
    probs.at(1, 62) = 0.9f; // only the trailing partial second

    auto scores = per_second_scores(probs, 31.25);
    REQUIRE(scores.size() == 2);
    REQUIRE(scores[0].size() == 3); // frames [0,31), [31,62), [62,63)
    CHECK(scores[0][0] == doctest::Approx(0.8));
    CHECK(scores[0][1] == doctest::Approx(0.3));
    CHECK(scores[0][2] == doctest::Approx(0.0));
    CHECK(scores[1][2] == doctest::Approx(0.9));

    InstrumentRoll labels(2, 63);
    labels.at(0, 12) = 1.0f;
    labels.at(1, 62) = 1.0f;
    auto ls = per_second_labels(labels, 31.25);
    CHECK(ls[0] == std::vector<uint8_t>{1, 0, 0});
    CHECK(ls[1] == std::vector<uint8_t>{0, 0, 1});
}

TEST_CASE("instrument f1: macro mean skips instruments absent from truth") {
    InstrumentRoll pred(3, 4), truth(3, 4);
    // instrument 0: perfect; instrument 1: half right; instrument 2: absent
    // from truth but predicted (false positives only)
    truth.at(0, 0) = truth.at(0, 1) = 1;
    pred.at(0, 0) = pred.at(0, 1) = 1;
    truth.at(1, 0) = truth.at(1, 1) = 1;
    pred.at(1, 0) = 1;
    pred.at(2, 3) = 1;

    double mean = 0;
    auto f1 = instrument_f1(pred, truth, &mean);
    REQUIRE(f1.size() == 3);
    CHECK(f1[0] == doctest::Approx(1.0));
    CHECK(f1[1] == doctest::Approx(2.0 / 3.0)); // tp=1 fp=0 fn=1
    CHECK(f1[2] == doctest::Approx(0.0));
    CHECK(mean == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
}

TEST_CASE("pooled counts equal the sum over halves") {
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 2 + 2 * (g_rng() % 30);
        std::vector<float> pred(n), truth(n);
        for (auto& v : pred) v = static_cast<float>(g_rng() % 2);
        for (auto& v : truth) v = static_cast<float>(g_rng() % 2);
        auto whole = frame_counts(pred, truth);
        std::vector<float> p1(pred.begin(), pred.begin() + static_cast<std::ptrdiff_t>(n / 2));
        std::vector<float> p2(pred.begin() + static_cast<std::ptrdiff_t>(n / 2), pred.end());
        std::vector<float> t1(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(n / 2));
        std::vector<float> t2(truth.begin() + static_cast<std::ptrdiff_t>(n / 2), truth.end());
        auto a = frame_counts(p1, t1);
        a += frame_counts(p2, t2);
        CHECK(a.tp == whole.tp);
        CHECK(a.fp == whole.fp);
        CHECK(a.fn == whole.fn);
    }
}

TEST_CASE("report rendering carries every instrument row") {
    EvalReport rep;
    rep.instruments.push_back({"piano", {4, 1, 1}, true, 2.0 * 4 / (2.0 * 4 + 1 + 1), 0.9});
    rep.instruments.push_back({"flute", {0, 0, 0}, false, 1.0, std::nullopt});
    rep.pitch_acc = 0.5;
    rep.roll_acc = 0.4;
    rep.mean_f1 = rep.instruments[0].f1;
    rep.clip_count = 2;
    auto table = rep.to_table();
    CHECK(table.find("piano") != std::string::npos);
    CHECK(table.find("flute") != std::string::npos);
    auto records = rep.to_records();
    CHECK(records.find("piano") != std::string::npos);
    CHECK(records.find('\t') != std::string::npos);
}
