#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "rollnet/dsp.hpp"

using namespace rollnet;

namespace {

Waveform sine(double freq_hz, double seconds, double amp = 0.5) {
    Waveform w;
    w.samples.resize(static_cast<std::size_t>(seconds * w.sample_rate));
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<float>(
            amp * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / w.sample_rate));
    return w;
}

// Independent oracle for one CQT cell: Hann-windowed complex inner product
// centered at frame t, reflection padding, log(1 + 20*mag).
double cqt_cell_oracle(const Waveform& wave, int bin, std::size_t frame) {
    const auto n = static_cast<std::ptrdiff_t>(wave.samples.size());
    auto reflect = [&](std::ptrdiff_t i) {
        if (n == 1) return std::ptrdiff_t{0};
        std::ptrdiff_t period = 2 * (n - 1);
        i = std::abs(i) % period;
        return i < n ? i : period - i;
    };
    double fc = cqt_bin_frequency(bin);
    auto wlen = static_cast<std::ptrdiff_t>(cqt_window_length(bin, wave.sample_rate));
    std::ptrdiff_t center = static_cast<std::ptrdiff_t>(frame) * kHopSamples;
    std::ptrdiff_t start = center - wlen / 2;
    std::complex<double> acc = 0;
    double wsum = 0;
    for (std::ptrdiff_t j = 0; j < wlen; ++j) {
        double hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(j) /
                                           static_cast<double>(wlen - 1));
        wsum += hann;
        double ph = -2.0 * M_PI * fc * static_cast<double>(start + j) / wave.sample_rate;
        acc += hann * static_cast<double>(wave.samples[static_cast<std::size_t>(reflect(start + j))]) *
               std::complex<double>(std::cos(ph), std::sin(ph));
    }
    double mag = 2.0 * std::abs(acc) / wsum;
    return std::log1p(kLogCompressionGamma * mag);
}

std::size_t argmax_bin(const Spectrogram& s, std::size_t t) {
    std::size_t best = 0;
    for (std::size_t f = 1; f < s.F; ++f)
        if (s.at(f, t) > s.at(best, t)) best = f;
    return best;
}

} // namespace

TEST_CASE("bin frequencies and window lengths") {
    CHECK(cqt_bin_frequency(0) == doctest::Approx(27.5));
    CHECK(cqt_bin_frequency(12) == doctest::Approx(55.0));
    CHECK(cqt_bin_frequency(57) == doctest::Approx(740.0).epsilon(1e-3));
    const double q = 1.0 / (std::pow(2.0, 1.0 / 12.0) - 1.0);
    for (int b = 0; b < 88; ++b)
        CHECK(cqt_window_length(b) ==
              static_cast<std::size_t>(std::ceil(q * 16000.0 / cqt_bin_frequency(b))));
    // windows shrink monotonically with frequency
    for (int b = 1; b < 88; ++b) CHECK(cqt_window_length(b) <= cqt_window_length(b - 1));
}

TEST_CASE("frame count formula") {
    for (std::size_t len : {std::size_t{1}, std::size_t{511}, std::size_t{512},
                            std::size_t{513}, std::size_t{16000}, std::size_t{160001}}) {
        Waveform w;
        w.samples.assign(len, 0.0f);
        auto s = cqt(w);
        CHECK(s.T == 1 + (len - 1) / kHopSamples);
        CHECK(s.F == 88);
    }
}

TEST_CASE("pure tones peak at their bin centers") {
    for (int bin : {0, 24, 48, 87}) {
        auto w = sine(cqt_bin_frequency(bin), 3.0);
        auto s = cqt(w);
        // skip edge frames where reflection padding dominates the long windows
        std::size_t lo = s.T / 4, hi = 3 * s.T / 4;
        for (std::size_t t = lo; t < hi; ++t)
            CHECK(argmax_bin(s, t) == static_cast<std::size_t>(bin));
    }
}

TEST_CASE("matches windowed-DFT oracle on a two-tone signal") {
    auto wa = sine(cqt_bin_frequency(20), 2.0, 0.4);
    auto wb = sine(cqt_bin_frequency(53), 2.0, 0.3);
    Waveform w = wa;
    for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] += wb.samples[i];

    auto s = cqt(w);
    for (int bin : {0, 20, 21, 53, 70}) {
        for (std::size_t t : {std::size_t{0}, s.T / 2, s.T - 1}) {
            double want = cqt_cell_oracle(w, bin, t);
            CHECK(s.at(static_cast<std::size_t>(bin), t) ==
                  doctest::Approx(want).epsilon(1e-4));
        }
    }
}

TEST_CASE("parallel and reference CQT agree") {
    std::mt19937_64 rng(11);
    Waveform w;
    w.samples.resize(16000 * 2);
    for (auto& v : w.samples)
        v = static_cast<float>((static_cast<double>(rng()) / static_cast<double>(UINT64_MAX)) - 0.5);
    auto a = cqt(w);
    auto b = ref::cqt(w);
    REQUIRE(a.T == b.T);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-6));
}

TEST_CASE("compression is monotone") {
    auto w = sine(440.0, 1.0, 0.2);
    auto w2 = sine(440.0, 1.0, 0.6);
    auto s = cqt(w), s2 = cqt(w2);
    std::size_t t = s.T / 2;
    auto bin = argmax_bin(s2, t);
    CHECK(s2.at(bin, t) > s.at(bin, t));
    for (float v : s.data) CHECK(v >= 0.0f);
}

TEST_CASE("segment: 650 frames make three windows, last with 10 valid") {
    Spectrogram spec(88, 650);
    Pianoroll labels(88, 650, 3);
    std::mt19937_64 rng(3);
    for (auto& v : spec.data)
        v = static_cast<float>(static_cast<double>(rng() % 1000) / 1000.0);
    for (auto& v : labels.data) v = static_cast<float>(rng() % 2);

    auto segs = segment(spec, labels);
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].valid_frames == 320);
    CHECK(segs[1].valid_frames == 320);
    CHECK(segs[2].valid_frames == 10);
    CHECK(segs[0].start_frame == 0);
    CHECK(segs[1].start_frame == 320);
    CHECK(segs[2].start_frame == 640);

    // valid prefixes reconstruct the originals; tails are zero
    for (std::size_t k = 0; k < segs.size(); ++k) {
        const auto& g = segs[k];
        CHECK(g.spec.T == kSegmentFrames);
        CHECK(g.labels.T == kSegmentFrames);
        for (std::size_t t = 0; t < kSegmentFrames; ++t) {
            bool valid = t < g.valid_frames;
            for (std::size_t f = 0; f < 88; ++f) {
                float want = valid ? spec.at(f, g.start_frame + t) : 0.0f;
                CHECK(g.spec.at(f, t) == want);
                for (std::size_t m = 0; m < 3; ++m) {
                    float lwant = valid ? labels.at(f, g.start_frame + t, m) : 0.0f;
                    CHECK(g.labels.at(f, t, m) == lwant);
                }
            }
        }
    }
}

TEST_CASE("segment: exact multiple has no padding") {
    Spectrogram spec(88, 320);
    Pianoroll labels(88, 320, 2);
    auto segs = segment(spec, labels);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].valid_frames == 320);
}

TEST_CASE("segment rejects mismatched label length") {
    Spectrogram spec(88, 100);
    Pianoroll labels(88, 110, 2);
    CHECK_THROWS_AS(segment(spec, labels), DataError);
    Pianoroll close(88, 101, 2); // within one frame is tolerated
    CHECK_NOTHROW(segment(spec, close));
}

TEST_CASE("time shift by whole hops shifts interior frames") {
    auto w = sine(220.0, 4.0);
    Waveform shifted;
    shifted.samples.assign(w.samples.size() + 512 * 4, 0.0f);
    std::copy(w.samples.begin(), w.samples.end(), shifted.samples.begin() + 512 * 4);

    auto a = cqt(w);
    auto b = cqt(shifted);
    // compare interior frames clear of both signals' padded edges
    for (std::size_t t = 20; t + 20 < a.T; ++t)
        for (std::size_t f = 12; f < 88; ++f)
            CHECK(b.at(f, t + 4) == doctest::Approx(a.at(f, t)).epsilon(1e-5).scale(1.0));
}
