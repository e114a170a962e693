#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>

#include "rollnet/synth.hpp"
#include "rollnet/wav.hpp"

using namespace rollnet;

namespace {

// brute-force DFT magnitude at an arbitrary frequency, 1 Hz resolution probe
double dft_magnitude(const std::vector<float>& x, double freq_hz, int sample_rate) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double ph = -2.0 * M_PI * freq_hz * static_cast<double>(i) / sample_rate;
        acc += static_cast<double>(x[i]) * std::complex<double>(std::cos(ph), std::sin(ph));
    }
    return std::abs(acc);
}

} // namespace

TEST_CASE("envelope: attack endpoints and mid-decay line") {
    Adsr adsr{0.1, 0.2, 0.5, 0.05};
    CHECK(envelope(0.0, 1.0, adsr) == doctest::Approx(0.0));
    CHECK(envelope(0.1, 1.0, adsr) == doctest::Approx(1.0));
    // mid-decay: closed-form line from 1.0 to sustain over decay_s
    double t = 0.1 + 0.07;
    double expected = 1.0 + (0.5 - 1.0) * (0.07 / 0.2);
    CHECK(envelope(t, 1.0, adsr) == doctest::Approx(expected).epsilon(1e-12));
    // sustain, then linear release, then zero
    CHECK(envelope(0.5, 1.0, adsr) == doctest::Approx(0.5));
    CHECK(envelope(1.025, 1.0, adsr) == doctest::Approx(0.25));
    CHECK(envelope(1.2, 1.0, adsr) == 0.0);
    CHECK(envelope(-0.1, 1.0, adsr) == 0.0);
}

TEST_CASE("render: empty event list gives silence") {
    auto vocab = InstrumentVocab::default_vocab();
    auto wave = render({}, default_profiles(vocab), vocab);
    CHECK(wave.samples.size() == 16000);
    for (float s : wave.samples) CHECK(s == 0.0f);
}

TEST_CASE("render: single A4 single partial peaks at 440 Hz") {
    InstrumentVocab vocab;
    vocab.id = "mono";
    vocab.entries = {{"tone", {0}, 21, 108}};
    TimbreProfile prof{"tone", {1.0}, {0.01, 0.01, 1.0, 0.01}, 1.0};

    NoteEvent e;
    e.pitch = 69;
    e.onset_s = 0.0;
    e.offset_s = 1.0;
    e.program = 0;
    auto wave = render({e}, {prof}, vocab);

    double peak_mag = dft_magnitude(wave.samples, 440.0, wave.sample_rate);
    for (int f = 50; f < 8000; f += 50) {
        if (std::abs(f - 440) < 60) continue;
        CHECK(dft_magnitude(wave.samples, f, wave.sample_rate) < peak_mag * 0.1);
    }
}

TEST_CASE("render is linear for quiet simultaneous notes") {
    auto vocab = InstrumentVocab::default_vocab();
    auto profiles = default_profiles(vocab);
    // quiet: velocities low enough that no mix exceeds the 0.9 peak gate
    NoteEvent a, b;
    a.pitch = 60;
    a.onset_s = 0.0;
    a.offset_s = 0.5;
    a.program = 0;
    a.velocity = 20;
    b = a;
    b.pitch = 67;
    b.velocity = 15;

    auto wa = render({a}, profiles, vocab);
    auto wb = render({b}, profiles, vocab);
    auto wab = render({a, b}, profiles, vocab);
    REQUIRE(wa.samples.size() == wab.samples.size());
    REQUIRE(wb.samples.size() == wab.samples.size());
    for (std::size_t i = 0; i < wab.samples.size(); ++i)
        CHECK(wab.samples[i] ==
              doctest::Approx(wa.samples[i] + wb.samples[i]).epsilon(1e-4).scale(1.0));
}

TEST_CASE("render is deterministic") {
    auto vocab = InstrumentVocab::default_vocab();
    auto profiles = default_profiles(vocab);
    NoteEvent e;
    e.pitch = 64;
    e.onset_s = 0.1;
    e.offset_s = 0.7;
    e.program = 40;
    auto w1 = render({e}, profiles, vocab);
    auto w2 = render({e}, profiles, vocab);
    CHECK(w1.samples == w2.samples);
}

TEST_CASE("partials at or above Nyquist are culled") {
    InstrumentVocab vocab;
    vocab.id = "mono";
    vocab.entries = {{"tone", {0}, 21, 108}};
    // pitch 105 (A7, 3520 Hz): partials 2..4 land at 7040/10560/14080 Hz,
    // only the first two below the 8 kHz Nyquist survive
    TimbreProfile prof{"tone", {1.0, 1.0, 1.0, 1.0}, {0.005, 0.01, 1.0, 0.01}, 1.0};
    NoteEvent e;
    e.pitch = 105;
    e.onset_s = 0.0;
    e.offset_s = 1.0;
    e.program = 0;
    auto wave = render({e}, {prof}, vocab);

    double peak = dft_magnitude(wave.samples, 3520.0, wave.sample_rate);
    // a culled partial at 10560 Hz would alias to 16000-10560 = 5440 Hz
    double ghost = dft_magnitude(wave.samples, 5440.0, wave.sample_rate);
    CHECK(20.0 * std::log10(ghost / peak) < -60.0);
}

TEST_CASE("duration covers max offset plus release plus one frame") {
    InstrumentVocab vocab;
    vocab.id = "mono";
    vocab.entries = {{"tone", {0}, 21, 108}};
    TimbreProfile prof{"tone", {1.0}, {0.01, 0.01, 1.0, 0.25}, 1.0};
    NoteEvent e;
    e.pitch = 60;
    e.onset_s = 0.0;
    e.offset_s = 2.0;
    e.program = 0;
    auto wave = render({e}, {prof}, vocab);
    double expected = 2.0 + 0.25 + 512.0 / 16000.0;
    CHECK(wave.samples.size() == static_cast<std::size_t>(std::ceil(expected * 16000)));
}

TEST_CASE("wav round-trip within 16-bit quantization") {
    auto vocab = InstrumentVocab::default_vocab();
    auto profiles = default_profiles(vocab);
    NoteEvent e;
    e.pitch = 60;
    e.onset_s = 0.0;
    e.offset_s = 0.3;
    e.program = 0;
    auto wave = render({e}, profiles, vocab);
    write_wav("wav_test.wav", wave);
    auto back = read_wav("wav_test.wav");
    CHECK(back.sample_rate == wave.sample_rate);
    REQUIRE(back.samples.size() == wave.samples.size());
    for (std::size_t i = 0; i < wave.samples.size(); ++i)
        CHECK(std::abs(back.samples[i] - wave.samples[i]) <= 1.0f / 32767.0f + 1e-6f);
    std::filesystem::remove("wav_test.wav");
}
