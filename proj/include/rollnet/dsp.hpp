#pragma once

#include <cstdint>
#include <vector>

#include "rollnet/rolls.hpp"
#include "rollnet/synth.hpp"

namespace rollnet {

constexpr int kHopSamples = 512;
constexpr double kFminHz = 27.5; // A0
constexpr int kBinsPerOctave = 12;
constexpr std::size_t kSegmentFrames = 320;
constexpr double kLogCompressionGamma = 20.0;

// 88 x T magnitude matrix, log-compressed. Stored [t][f].
struct Spectrogram {
    std::size_t F = kNumPitchBins;
    std::size_t T = 0;
    int sample_rate = kSampleRate;
    int hop = kHopSamples;

    std::vector<float> data;

    Spectrogram() = default;
    Spectrogram(std::size_t f, std::size_t t) : F(f), T(t), data(f * t, 0.0f) {}

    std::size_t idx(std::size_t f, std::size_t t) const { return t * F + f; }
    float at(std::size_t f, std::size_t t) const { return data[idx(f, t)]; }
    float& at(std::size_t f, std::size_t t) { return data[idx(f, t)]; }

    double frame_rate() const { return static_cast<double>(sample_rate) / hop; }
};

// Center frequency of bin n: 27.5 * 2^(n/12).
double cqt_bin_frequency(int bin);

// Hann window length for a bin: ceil(Q * sr / f_n), Q = 1/(2^(1/12)-1).
std::size_t cqt_window_length(int bin, int sample_rate = kSampleRate);

// Constant-Q magnitude spectrogram: per-bin windowed inner product with a
// complex sinusoid, centered on each 512-sample hop, reflection padding at
// the edges, then log(1 + 20*magnitude). Frames parallelize with OpenMP.
Spectrogram cqt(const Waveform& wave);

namespace ref {
// Serial reference implementation, kept for tests and the kernel benchmark.
Spectrogram cqt(const Waveform& wave);
} // namespace ref

// One training window: 320 spectrogram frames plus the aligned label slice.
// valid_frames marks real frames (a contiguous prefix); the tail of the
// final window is zero-padded.
struct Segment {
    Spectrogram spec;         // 88 x 320
    Pianoroll labels;         // 88 x 320 x M
    std::size_t valid_frames = 0;
    std::size_t start_frame = 0; // offset in the source clip
};

std::vector<Segment> segment(const Spectrogram& spec, const Pianoroll& labels);

} // namespace rollnet
