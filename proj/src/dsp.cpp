#include "rollnet/dsp.hpp"

#include <cmath>
#include <cstdlib>

namespace rollnet {

namespace {

constexpr double kQ = 1.0 / 0.05946309435929531; // 1/(2^(1/12)-1)

// reflection without repeating the edge sample
std::size_t reflect(int64_t p, int64_t n) {
    if (n == 1) return 0;
    int64_t period = 2 * (n - 1);
    p = std::llabs(p) % period;
    if (p >= n) p = period - p;
    return static_cast<std::size_t>(p);
}

struct BinKernel {
    std::vector<double> wcos, wsin;
    double norm; // 2 / window sum
};

std::vector<BinKernel> build_kernels(int sample_rate) {
    std::vector<BinKernel> kernels(kNumPitchBins);
    for (int n = 0; n < static_cast<int>(kNumPitchBins); ++n) {
        double f = cqt_bin_frequency(n);
        std::size_t L = cqt_window_length(n, sample_rate);
        auto& k = kernels[static_cast<std::size_t>(n)];
        k.wcos.resize(L);
        k.wsin.resize(L);
        double wsum = 0;
        double center = (static_cast<double>(L) - 1) / 2.0;
        for (std::size_t i = 0; i < L; ++i) {
            double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                                             (static_cast<double>(L) - 1)));
            double phase = 2.0 * M_PI * f * (static_cast<double>(i) - center) / sample_rate;
            k.wcos[i] = w * std::cos(phase);
            k.wsin[i] = w * std::sin(phase);
            wsum += w;
        }
        k.norm = 2.0 / wsum;
    }
    return kernels;
}

float cqt_cell(const Waveform& wave, const BinKernel& k, std::size_t frame) {
    auto n = static_cast<int64_t>(wave.samples.size());
    int64_t center = static_cast<int64_t>(frame) * kHopSamples;
    auto L = static_cast<int64_t>(k.wcos.size());
    int64_t start = center - L / 2;
    double re = 0, im = 0;
    for (int64_t i = 0; i < L; ++i) {
        int64_t p = start + i;
        double x = wave.samples[p >= 0 && p < n ? static_cast<std::size_t>(p) : reflect(p, n)];
        re += x * k.wcos[static_cast<std::size_t>(i)];
        im += x * k.wsin[static_cast<std::size_t>(i)];
    }
    double mag = std::sqrt(re * re + im * im) * k.norm;
    return static_cast<float>(std::log1p(kLogCompressionGamma * mag));
}

Spectrogram cqt_impl(const Waveform& wave, bool parallel) {
    if (wave.samples.empty()) throw DataError("cqt: empty waveform");
    if (wave.sample_rate != kSampleRate)
        throw DataError("cqt: expected 16 kHz input, got " + std::to_string(wave.sample_rate));

    static const std::vector<BinKernel> kernels = build_kernels(kSampleRate);
    std::size_t T = 1 + (wave.samples.size() - 1) / kHopSamples;
    Spectrogram spec(kNumPitchBins, T);

    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int64_t t = 0; t < static_cast<int64_t>(T); ++t)
            for (std::size_t f = 0; f < kNumPitchBins; ++f)
                spec.at(f, static_cast<std::size_t>(t)) =
                    cqt_cell(wave, kernels[f], static_cast<std::size_t>(t));
    } else {
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t f = 0; f < kNumPitchBins; ++f)
                spec.at(f, t) = cqt_cell(wave, kernels[f], t);
    }
    return spec;
}

} // namespace

double cqt_bin_frequency(int bin) {
    return kFminHz * std::pow(2.0, static_cast<double>(bin) / kBinsPerOctave);
}

std::size_t cqt_window_length(int bin, int sample_rate) {
    return static_cast<std::size_t>(std::ceil(kQ * sample_rate / cqt_bin_frequency(bin)));
}

Spectrogram cqt(const Waveform& wave) { return cqt_impl(wave, true); }

namespace ref {
Spectrogram cqt(const Waveform& wave) { return cqt_impl(wave, false); }
} // namespace ref

std::vector<Segment> segment(const Spectrogram& spec, const Pianoroll& labels) {
    if (std::abs(static_cast<int64_t>(spec.T) - static_cast<int64_t>(labels.T)) > 1)
        throw DataError("segment: spectrogram and labels disagree by more than one frame");
    std::size_t T = std::min(spec.T, labels.T);
    if (T == 0) throw DataError("segment: empty clip");

    std::size_t n_seg = (T + kSegmentFrames - 1) / kSegmentFrames;
    std::vector<Segment> out;
    out.reserve(n_seg);
    for (std::size_t s = 0; s < n_seg; ++s) {
        std::size_t start = s * kSegmentFrames;
        std::size_t valid = std::min(kSegmentFrames, T - start);
        Segment seg;
        seg.start_frame = start;
        seg.valid_frames = valid;
        seg.spec = Spectrogram(spec.F, kSegmentFrames);
        seg.spec.sample_rate = spec.sample_rate;
        seg.spec.hop = spec.hop;
        seg.labels = Pianoroll(labels.F, kSegmentFrames, labels.M);
        seg.labels.frame_rate = labels.frame_rate;
        seg.labels.pitch_offset = labels.pitch_offset;
        seg.labels.vocab_id = labels.vocab_id;
        for (std::size_t t = 0; t < valid; ++t) {
            for (std::size_t f = 0; f < spec.F; ++f)
                seg.spec.at(f, t) = spec.at(f, start + t);
            for (std::size_t m = 0; m < labels.M; ++m)
                for (std::size_t f = 0; f < labels.F; ++f)
                    seg.labels.at(f, t, m) = labels.at(f, start + t, m);
        }
        out.push_back(std::move(seg));
    }
    return out;
}

} // namespace rollnet
