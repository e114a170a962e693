#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "rollnet/errors.hpp"

namespace rollnet {

constexpr int kDefaultPitchOffset = 21; // A0
constexpr std::size_t kNumPitchBins = 88;
constexpr double kDefaultFrameRate = 31.25; // 16000 / 512

// Ordered instrument vocabulary. Each entry owns a disjoint set of
// General-MIDI program numbers plus a playable pitch range used by the
// corpus generator.
struct InstrumentVocab {
    struct Entry {
        std::string name;
        std::vector<int> programs;
        int pitch_lo = 21;
        int pitch_hi = 108;
    };

    std::string id;
    std::vector<Entry> entries;

    std::size_t size() const { return entries.size(); }

    // Index of the entry whose program set contains `program`, or -1.
    int index_of_program(int program) const;
    int index_of_name(const std::string& name) const;

    void validate() const;

    static InstrumentVocab default_vocab();
    static InstrumentVocab load(const std::string& path);
    void save(const std::string& path) const;
};

// F x T x M tensor of values in [0,1]. Binary for labels, probabilities
// for predictions. Stored flat in [m][t][f] order (the PRL payload order).
struct Pianoroll {
    std::size_t F = kNumPitchBins;
    std::size_t T = 0;
    std::size_t M = 0;
    double frame_rate = kDefaultFrameRate;
    int pitch_offset = kDefaultPitchOffset;
    std::string vocab_id;
    std::vector<float> data;

    Pianoroll() = default;
    Pianoroll(std::size_t f, std::size_t t, std::size_t m)
        : F(f), T(t), M(m), data(f * t * m, 0.0f) {}

    std::size_t idx(std::size_t f, std::size_t t, std::size_t m) const {
        return (m * T + t) * F + f;
    }
    float at(std::size_t f, std::size_t t, std::size_t m) const { return data[idx(f, t, m)]; }
    float& at(std::size_t f, std::size_t t, std::size_t m) { return data[idx(f, t, m)]; }

    bool is_binary() const;
};

// F x T marginal: instrument-agnostic pitch activity. Stored [t][f].
struct PitchRoll {
    std::size_t F = kNumPitchBins;
    std::size_t T = 0;
    double frame_rate = kDefaultFrameRate;
    int pitch_offset = kDefaultPitchOffset;
    std::vector<float> data;

    PitchRoll() = default;
    PitchRoll(std::size_t f, std::size_t t) : F(f), T(t), data(f * t, 0.0f) {}

    std::size_t idx(std::size_t f, std::size_t t) const { return t * F + f; }
    float at(std::size_t f, std::size_t t) const { return data[idx(f, t)]; }
    float& at(std::size_t f, std::size_t t) { return data[idx(f, t)]; }
};

// M x T marginal: frame-level instrument activity. Stored [m][t].
struct InstrumentRoll {
    std::size_t M = 0;
    std::size_t T = 0;
    double frame_rate = kDefaultFrameRate;
    std::string vocab_id;
    std::vector<float> data;

    InstrumentRoll() = default;
    InstrumentRoll(std::size_t m, std::size_t t) : M(m), T(t), data(m * t, 0.0f) {}

    std::size_t idx(std::size_t m, std::size_t t) const { return m * T + t; }
    float at(std::size_t m, std::size_t t) const { return data[idx(m, t)]; }
    float& at(std::size_t m, std::size_t t) { return data[idx(m, t)]; }
};

// Max-reduction marginals. For binary rolls max equals logical OR; for
// probabilities it keeps values in [0,1].
PitchRoll marginalize_pitch(const Pianoroll& roll);
InstrumentRoll marginalize_instrument(const Pianoroll& roll);

// Threshold in (0,1); cell >= threshold maps to 1. Metadata preserved.
Pianoroll binarize(const Pianoroll& roll, float threshold);
PitchRoll binarize(const PitchRoll& roll, float threshold);
InstrumentRoll binarize(const InstrumentRoll& roll, float threshold);

// PRL on-disk format, little-endian:
//   magic "PRL1", u8 kind (0=pianoroll,1=pitch,2=instrument),
//   u8 payload (0=u8 binary, 1=f32), u32 F, u32 T, u32 M (unused dims = 1),
//   f64 frame_rate, u16 vocab-id length, UTF-8 vocab id,
//   payload in [m][t][f] order.
using AnyRoll = std::variant<Pianoroll, PitchRoll, InstrumentRoll>;

std::size_t write_prl(const Pianoroll& roll, std::ostream& out);
std::size_t write_prl(const PitchRoll& roll, std::ostream& out);
std::size_t write_prl(const InstrumentRoll& roll, std::ostream& out);
std::size_t write_prl(const AnyRoll& roll, const std::string& path);

AnyRoll read_prl(std::istream& in);
AnyRoll read_prl(const std::string& path);

} // namespace rollnet
