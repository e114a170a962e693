#pragma once

#include <map>
#include <string>
#include <vector>

#include "rollnet/midi.hpp"
#include "rollnet/rolls.hpp"

namespace rollnet {

constexpr int kSampleRate = 16000;

struct Adsr {
    double attack_s = 0.01;
    double decay_s = 0.1;
    double sustain_level = 0.8;
    double release_s = 0.05;
};

struct TimbreProfile {
    std::string name;
    std::vector<double> partials; // relative gains, fundamental first
    Adsr adsr;
    double gain = 1.0;
};

struct Waveform {
    std::vector<float> samples; // mono, [-1,1]
    int sample_rate = kSampleRate;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// Piecewise-linear ADSR gain at time t since note onset; the release
// phase starts at note_duration_s and the gain is 0 once it ends.
double envelope(double t_s, double note_duration_s, const Adsr& adsr);

// One distinguishable additive recipe per default-vocab instrument;
// unknown names fall back to a generic profile.
TimbreProfile default_profile(const std::string& instrument_name);
std::vector<TimbreProfile> default_profiles(const InstrumentVocab& vocab);

// Additive sine synthesis: for each event, sum of enveloped partials at
// k * f0 with zero initial phase; partials at or above Nyquist are
// dropped. The mix is peak-normalized to 0.9 only if it exceeds 0.9.
Waveform render(const std::vector<NoteEvent>& events,
                const std::vector<TimbreProfile>& profiles, const InstrumentVocab& vocab,
                int sample_rate = kSampleRate);

} // namespace rollnet
