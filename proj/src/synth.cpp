#include "rollnet/synth.hpp"

#include <algorithm>
#include <cmath>

namespace rollnet {

namespace {

// attack/decay/sustain level while the note is held
double ads_level(double t, const Adsr& adsr) {
    if (t < adsr.attack_s) return t / adsr.attack_s;
    t -= adsr.attack_s;
    if (t < adsr.decay_s) return 1.0 + (adsr.sustain_level - 1.0) * (t / adsr.decay_s);
    return adsr.sustain_level;
}

} // namespace

double envelope(double t_s, double note_duration_s, const Adsr& adsr) {
    if (t_s < 0) return 0;
    if (t_s < note_duration_s) return ads_level(t_s, adsr);
    double rel = t_s - note_duration_s;
    if (adsr.release_s <= 0 || rel >= adsr.release_s) return 0;
    return ads_level(note_duration_s, adsr) * (1.0 - rel / adsr.release_s);
}

TimbreProfile default_profile(const std::string& name) {
    if (name == "piano")
        return {name, {1.0, 0.55, 0.32, 0.2, 0.12, 0.07, 0.04}, {0.004, 0.35, 0.25, 0.08}, 1.0};
    if (name == "acoustic_guitar")
        return {name, {1.0, 0.7, 0.45, 0.3, 0.18, 0.1}, {0.003, 0.5, 0.15, 0.1}, 0.9};
    if (name == "electric_guitar")
        return {name, {1.0, 0.85, 0.6, 0.45, 0.3, 0.22, 0.15, 0.1}, {0.003, 0.3, 0.4, 0.1}, 0.9};
    if (name == "trumpet")
        return {name, {0.7, 1.0, 0.9, 0.75, 0.55, 0.4, 0.28, 0.18}, {0.03, 0.08, 0.85, 0.06}, 0.8};
    if (name == "sax")
        return {name, {1.0, 0.8, 0.9, 0.5, 0.35, 0.25, 0.15}, {0.025, 0.1, 0.8, 0.08}, 0.85};
    if (name == "violin")
        return {name, {1.0, 0.75, 0.65, 0.5, 0.45, 0.35, 0.25, 0.18, 0.12}, {0.06, 0.1, 0.9, 0.1}, 0.8};
    if (name == "cello")
        return {name, {1.0, 0.9, 0.6, 0.5, 0.4, 0.3, 0.2, 0.12}, {0.05, 0.12, 0.85, 0.12}, 0.85};
    if (name == "flute")
        return {name, {1.0, 0.35, 0.12, 0.04}, {0.04, 0.06, 0.9, 0.07}, 0.9};
    return {name, {1.0, 0.5, 0.25, 0.12}, {0.01, 0.2, 0.7, 0.08}, 0.8};
}

std::vector<TimbreProfile> default_profiles(const InstrumentVocab& vocab) {
    std::vector<TimbreProfile> out;
    out.reserve(vocab.size());
    for (const auto& e : vocab.entries) out.push_back(default_profile(e.name));
    return out;
}

Waveform render(const std::vector<NoteEvent>& events,
                const std::vector<TimbreProfile>& profiles, const InstrumentVocab& vocab,
                int sample_rate) {
    if (profiles.size() != vocab.size())
        throw ConfigError("render: one profile per vocabulary entry required");

    double max_offset = 0, max_release = 0;
    for (const auto& e : events) {
        int m = map_program(e.program, e.channel, vocab);
        if (m < 0) throw ConfigError("render: event program " + std::to_string(e.program) +
                                     " has no profile");
        max_offset = std::max(max_offset, e.offset_s);
        max_release = std::max(max_release, profiles[static_cast<std::size_t>(m)].adsr.release_s);
    }

    // one 512-sample frame of trailing silence
    double total_s = events.empty() ? 1.0 : max_offset + max_release + 512.0 / sample_rate;
    Waveform wave;
    wave.sample_rate = sample_rate;
    wave.samples.assign(static_cast<std::size_t>(std::ceil(total_s * sample_rate)), 0.0f);
    std::vector<double> mix(wave.samples.size(), 0.0);

    double nyquist = sample_rate / 2.0;
    for (const auto& e : events) {
        int m = map_program(e.program, e.channel, vocab);
        const auto& prof = profiles[static_cast<std::size_t>(m)];
        double f0 = 440.0 * std::pow(2.0, (e.pitch - 69) / 12.0);
        double dur = e.offset_s - e.onset_s;
        double vel = e.velocity / 127.0;
        auto s0 = static_cast<int64_t>(std::ceil(e.onset_s * sample_rate));
        auto s1 = static_cast<int64_t>(
            std::ceil((e.offset_s + prof.adsr.release_s) * sample_rate));
        s1 = std::min<int64_t>(s1, static_cast<int64_t>(mix.size()));
        for (std::size_t k = 0; k < prof.partials.size(); ++k) {
            double fk = f0 * static_cast<double>(k + 1);
            if (fk >= nyquist) break; // cull aliasing partials
            double amp = prof.partials[k] * prof.gain * vel;
            double w = 2.0 * M_PI * fk / sample_rate;
            for (int64_t s = s0; s < s1; ++s) {
                double t = static_cast<double>(s) / sample_rate - e.onset_s;
                mix[static_cast<std::size_t>(s)] +=
                    amp * envelope(t, dur, prof.adsr) * std::sin(w * static_cast<double>(s - s0));
            }
        }
    }

    double peak = 0;
    for (double v : mix) peak = std::max(peak, std::abs(v));
    double scale = peak > 0.9 ? 0.9 / peak : 1.0;
    for (std::size_t i = 0; i < mix.size(); ++i)
        wave.samples[i] = static_cast<float>(mix[i] * scale);
    return wave;
}

} // namespace rollnet
