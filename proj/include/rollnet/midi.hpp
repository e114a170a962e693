#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rollnet/rolls.hpp"

namespace rollnet {

struct NoteEvent {
    int pitch = 0;       // MIDI note number [0,127]
    double onset_s = 0;
    double offset_s = 0; // > onset_s
    int program = 0;     // GM program active on the channel at onset
    int channel = 0;     // [0,15]; 9 = percussion
    int velocity = 64;   // [1,127]
};

struct CorpusEntry {
    std::string clip_id;
    std::string midi_path;
    std::string audio_path;
    std::string split; // "train" | "test"
    double duration_s = 0;
};

struct CorpusManifest {
    std::vector<CorpusEntry> entries;
    std::string vocab_id;
    uint64_t seed = 0;

    std::vector<CorpusEntry> split(const std::string& which) const;
    void save(const std::string& path) const;
    static CorpusManifest load(const std::string& path);
};

// Standard MIDI File, format 0 or 1. Events carry the program active on
// their channel at onset; ticks are converted to seconds through the full
// tempo map; hanging notes are closed at track end.
std::vector<NoteEvent> parse_midi(const std::vector<uint8_t>& bytes);
std::vector<NoteEvent> parse_midi_file(const std::string& path);

// Writes SMF format 1: a tempo track plus one track per distinct
// (program, channel) pair found in the events.
std::vector<uint8_t> write_midi(const std::vector<NoteEvent>& events, int tempo_bpm,
                                int ticks_per_quarter = 480);
void write_midi_file(const std::string& path, const std::vector<NoteEvent>& events,
                     int tempo_bpm, int ticks_per_quarter = 480);

// Vocabulary index for a program, or -1. Channel 9 always maps to -1.
int map_program(int program, int channel, const InstrumentVocab& vocab);

// Any-overlap rasterization: cell (f,t,m) = 1 iff an event with vocab index
// m and pitch f + pitch_offset overlaps frame [t/fr, (t+1)/fr) by a positive
// amount. Pitches outside [21,108] and unmapped programs are dropped.
Pianoroll events_to_pianoroll(const std::vector<NoteEvent>& events, double frame_rate,
                              double duration_s, const InstrumentVocab& vocab);

struct CorpusConfig {
    int n_clips = 8;
    double clip_seconds = 20.0;
    InstrumentVocab vocab = InstrumentVocab::default_vocab();
    int min_polyphony = 1; // instruments per clip
    int max_polyphony = 4;
    int min_tempo_bpm = 70;
    int max_tempo_bpm = 140;
    int min_note_eighths = 1;    // note length range on the eighth-note grid
    int max_note_eighths = 2;
    double rest_probability = 0.25;
    int walk_semitones = 5;      // max random-walk interval between notes
    double train_fraction = 0.75;
};

// Deterministic procedural corpus: writes SMF files under out_dir and
// returns the manifest (audio paths filled in, rendered separately).
CorpusManifest generate_corpus(uint64_t seed, const CorpusConfig& config,
                               const std::string& out_dir);

} // namespace rollnet
