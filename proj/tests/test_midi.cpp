#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "rollnet/midi.hpp"

using namespace rollnet;

namespace {

// hand-assembled SMF-0: one note, optional mid-note tempo change
std::vector<uint8_t> single_note_smf(bool tempo_change) {
    std::vector<uint8_t> b = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xe0};
    std::vector<uint8_t> trk = {
        0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20, // 500000 us/qn = 120 BPM
        0x00, 0xc0, 0x00,                         // program 0
        0x00, 0x90, 60, 100,                      // note on C4
    };
    if (tempo_change) {
        // after 240 ticks: 60 BPM
        trk.insert(trk.end(), {0x81, 0x70, 0xff, 0x51, 0x03, 0x0f, 0x42, 0x40});
        trk.insert(trk.end(), {0x81, 0x70, 0x80, 60, 0}); // note off 240 ticks later
    } else {
        trk.insert(trk.end(), {0x83, 0x60, 0x80, 60, 0}); // note off after 480 ticks
    }
    trk.insert(trk.end(), {0x00, 0xff, 0x2f, 0x00});
    b.insert(b.end(), {'M', 'T', 'r', 'k'});
    for (int i = 3; i >= 0; --i) b.push_back((trk.size() >> (8 * i)) & 0xff);
    b.insert(b.end(), trk.begin(), trk.end());
    return b;
}

} // namespace

TEST_CASE("parse single note at 120 BPM") {
    auto events = parse_midi(single_note_smf(false));
    REQUIRE(events.size() == 1);
    CHECK(events[0].pitch == 60);
    CHECK(events[0].onset_s == doctest::Approx(0.0));
    CHECK(events[0].offset_s == doctest::Approx(0.5)); // 480 ticks at 480 tpq, 120 BPM
    CHECK(events[0].program == 0);
}

TEST_CASE("empty track list parses to empty event list") {
    std::vector<uint8_t> b = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 0, 0x01, 0xe0};
    CHECK(parse_midi(b).empty());
}

TEST_CASE("tempo change mid-note matches tick-by-tick integration oracle") {
    auto events = parse_midi(single_note_smf(true));
    REQUIRE(events.size() == 1);
    // oracle: accumulate seconds one tick at a time
    double oracle = 0;
    for (int tick = 0; tick < 480; ++tick) {
        double us = tick < 240 ? 500000.0 : 1000000.0;
        oracle += us / (1e6 * 480);
    }
    CHECK(events[0].offset_s == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(events[0].offset_s == doctest::Approx(0.75));
}

TEST_CASE("parse errors on malformed input") {
    std::vector<uint8_t> bad = {'X', 'X', 'X', 'X'};
    CHECK_THROWS_AS(parse_midi(bad), ParseError);

    // SMF format 2
    std::vector<uint8_t> fmt2 = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 2, 0, 0, 0x01, 0xe0};
    CHECK_THROWS_AS(parse_midi(fmt2), ParseError);

    // zero division
    std::vector<uint8_t> zdiv = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(parse_midi(zdiv), ParseError);
}

TEST_CASE("map_program: GM families and the percussion exclusion") {
    auto vocab = InstrumentVocab::default_vocab();
    CHECK(map_program(0, 0, vocab) == vocab.index_of_name("piano"));
    CHECK(map_program(40, 0, vocab) == vocab.index_of_name("violin"));
    CHECK(map_program(0, 9, vocab) == -1);
    CHECK(map_program(127, 0, vocab) == -1);
}

TEST_CASE("events_to_pianoroll: frame overlap rule") {
    auto vocab = InstrumentVocab::default_vocab();
    NoteEvent e;
    e.pitch = 69;
    e.onset_s = 0.0;
    e.offset_s = 0.1;
    e.program = 0;
    auto roll = events_to_pianoroll({e}, 31.25, 1.0, vocab);
    auto m = static_cast<std::size_t>(vocab.index_of_name("piano"));
    // frame 3 spans [0.096, 0.128) and still overlaps [0, 0.1)
    for (std::size_t t = 0; t < roll.T; ++t)
        CHECK(roll.at(48, t, m) == (t <= 3 ? 1.0f : 0.0f));
}

TEST_CASE("events_to_pianoroll: empty input and T arithmetic") {
    auto vocab = InstrumentVocab::default_vocab();
    auto roll = events_to_pianoroll({}, 31.25, 2.5, vocab);
    CHECK(roll.T == static_cast<std::size_t>(std::ceil(2.5 * 31.25)));
    for (float v : roll.data) CHECK(v == 0.0f);
}

TEST_CASE("events_to_pianoroll matches the interval-overlap oracle on random events") {
    auto vocab = InstrumentVocab::default_vocab();
    std::mt19937_64 rng(99);
    std::vector<NoteEvent> events;
    for (int i = 0; i < 50; ++i) {
        NoteEvent e;
        e.pitch = static_cast<int>(rng() % 128);
        e.onset_s = static_cast<double>(rng() % 4000) / 1000.0;
        e.offset_s = e.onset_s + 0.01 + static_cast<double>(rng() % 1000) / 1000.0;
        e.program = static_cast<int>(rng() % 128);
        e.channel = static_cast<int>(rng() % 16);
        events.push_back(e);
    }
    double fr = 31.25, dur = 6.0;
    auto roll = events_to_pianoroll(events, fr, dur, vocab);

    Pianoroll oracle(88, roll.T, vocab.size());
    for (const auto& e : events) {
        int m = map_program(e.program, e.channel, vocab);
        if (m < 0) continue;
        int f = e.pitch - 21;
        if (f < 0 || f >= 88) continue;
        for (std::size_t t = 0; t < oracle.T; ++t) {
            double fs = t / fr, fe = (t + 1) / fr;
            if (std::min(e.offset_s, fe) - std::max(e.onset_s, fs) > 0)
                oracle.at(static_cast<std::size_t>(f), t, static_cast<std::size_t>(m)) = 1.0f;
        }
    }
    CHECK(roll.data == oracle.data);
}

TEST_CASE("pitch labels are instrument-agnostic") {
    auto vocab = InstrumentVocab::default_vocab();
    std::mt19937_64 rng(7);
    std::vector<NoteEvent> events;
    for (int i = 0; i < 30; ++i) {
        NoteEvent e;
        e.pitch = 30 + static_cast<int>(rng() % 60);
        e.onset_s = static_cast<double>(rng() % 3000) / 1000.0;
        e.offset_s = e.onset_s + 0.2;
        e.program = (i % 2) ? 0 : 40; // piano or violin
        events.push_back(e);
    }
    auto roll = events_to_pianoroll(events, 31.25, 4.0, vocab);
    auto pitch = marginalize_pitch(roll);

    // same events forced onto one instrument
    auto merged_events = events;
    for (auto& e : merged_events) e.program = 0;
    auto merged = events_to_pianoroll(merged_events, 31.25, 4.0, vocab);
    auto merged_pitch = marginalize_pitch(merged);
    CHECK(pitch.data == merged_pitch.data);
}

TEST_CASE("write_midi round-trips through parse_midi") {
    std::vector<NoteEvent> events;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        NoteEvent e;
        e.pitch = 40 + static_cast<int>(rng() % 40);
        e.onset_s = static_cast<double>(i) * 0.25;
        e.offset_s = e.onset_s + 0.25;
        e.program = (i % 2) ? 0 : 42;
        e.channel = i % 2;
        e.velocity = 80;
        events.push_back(e);
    }
    auto bytes = write_midi(events, 120);
    auto back = parse_midi(bytes);
    REQUIRE(back.size() == events.size());
    // one tick at 480 tpq / 120 BPM is ~1.04 ms
    double tick_s = 60.0 / 120 / 480;
    for (const auto& e : events) {
        bool found = false;
        for (const auto& p : back)
            if (p.pitch == e.pitch && p.program == e.program &&
                std::abs(p.onset_s - e.onset_s) <= tick_s &&
                std::abs(p.offset_s - e.offset_s) <= tick_s)
                found = true;
        CHECK(found);
    }
}

TEST_CASE("generate_corpus: determinism, ranges, and split arithmetic") {
    CorpusConfig cc;
    cc.n_clips = 8;
    cc.clip_seconds = 3.0;
    cc.train_fraction = 0.75;

    auto m1 = generate_corpus(7, cc, "corpus_a");
    auto m2 = generate_corpus(7, cc, "corpus_b");
    REQUIRE(m1.entries.size() == 8);

    int train = 0, test = 0;
    for (const auto& e : m1.entries) (e.split == "train" ? train : test)++;
    CHECK(train == 6);
    CHECK(test == 2);

    for (std::size_t i = 0; i < m1.entries.size(); ++i) {
        std::ifstream a(m1.entries[i].midi_path, std::ios::binary);
        std::ifstream b(m2.entries[i].midi_path, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb); // byte-identical for the same seed
        CHECK(!sa.empty());
    }

    // every generated note stays inside its instrument's configured range
    auto vocab = cc.vocab;
    for (const auto& entry : m1.entries) {
        auto events = parse_midi_file(entry.midi_path);
        CHECK(!events.empty());
        for (const auto& e : events) {
            int m = map_program(e.program, e.channel, vocab);
            REQUIRE(m >= 0);
            const auto& inst = vocab.entries[static_cast<std::size_t>(m)];
            CHECK(e.pitch >= inst.pitch_lo);
            CHECK(e.pitch <= inst.pitch_hi);
        }
    }

    std::filesystem::remove_all("corpus_a");
    std::filesystem::remove_all("corpus_b");
}

TEST_CASE("manifest save/load round-trip") {
    CorpusManifest m;
    m.vocab_id = "default8";
    m.seed = 7;
    m.entries = {{"clip0000", "a.mid", "a.wav", "train", 20.0},
                 {"clip0001", "b.mid", "b.wav", "test", 20.0}};
    m.save("manifest_test.tsv");
    auto back = CorpusManifest::load("manifest_test.tsv");
    CHECK(back.vocab_id == "default8");
    CHECK(back.seed == 7);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[1].split == "test");
    CHECK(back.split("train").size() == 1);
    std::filesystem::remove("manifest_test.tsv");
}
