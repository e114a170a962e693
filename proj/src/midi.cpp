#include "rollnet/midi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace rollnet {

namespace {

struct ByteReader {
    const std::vector<uint8_t>& bytes;
    std::size_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }
    uint8_t u8() {
        if (pos >= bytes.size()) throw ParseError("midi: unexpected end of file");
        return bytes[pos++];
    }
    uint8_t peek() const {
        if (pos >= bytes.size()) throw ParseError("midi: unexpected end of file");
        return bytes[pos];
    }
    uint16_t u16() { return static_cast<uint16_t>((u8() << 8) | u8()); }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
        return v;
    }
    uint32_t varint() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            uint8_t b = u8();
            v = (v << 7) | (b & 0x7f);
            if (!(b & 0x80)) return v;
        }
        throw ParseError("midi: variable-length quantity too long");
    }
    void skip(std::size_t n) {
        if (pos + n > bytes.size()) throw ParseError("midi: truncated chunk");
        pos += n;
    }
    void expect(const char* tag) {
        if (pos + 4 > bytes.size() || std::memcmp(bytes.data() + pos, tag, 4) != 0)
            throw ParseError(std::string("midi: missing ") + tag + " chunk");
        pos += 4;
    }
};

struct TempoChange {
    int64_t tick;
    uint32_t us_per_quarter;
};

// Piecewise integration of the tempo map.
double tick_to_seconds(int64_t tick, const std::vector<TempoChange>& tempi, int tpq) {
    double seconds = 0;
    int64_t prev_tick = 0;
    uint32_t us = 500000; // MIDI default, 120 BPM
    for (const auto& tc : tempi) {
        if (tc.tick >= tick) break;
        seconds += static_cast<double>(tc.tick - prev_tick) * us / (1e6 * tpq);
        prev_tick = tc.tick;
        us = tc.us_per_quarter;
    }
    seconds += static_cast<double>(tick - prev_tick) * us / (1e6 * tpq);
    return seconds;
}

struct RawNote {
    int64_t on_tick;
    int64_t off_tick;
    int pitch, program, channel, velocity;
};

struct TrackScan {
    std::vector<RawNote> notes;
    std::vector<TempoChange> tempi;
};

TrackScan scan_track(ByteReader& r) {
    TrackScan out;
    r.expect("MTrk");
    uint32_t len = r.u32();
    std::size_t end = r.pos + len;
    if (end > r.bytes.size()) throw ParseError("midi: truncated track");

    int64_t tick = 0;
    uint8_t status = 0;
    int program[16] = {0};
    // open notes per (channel, pitch): stack of onsets for overlapping notes
    std::map<std::pair<int, int>, std::vector<std::pair<int64_t, int>>> open;

    auto note_off = [&](int ch, int pitch) {
        auto it = open.find({ch, pitch});
        if (it == open.end() || it->second.empty()) return; // stray note-off
        auto [on_tick, vel] = it->second.back();
        it->second.pop_back();
        out.notes.push_back({on_tick, tick, pitch, program[ch], ch, vel});
    };

    while (r.pos < end) {
        tick += r.varint();
        uint8_t b = r.peek();
        if (b & 0x80) {
            status = r.u8();
        } else if (status == 0) {
            throw ParseError("midi: data byte without running status");
        }
        if (status == 0xff) { // meta
            uint8_t type = r.u8();
            uint32_t mlen = r.varint();
            if (type == 0x51) {
                if (mlen != 3) throw ParseError("midi: bad tempo meta length");
                uint32_t us = (r.u8() << 16) | (r.u8() << 8) | r.u8();
                if (us == 0) throw ParseError("midi: zero tempo");
                out.tempi.push_back({tick, us});
            } else {
                r.skip(mlen);
                if (type == 0x2f) break; // end of track
            }
        } else if (status == 0xf0 || status == 0xf7) {
            r.skip(r.varint());
        } else {
            int ch = status & 0x0f;
            switch (status & 0xf0) {
            case 0x90: {
                int pitch = r.u8(), vel = r.u8();
                if (vel > 0)
                    open[{ch, pitch}].push_back({tick, vel});
                else
                    note_off(ch, pitch);
                break;
            }
            case 0x80: {
                int pitch = r.u8();
                r.u8(); // release velocity
                note_off(ch, pitch);
                break;
            }
            case 0xc0:
                program[ch] = r.u8();
                break;
            case 0xd0:
                r.u8();
                break;
            case 0xa0:
            case 0xb0:
            case 0xe0:
                r.u8();
                r.u8();
                break;
            default:
                throw ParseError("midi: unexpected status byte");
            }
        }
    }
    r.pos = end;

    // hanging notes close at track end
    for (auto& [key, stack] : open)
        for (auto [on_tick, vel] : stack)
            out.notes.push_back({on_tick, tick, key.second, program[key.first], key.first, vel});
    return out;
}

} // namespace

std::vector<NoteEvent> parse_midi(const std::vector<uint8_t>& bytes) {
    ByteReader r{bytes};
    r.expect("MThd");
    uint32_t hlen = r.u32();
    if (hlen < 6) throw ParseError("midi: bad header length");
    uint16_t format = r.u16();
    uint16_t ntrks = r.u16();
    uint16_t division = r.u16();
    r.skip(hlen - 6);
    if (format > 1) throw ParseError("midi: SMF format 2 not supported");
    if (division & 0x8000) throw ParseError("midi: SMPTE division not supported");
    if (division == 0) throw ParseError("midi: zero ticks per quarter");

    std::vector<TrackScan> tracks;
    for (uint16_t i = 0; i < ntrks; ++i) tracks.push_back(scan_track(r));

    std::vector<TempoChange> tempi;
    for (const auto& t : tracks) tempi.insert(tempi.end(), t.tempi.begin(), t.tempi.end());
    std::stable_sort(tempi.begin(), tempi.end(),
                     [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });

    std::vector<NoteEvent> events;
    for (const auto& t : tracks) {
        for (const auto& n : t.notes) {
            NoteEvent e;
            e.pitch = n.pitch;
            e.onset_s = tick_to_seconds(n.on_tick, tempi, division);
            e.offset_s = tick_to_seconds(n.off_tick, tempi, division);
            e.program = n.program;
            e.channel = n.channel;
            e.velocity = n.velocity;
            if (e.offset_s > e.onset_s) events.push_back(e);
        }
    }
    std::stable_sort(events.begin(), events.end(), [](const NoteEvent& a, const NoteEvent& b) {
        return a.onset_s < b.onset_s;
    });
    return events;
}

std::vector<NoteEvent> parse_midi_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("midi: cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return parse_midi(bytes);
}

namespace {

void put_u16be(std::vector<uint8_t>& v, uint16_t x) {
    v.push_back(x >> 8);
    v.push_back(x & 0xff);
}

void put_u32be(std::vector<uint8_t>& v, uint32_t x) {
    for (int i = 3; i >= 0; --i) v.push_back((x >> (8 * i)) & 0xff);
}

void put_varint(std::vector<uint8_t>& v, uint32_t x) {
    uint8_t buf[4];
    int n = 0;
    buf[n++] = x & 0x7f;
    while (x >>= 7) buf[n++] = (x & 0x7f) | 0x80;
    while (n--) v.push_back(buf[n]);
}

void append_track(std::vector<uint8_t>& out, const std::vector<uint8_t>& body) {
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_u32be(out, static_cast<uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
}

} // namespace

std::vector<uint8_t> write_midi(const std::vector<NoteEvent>& events, int tempo_bpm,
                                int ticks_per_quarter) {
    if (tempo_bpm <= 0) throw ConfigError("midi: tempo must be positive");
    double tick_per_s = ticks_per_quarter * tempo_bpm / 60.0;

    // group by (program, channel), preserving first-seen order
    std::vector<std::pair<int, int>> groups;
    for (const auto& e : events) {
        std::pair<int, int> key{e.program, e.channel};
        if (std::find(groups.begin(), groups.end(), key) == groups.end())
            groups.push_back(key);
    }

    std::vector<uint8_t> out;
    out.insert(out.end(), {'M', 'T', 'h', 'd'});
    put_u32be(out, 6);
    put_u16be(out, 1);
    put_u16be(out, static_cast<uint16_t>(1 + groups.size()));
    put_u16be(out, static_cast<uint16_t>(ticks_per_quarter));

    {
        std::vector<uint8_t> body;
        uint32_t us = static_cast<uint32_t>(std::llround(60e6 / tempo_bpm));
        put_varint(body, 0);
        body.insert(body.end(), {0xff, 0x51, 0x03});
        body.push_back((us >> 16) & 0xff);
        body.push_back((us >> 8) & 0xff);
        body.push_back(us & 0xff);
        put_varint(body, 0);
        body.insert(body.end(), {0xff, 0x2f, 0x00});
        append_track(out, body);
    }

    for (auto [program, channel] : groups) {
        struct Msg {
            int64_t tick;
            int order; // offs before ons at the same tick
            uint8_t status, d1, d2;
        };
        std::vector<Msg> msgs;
        for (const auto& e : events) {
            if (e.program != program || e.channel != channel) continue;
            int64_t on = std::llround(e.onset_s * tick_per_s);
            int64_t off = std::llround(e.offset_s * tick_per_s);
            if (off <= on) off = on + 1;
            uint8_t vel = static_cast<uint8_t>(std::clamp(e.velocity, 1, 127));
            msgs.push_back({on, 1, static_cast<uint8_t>(0x90 | channel),
                            static_cast<uint8_t>(e.pitch), vel});
            msgs.push_back({off, 0, static_cast<uint8_t>(0x80 | channel),
                            static_cast<uint8_t>(e.pitch), 0});
        }
        std::stable_sort(msgs.begin(), msgs.end(), [](const Msg& a, const Msg& b) {
            return std::tie(a.tick, a.order) < std::tie(b.tick, b.order);
        });

        std::vector<uint8_t> body;
        put_varint(body, 0);
        body.push_back(static_cast<uint8_t>(0xc0 | channel));
        body.push_back(static_cast<uint8_t>(program));
        int64_t prev = 0;
        for (const auto& m : msgs) {
            put_varint(body, static_cast<uint32_t>(m.tick - prev));
            prev = m.tick;
            body.push_back(m.status);
            body.push_back(m.d1);
            body.push_back(m.d2);
        }
        put_varint(body, 0);
        body.insert(body.end(), {0xff, 0x2f, 0x00});
        append_track(out, body);
    }
    return out;
}

void write_midi_file(const std::string& path, const std::vector<NoteEvent>& events,
                     int tempo_bpm, int ticks_per_quarter) {
    auto bytes = write_midi(events, tempo_bpm, ticks_per_quarter);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("midi: cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

int map_program(int program, int channel, const InstrumentVocab& vocab) {
    if (channel == 9) return -1; // percussion
    return vocab.index_of_program(program);
}

Pianoroll events_to_pianoroll(const std::vector<NoteEvent>& events, double frame_rate,
                              double duration_s, const InstrumentVocab& vocab) {
    if (!(frame_rate > 0)) throw ConfigError("events_to_pianoroll: frame_rate must be > 0");
    auto T = static_cast<std::size_t>(std::ceil(duration_s * frame_rate));
    Pianoroll roll(kNumPitchBins, T, vocab.size());
    roll.frame_rate = frame_rate;
    roll.vocab_id = vocab.id;

    for (const auto& e : events) {
        int m = map_program(e.program, e.channel, vocab);
        if (m < 0) continue;
        int f = e.pitch - roll.pitch_offset;
        if (f < 0 || f >= static_cast<int>(roll.F)) continue;
        auto t0 = static_cast<int64_t>(std::floor(e.onset_s * frame_rate));
        if (t0 < 0) t0 = 0;
        for (int64_t t = t0; t < static_cast<int64_t>(T); ++t) {
            double frame_start = t / frame_rate;
            double frame_end = (t + 1) / frame_rate;
            if (frame_start >= e.offset_s) break;
            if (std::min(e.offset_s, frame_end) - std::max(e.onset_s, frame_start) > 0)
                roll.at(static_cast<std::size_t>(f), static_cast<std::size_t>(t),
                        static_cast<std::size_t>(m)) = 1.0f;
        }
    }
    return roll;
}

std::vector<CorpusEntry> CorpusManifest::split(const std::string& which) const {
    std::vector<CorpusEntry> out;
    for (const auto& e : entries)
        if (e.split == which) out.push_back(e);
    return out;
}

void CorpusManifest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("manifest: cannot write " + path);
    out << "#vocab\t" << vocab_id << "\n";
    out << "#seed\t" << seed << "\n";
    for (const auto& e : entries)
        out << e.clip_id << "\t" << e.midi_path << "\t" << e.audio_path << "\t" << e.split
            << "\t" << e.duration_s << "\n";
}

CorpusManifest CorpusManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("manifest: cannot open " + path);
    CorpusManifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string tag;
            std::getline(ls, tag, '\t');
            if (tag == "#vocab") std::getline(ls, m.vocab_id, '\t');
            if (tag == "#seed") ls >> m.seed;
            continue;
        }
        CorpusEntry e;
        std::string dur;
        std::getline(ls, e.clip_id, '\t');
        std::getline(ls, e.midi_path, '\t');
        std::getline(ls, e.audio_path, '\t');
        std::getline(ls, e.split, '\t');
        std::getline(ls, dur, '\t');
        if (e.clip_id.empty() || dur.empty()) throw ParseError("manifest: malformed line");
        e.duration_s = std::stod(dur);
        m.entries.push_back(std::move(e));
    }
    return m;
}

namespace {

// uniform integer in [lo,hi] with a fixed mapping; std::uniform_int_distribution
// is implementation-defined, this is not
int rng_range(std::mt19937_64& rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

double rng_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace

CorpusManifest generate_corpus(uint64_t seed, const CorpusConfig& config,
                               const std::string& out_dir) {
    if (config.n_clips < 2) throw ConfigError("corpus: n_clips must be >= 2");
    if (config.clip_seconds < 2) throw ConfigError("corpus: clip_seconds must be >= 2");
    if (config.min_note_eighths < 1 || config.max_note_eighths < config.min_note_eighths)
        throw ConfigError("corpus: bad note length range");
    if (config.rest_probability < 0 || config.rest_probability >= 1)
        throw ConfigError("corpus: rest_probability must be in [0,1)");
    if (config.walk_semitones < 0) throw ConfigError("corpus: walk_semitones must be >= 0");
    config.vocab.validate();
    std::filesystem::create_directories(out_dir);

    CorpusManifest manifest;
    manifest.vocab_id = config.vocab.id;
    manifest.seed = seed;

    std::mt19937_64 master(seed);
    std::vector<uint64_t> clip_seeds(static_cast<std::size_t>(config.n_clips));
    for (auto& s : clip_seeds) s = master();

    int n_train = static_cast<int>(std::lround(config.n_clips * config.train_fraction));
    n_train = std::clamp(n_train, 1, config.n_clips - 1);

    for (int c = 0; c < config.n_clips; ++c) {
        std::mt19937_64 rng(clip_seeds[static_cast<std::size_t>(c)]);
        int max_poly = std::min(config.max_polyphony, static_cast<int>(config.vocab.size()));
        int k = rng_range(rng, std::min(config.min_polyphony, max_poly), max_poly);

        // k distinct instruments via partial Fisher-Yates
        std::vector<int> order(config.vocab.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        for (int i = 0; i < k; ++i) {
            int j = rng_range(rng, i, static_cast<int>(order.size()) - 1);
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        int bpm = rng_range(rng, config.min_tempo_bpm, config.max_tempo_bpm);
        double eighth = 60.0 / bpm / 2.0;
        int n_steps = static_cast<int>(std::floor(config.clip_seconds / eighth));

        std::vector<NoteEvent> events;
        int channel = 0;
        for (int i = 0; i < k; ++i) {
            const auto& inst = config.vocab.entries[static_cast<std::size_t>(order[i])];
            if (channel == 9) ++channel; // never emit percussion
            // monophonic random walk on an eighth-note grid
            int pitch = rng_range(rng, inst.pitch_lo, inst.pitch_hi);
            int step = 0;
            while (step < n_steps) {
                if (rng_unit(rng) < config.rest_probability) {
                    ++step;
                    continue;
                }
                int len = rng_range(rng, config.min_note_eighths, config.max_note_eighths);
                len = std::min(len, n_steps - step);
                NoteEvent e;
                e.pitch = pitch;
                e.onset_s = step * eighth;
                e.offset_s = std::min((step + len) * eighth, config.clip_seconds);
                e.program = inst.programs.front();
                e.channel = channel;
                e.velocity = 80 + rng_range(rng, -10, 10);
                events.push_back(e);
                step += len;
                pitch = std::clamp(pitch + rng_range(rng, -config.walk_semitones,
                                                     config.walk_semitones),
                                   inst.pitch_lo, inst.pitch_hi);
            }
            ++channel;
        }

        char name[32];
        std::snprintf(name, sizeof(name), "clip%04d", c);
        CorpusEntry entry;
        entry.clip_id = name;
        entry.midi_path = out_dir + "/" + name + ".mid";
        entry.audio_path = out_dir + "/" + name + ".wav";
        entry.split = c < n_train ? "train" : "test";
        entry.duration_s = config.clip_seconds;
        write_midi_file(entry.midi_path, events, bpm);
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

} // namespace rollnet
