#include "rollnet/rolls.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace rollnet {

namespace {

void put_u8(std::ostream& out, uint8_t v) { out.put(static_cast<char>(v)); }

void put_u16(std::ostream& out, uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

void put_u32(std::ostream& out, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void put_f32(std::ostream& out, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(out, u);
}

void put_f64(std::ostream& out, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    put_u32(out, static_cast<uint32_t>(u & 0xffffffffu));
    put_u32(out, static_cast<uint32_t>(u >> 32));
}

uint8_t get_u8(std::istream& in) {
    int c = in.get();
    if (c == EOF) throw ParseError("PRL: truncated payload");
    return static_cast<uint8_t>(c);
}

uint16_t get_u16(std::istream& in) {
    uint16_t lo = get_u8(in), hi = get_u8(in);
    return static_cast<uint16_t>(lo | (hi << 8));
}

uint32_t get_u32(std::istream& in) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(get_u8(in)) << (8 * i);
    return v;
}

float get_f32(std::istream& in) {
    uint32_t u = get_u32(in);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

double get_f64(std::istream& in) {
    uint64_t lo = get_u32(in);
    uint64_t hi = get_u32(in);
    uint64_t u = lo | (hi << 32);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

bool all_binary(const std::vector<float>& data) {
    return std::all_of(data.begin(), data.end(),
                       [](float v) { return v == 0.0f || v == 1.0f; });
}

// Shared header+payload writer; dims already include the padding 1s.
std::size_t write_prl_raw(std::ostream& out, uint8_t kind, uint32_t F, uint32_t T,
                          uint32_t M, double frame_rate, const std::string& vocab_id,
                          const std::vector<float>& data) {
    if (vocab_id.size() > 0xffff) throw DataError("PRL: vocab id too long");
    out.write("PRL1", 4);
    put_u8(out, kind);
    uint8_t payload = all_binary(data) ? 0 : 1;
    put_u8(out, payload);
    put_u32(out, F);
    put_u32(out, T);
    put_u32(out, M);
    put_f64(out, frame_rate);
    put_u16(out, static_cast<uint16_t>(vocab_id.size()));
    out.write(vocab_id.data(), static_cast<std::streamsize>(vocab_id.size()));
    if (payload == 0) {
        for (float v : data) put_u8(out, v != 0.0f ? 1 : 0);
    } else {
        for (float v : data) put_f32(out, v);
    }
    if (!out) throw DataError("PRL: write failed");
    std::size_t header = 4 + 1 + 1 + 12 + 8 + 2 + vocab_id.size();
    return header + data.size() * (payload == 0 ? 1 : 4);
}

std::vector<float> read_payload(std::istream& in, uint8_t payload, std::size_t n) {
    std::vector<float> data(n);
    if (payload == 0) {
        for (std::size_t i = 0; i < n; ++i) data[i] = get_u8(in) ? 1.0f : 0.0f;
    } else {
        for (std::size_t i = 0; i < n; ++i) data[i] = get_f32(in);
    }
    return data;
}

} // namespace

int InstrumentVocab::index_of_program(int program) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& p = entries[i].programs;
        if (std::find(p.begin(), p.end(), program) != p.end()) return static_cast<int>(i);
    }
    return -1;
}

int InstrumentVocab::index_of_name(const std::string& name) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name == name) return static_cast<int>(i);
    return -1;
}

void InstrumentVocab::validate() const {
    if (entries.empty()) throw ConfigError("vocab: empty vocabulary");
    std::vector<bool> seen(128, false);
    for (const auto& e : entries) {
        if (e.name.empty()) throw ConfigError("vocab: unnamed entry");
        for (int p : e.programs) {
            if (p < 0 || p > 127) throw ConfigError("vocab: program out of [0,127]");
            if (seen[static_cast<std::size_t>(p)])
                throw ConfigError("vocab: program sets overlap at program " + std::to_string(p));
            seen[static_cast<std::size_t>(p)] = true;
        }
        if (e.pitch_lo > e.pitch_hi) throw ConfigError("vocab: bad pitch range for " + e.name);
    }
}

InstrumentVocab InstrumentVocab::default_vocab() {
    // The eight named instruments, each mapped to its GM program family.
    InstrumentVocab v;
    v.id = "default8";
    v.entries = {
        {"piano", {0, 1, 2, 3, 4, 5, 6, 7}, 21, 108},
        {"acoustic_guitar", {24, 25}, 40, 84},
        {"electric_guitar", {26, 27, 28, 29, 30, 31}, 40, 86},
        {"trumpet", {56, 59}, 54, 86},
        {"sax", {64, 65, 66, 67}, 49, 87},
        {"violin", {40}, 55, 100},
        {"cello", {42}, 36, 76},
        {"flute", {73}, 60, 96},
    };
    return v;
}

// Vocab file: line-oriented, '#' comments.
//   id <vocab-id>
//   inst <name> <lo> <hi> <prog> [<prog> ...]
InstrumentVocab InstrumentVocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("vocab: cannot open " + path);
    InstrumentVocab v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "id") {
            ls >> v.id;
        } else if (tag == "inst") {
            Entry e;
            ls >> e.name >> e.pitch_lo >> e.pitch_hi;
            int p;
            while (ls >> p) e.programs.push_back(p);
            if (!e.name.empty()) v.entries.push_back(std::move(e));
        } else {
            throw ConfigError("vocab: unknown line tag '" + tag + "' in " + path);
        }
    }
    v.validate();
    return v;
}

void InstrumentVocab::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("vocab: cannot write " + path);
    out << "id " << id << "\n";
    for (const auto& e : entries) {
        out << "inst " << e.name << " " << e.pitch_lo << " " << e.pitch_hi;
        for (int p : e.programs) out << " " << p;
        out << "\n";
    }
}

bool Pianoroll::is_binary() const { return all_binary(data); }

PitchRoll marginalize_pitch(const Pianoroll& roll) {
    PitchRoll out(roll.F, roll.T);
    out.frame_rate = roll.frame_rate;
    out.pitch_offset = roll.pitch_offset;
    for (std::size_t m = 0; m < roll.M; ++m)
        for (std::size_t t = 0; t < roll.T; ++t)
            for (std::size_t f = 0; f < roll.F; ++f)
                out.at(f, t) = std::max(out.at(f, t), roll.at(f, t, m));
    return out;
}

InstrumentRoll marginalize_instrument(const Pianoroll& roll) {
    InstrumentRoll out(roll.M, roll.T);
    out.frame_rate = roll.frame_rate;
    out.vocab_id = roll.vocab_id;
    for (std::size_t m = 0; m < roll.M; ++m)
        for (std::size_t t = 0; t < roll.T; ++t)
            for (std::size_t f = 0; f < roll.F; ++f)
                out.at(m, t) = std::max(out.at(m, t), roll.at(f, t, m));
    return out;
}

namespace {
void check_threshold(float threshold) {
    if (!(threshold > 0.0f && threshold < 1.0f))
        throw ConfigError("binarize: threshold must be in (0,1)");
}
void binarize_data(std::vector<float>& data, float threshold) {
    for (float& v : data) v = (v >= threshold) ? 1.0f : 0.0f;
}
} // namespace

Pianoroll binarize(const Pianoroll& roll, float threshold) {
    check_threshold(threshold);
    Pianoroll out = roll;
    binarize_data(out.data, threshold);
    return out;
}

PitchRoll binarize(const PitchRoll& roll, float threshold) {
    check_threshold(threshold);
    PitchRoll out = roll;
    binarize_data(out.data, threshold);
    return out;
}

InstrumentRoll binarize(const InstrumentRoll& roll, float threshold) {
    check_threshold(threshold);
    InstrumentRoll out = roll;
    binarize_data(out.data, threshold);
    return out;
}

std::size_t write_prl(const Pianoroll& roll, std::ostream& out) {
    return write_prl_raw(out, 0, static_cast<uint32_t>(roll.F), static_cast<uint32_t>(roll.T),
                         static_cast<uint32_t>(roll.M), roll.frame_rate, roll.vocab_id, roll.data);
}

std::size_t write_prl(const PitchRoll& roll, std::ostream& out) {
    return write_prl_raw(out, 1, static_cast<uint32_t>(roll.F), static_cast<uint32_t>(roll.T),
                         1, roll.frame_rate, "", roll.data);
}

std::size_t write_prl(const InstrumentRoll& roll, std::ostream& out) {
    return write_prl_raw(out, 2, 1, static_cast<uint32_t>(roll.T),
                         static_cast<uint32_t>(roll.M), roll.frame_rate, roll.vocab_id, roll.data);
}

std::size_t write_prl(const AnyRoll& roll, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("PRL: cannot write " + path);
    return std::visit([&](const auto& r) { return write_prl(r, out); }, roll);
}

AnyRoll read_prl(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "PRL1", 4) != 0)
        throw ParseError("PRL: bad magic");
    uint8_t kind = get_u8(in);
    uint8_t payload = get_u8(in);
    if (kind > 2) throw ParseError("PRL: unknown roll kind");
    if (payload > 1) throw ParseError("PRL: unknown payload type");
    uint32_t F = get_u32(in), T = get_u32(in), M = get_u32(in);
    double frame_rate = get_f64(in);
    uint16_t idlen = get_u16(in);
    std::string vocab_id(idlen, '\0');
    in.read(vocab_id.data(), idlen);
    if (in.gcount() != idlen) throw ParseError("PRL: truncated vocab id");
    uint64_t cells = static_cast<uint64_t>(F) * T * M;
    if (cells > (1ull << 32)) throw ParseError("PRL: dimension overflow");
    auto data = read_payload(in, payload, static_cast<std::size_t>(cells));
    if (!(frame_rate > 0)) throw ParseError("PRL: non-positive frame rate");

    switch (kind) {
    case 0: {
        Pianoroll r(F, T, M);
        r.frame_rate = frame_rate;
        r.vocab_id = vocab_id;
        r.data = std::move(data);
        return r;
    }
    case 1: {
        if (M != 1) throw ParseError("PRL: pitch roll with M != 1");
        PitchRoll r(F, T);
        r.frame_rate = frame_rate;
        r.data = std::move(data);
        return r;
    }
    default: {
        if (F != 1) throw ParseError("PRL: instrument roll with F != 1");
        InstrumentRoll r(M, T);
        r.frame_rate = frame_rate;
        r.vocab_id = vocab_id;
        r.data = std::move(data);
        return r;
    }
    }
}

AnyRoll read_prl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("PRL: cannot open " + path);
    return read_prl(in);
}

} // namespace rollnet
