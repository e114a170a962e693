#include "rollnet/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace rollnet {

namespace {

void put_u16(std::ofstream& out, uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

void put_u32(std::ofstream& out, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw ParseError("wav: truncated file");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t get_u16(std::ifstream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (in.gcount() != 2) throw ParseError("wav: truncated file");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

} // namespace

void write_wav(const std::string& path, const Waveform& wave) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("wav: cannot write " + path);
    auto n = static_cast<uint32_t>(wave.samples.size());
    uint32_t data_bytes = n * 2;
    out.write("RIFF", 4);
    put_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(out, 16);
    put_u16(out, 1); // PCM
    put_u16(out, 1); // mono
    put_u32(out, static_cast<uint32_t>(wave.sample_rate));
    put_u32(out, static_cast<uint32_t>(wave.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out.write("data", 4);
    put_u32(out, data_bytes);
    for (float s : wave.samples) {
        int v = static_cast<int>(std::lround(std::clamp(s, -1.0f, 1.0f) * 32767.0f));
        char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
        out.write(b, 2);
    }
    if (!out) throw DataError("wav: write failed for " + path);
}

Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("wav: cannot open " + path);
    char tag[4];
    in.read(tag, 4);
    if (in.gcount() != 4 || std::memcmp(tag, "RIFF", 4) != 0)
        throw ParseError("wav: not a RIFF file");
    get_u32(in);
    in.read(tag, 4);
    if (std::memcmp(tag, "WAVE", 4) != 0) throw ParseError("wav: not a WAVE file");

    Waveform wave;
    bool got_fmt = false;
    while (in.read(tag, 4) && in.gcount() == 4) {
        uint32_t len = get_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            uint16_t format = get_u16(in);
            uint16_t channels = get_u16(in);
            uint32_t rate = get_u32(in);
            get_u32(in);
            get_u16(in);
            uint16_t bits = get_u16(in);
            if (format != 1 || bits != 16) throw ParseError("wav: only PCM16 supported");
            if (channels != 1) throw ParseError("wav: only mono supported");
            wave.sample_rate = static_cast<int>(rate);
            if (len > 16) in.seekg(len - 16, std::ios::cur);
            got_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!got_fmt) throw ParseError("wav: data chunk before fmt");
            std::size_t n = len / 2;
            wave.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                auto v = static_cast<int16_t>(get_u16(in));
                wave.samples[i] = static_cast<float>(v) / 32767.0f;
            }
            return wave;
        } else {
            in.seekg(len + (len & 1), std::ios::cur);
        }
    }
    throw ParseError("wav: missing data chunk");
}

} // namespace rollnet
