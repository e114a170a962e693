#include "rollnet/png.hpp"

#include <cstring>
#include <fstream>

#include <zlib.h>

namespace rollnet {

namespace {

void put_u32be(std::vector<uint8_t>& v, uint32_t x) {
    for (int i = 3; i >= 0; --i) v.push_back((x >> (8 * i)) & 0xff);
}

void write_chunk(std::ofstream& out, const char* type, const std::vector<uint8_t>& body) {
    std::vector<uint8_t> buf;
    put_u32be(buf, static_cast<uint32_t>(body.size()));
    buf.insert(buf.end(), type, type + 4);
    buf.insert(buf.end(), body.begin(), body.end());
    uint32_t crc = crc32(0, buf.data() + 4, static_cast<uInt>(buf.size() - 4));
    put_u32be(buf, crc);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
}

// dark background first, then high-contrast instrument colors
const uint32_t kPalette[kPaletteSize] = {
    0x000000, 0x800080, 0x008000, 0xff8c00, 0xffd700, 0xdc143c, 0x1e90ff, 0x8b4513,
    0x00ced1, 0xff69b4, 0x556b2f, 0x483d8b, 0xb22222, 0x2f4f4f, 0x9acd32, 0x708090,
};

} // namespace

uint32_t palette_color(std::size_t instrument_index) {
    if (instrument_index >= kPaletteSize) throw ConfigError("palette: index out of range");
    return kPalette[instrument_index];
}

void render_png(const Pianoroll& roll, const std::string& out_path,
                const InstrumentVocab* vocab) {
    if (roll.M > kPaletteSize)
        throw ConfigError("render_png: more instruments than palette colors");

    std::size_t width = roll.T * kCellPixels;
    std::size_t height = roll.F * kCellPixels;
    if (width == 0 || height == 0) {
        width = std::max<std::size_t>(width, kCellPixels);
        height = std::max<std::size_t>(height, kCellPixels);
    }

    // RGB rows with a leading filter byte, white background
    std::vector<uint8_t> raw(height * (1 + width * 3), 0xff);
    for (std::size_t y = 0; y < height; ++y) raw[y * (1 + width * 3)] = 0;

    for (std::size_t t = 0; t < roll.T; ++t) {
        for (std::size_t f = 0; f < roll.F; ++f) {
            // lowest instrument index wins on overlap
            int m_hit = -1;
            for (std::size_t m = 0; m < roll.M; ++m)
                if (roll.at(f, t, m) != 0.0f) {
                    m_hit = static_cast<int>(m);
                    break;
                }
            if (m_hit < 0) continue;
            uint32_t color = kPalette[static_cast<std::size_t>(m_hit)];
            std::size_t y0 = (roll.F - 1 - f) * kCellPixels; // low pitch at the bottom
            std::size_t x0 = t * kCellPixels;
            for (std::size_t dy = 0; dy < kCellPixels; ++dy)
                for (std::size_t dx = 0; dx < kCellPixels; ++dx) {
                    std::size_t p = (y0 + dy) * (1 + width * 3) + 1 + (x0 + dx) * 3;
                    raw[p] = (color >> 16) & 0xff;
                    raw[p + 1] = (color >> 8) & 0xff;
                    raw[p + 2] = color & 0xff;
                }
        }
    }

    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> zbuf(zlen);
    if (compress2(zbuf.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw DataError("render_png: compression failed");
    zbuf.resize(zlen);

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("render_png: cannot write " + out_path);
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    put_u32be(ihdr, static_cast<uint32_t>(width));
    put_u32be(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", zbuf);
    write_chunk(out, "IEND", {});
    if (!out) throw DataError("render_png: write failed");

    std::ofstream legend(out_path + ".legend.txt");
    for (std::size_t m = 0; m < roll.M; ++m) {
        char hex[8];
        std::snprintf(hex, sizeof(hex), "#%06x", kPalette[m]);
        std::string name = vocab && m < vocab->size() ? vocab->entries[m].name
                                                      : "instrument" + std::to_string(m);
        legend << hex << "\t" << name << "\n";
    }
}

} // namespace rollnet
