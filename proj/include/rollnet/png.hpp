#pragma once

#include <string>

#include "rollnet/rolls.hpp"

namespace rollnet {

constexpr std::size_t kPaletteSize = 16;
constexpr std::size_t kCellPixels = 2; // 2x2 pixels per roll cell

// Pianoroll image: pitch on the vertical axis (low at the
// bottom), time horizontal, one palette color per instrument, overlaps
// painted by the lowest instrument index, white background.
// Writes a sidecar "<out>.legend.txt" mapping colors to instrument names.
void render_png(const Pianoroll& roll, const std::string& out_path,
                const InstrumentVocab* vocab = nullptr);

// palette entry as 0xRRGGBB
uint32_t palette_color(std::size_t instrument_index);

} // namespace rollnet
