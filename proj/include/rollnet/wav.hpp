#pragma once

#include <string>

#include "rollnet/synth.hpp"

namespace rollnet {

// PCM 16-bit little-endian, mono.
void write_wav(const std::string& path, const Waveform& wave);
Waveform read_wav(const std::string& path);

} // namespace rollnet
