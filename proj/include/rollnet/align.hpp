#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "rollnet/dsp.hpp"
#include "rollnet/midi.hpp"

namespace rollnet {

struct AlignmentPath {
    // monotone (audio_frame, midi_frame) pairs from (0,0) to (Ta-1, Tm-1)
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    double normalized_cost = 0;
};

// Dense T_a x T_m matrix, row-major.
struct CostMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    CostMatrix() = default;
    CostMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

// 1 - cosine similarity between spectrogram columns; all-zero columns are
// at distance 1 from everything.
CostMatrix cost_matrix(const Spectrogram& a, const Spectrogram& b);

// Minimal-cost monotone path with an additive penalty of median(cost) per
// non-diagonal step; ties prefer diagonal, then the (1,0) step. The
// returned cost is normalized by path length.
AlignmentPath dtw(const CostMatrix& cost);

// Retimes events through piecewise-linear interpolation of the path
// (midi frame -> audio frame); offsets stay at least 1 ms after onsets.
std::vector<NoteEvent> warp_events(const std::vector<NoteEvent>& events,
                                   const AlignmentPath& path, double frame_rate);

} // namespace rollnet
