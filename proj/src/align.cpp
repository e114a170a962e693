#include "rollnet/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rollnet {

CostMatrix cost_matrix(const Spectrogram& a, const Spectrogram& b) {
    if (a.T == 0 || b.T == 0) throw DataError("cost_matrix: empty spectrogram");
    if (a.F != b.F) throw DataError("cost_matrix: bin count mismatch");

    std::vector<double> na(a.T), nb(b.T);
    for (std::size_t i = 0; i < a.T; ++i) {
        double s = 0;
        for (std::size_t f = 0; f < a.F; ++f) s += static_cast<double>(a.at(f, i)) * a.at(f, i);
        na[i] = std::sqrt(s);
    }
    for (std::size_t j = 0; j < b.T; ++j) {
        double s = 0;
        for (std::size_t f = 0; f < b.F; ++f) s += static_cast<double>(b.at(f, j)) * b.at(f, j);
        nb[j] = std::sqrt(s);
    }

    CostMatrix cost(a.T, b.T);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(a.T); ++i) {
        for (std::size_t j = 0; j < b.T; ++j) {
            double denom = na[static_cast<std::size_t>(i)] * nb[j];
            if (denom == 0) {
                cost.at(static_cast<std::size_t>(i), j) = 1.0;
                continue;
            }
            double dot = 0;
            for (std::size_t f = 0; f < a.F; ++f)
                dot += static_cast<double>(a.at(f, static_cast<std::size_t>(i))) * b.at(f, j);
            cost.at(static_cast<std::size_t>(i), j) = 1.0 - dot / denom;
        }
    }
    return cost;
}

AlignmentPath dtw(const CostMatrix& cost) {
    if (cost.rows == 0 || cost.cols == 0) throw DataError("dtw: empty cost matrix");
    std::size_t R = cost.rows, C = cost.cols;

    std::vector<double> sorted(cost.data);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<int64_t>(sorted.size() / 2),
                     sorted.end());
    double phi = sorted[sorted.size() / 2]; // non-diagonal step penalty

    // 0 = diagonal, 1 = from above (audio step), 2 = from left (midi step)
    std::vector<double> acc(R * C, std::numeric_limits<double>::infinity());
    std::vector<uint8_t> from(R * C, 0);
    acc[0] = cost.at(0, 0);
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < C; ++j) {
            if (i == 0 && j == 0) continue;
            double best = std::numeric_limits<double>::infinity();
            uint8_t arg = 0;
            if (i > 0 && j > 0 && acc[(i - 1) * C + (j - 1)] < best) {
                best = acc[(i - 1) * C + (j - 1)];
                arg = 0;
            }
            if (i > 0 && acc[(i - 1) * C + j] + phi < best) {
                best = acc[(i - 1) * C + j] + phi;
                arg = 1;
            }
            if (j > 0 && acc[i * C + (j - 1)] + phi < best) {
                best = acc[i * C + (j - 1)] + phi;
                arg = 2;
            }
            acc[i * C + j] = best + cost.at(i, j);
            from[i * C + j] = arg;
        }
    }

    AlignmentPath path;
    std::size_t i = R - 1, j = C - 1;
    path.pairs.emplace_back(i, j);
    while (i != 0 || j != 0) {
        switch (from[i * C + j]) {
        case 0: --i; --j; break;
        case 1: --i; break;
        default: --j; break;
        }
        path.pairs.emplace_back(i, j);
    }
    std::reverse(path.pairs.begin(), path.pairs.end());
    path.normalized_cost = acc[(R - 1) * C + (C - 1)] / static_cast<double>(path.pairs.size());
    return path;
}

namespace {

// midi frame -> audio frame, piecewise linear over the path knots
double map_frame(const AlignmentPath& path, double midi_frame) {
    const auto& p = path.pairs;
    if (midi_frame <= static_cast<double>(p.front().second))
        return static_cast<double>(p.front().first);
    if (midi_frame >= static_cast<double>(p.back().second))
        return static_cast<double>(p.back().first);
    // first pair with midi coordinate >= midi_frame
    auto it = std::lower_bound(p.begin(), p.end(), midi_frame,
                               [](const std::pair<std::size_t, std::size_t>& pr, double v) {
                                   return static_cast<double>(pr.second) < v;
                               });
    auto hi = *it;
    if (static_cast<double>(hi.second) == midi_frame) return static_cast<double>(hi.first);
    auto lo = *(it - 1);
    if (hi.second == lo.second) return static_cast<double>(hi.first);
    double u = (midi_frame - static_cast<double>(lo.second)) /
               static_cast<double>(hi.second - lo.second);
    return static_cast<double>(lo.first) +
           u * static_cast<double>(hi.first - lo.first);
}

} // namespace

std::vector<NoteEvent> warp_events(const std::vector<NoteEvent>& events,
                                   const AlignmentPath& path, double frame_rate) {
    if (path.pairs.empty()) throw DataError("warp_events: empty path");
    std::vector<NoteEvent> out;
    out.reserve(events.size());
    for (NoteEvent e : events) {
        e.onset_s = map_frame(path, e.onset_s * frame_rate) / frame_rate;
        e.offset_s = map_frame(path, e.offset_s * frame_rate) / frame_rate;
        if (e.offset_s < e.onset_s + 1e-3) e.offset_s = e.onset_s + 1e-3;
        out.push_back(e);
    }
    return out;
}

} // namespace rollnet
