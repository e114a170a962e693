// Timing comparison between the OpenMP kernels and their serial reference
// implementations. Run with different ROLLNET_THREADS / OMP_NUM_THREADS to
// see scaling; outputs one line per kernel.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rollnet/dsp.hpp"
#include "rollnet/kernels.hpp"

using namespace rollnet;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class F>
double time_best_of(int reps, F&& f) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        auto t0 = Clock::now();
        f();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

void fill_random(std::vector<float>& v, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& x : v) x = static_cast<float>(rng() >> 40) * 1e-7f - 0.8f;
}

} // namespace

int main() {
#ifdef _OPENMP
    std::cout << "threads: " << omp_get_max_threads() << "\n";
#else
    std::cout << "threads: 1 (built without OpenMP)\n";
#endif

    {
        // the mid-network workload: batch 8, 32 channels, 24x80
        Tensor4<float> in(8, 32, 24, 80), w(32, 32, 3, 3), b(32, 1, 1, 1);
        fill_random(in.data, 1);
        fill_random(w.data, 2);
        Tensor4<float> out_par, out_ref;
        double t_par = time_best_of(5, [&] { out_par = kern::conv2d_forward(in, w, b, 1, 1); });
        double t_ref =
            time_best_of(5, [&] { out_ref = kern::ref::conv2d_forward(in, w, b, 1, 1); });
        double max_diff = 0;
        for (std::size_t i = 0; i < out_par.size(); ++i)
            max_diff = std::max(max_diff,
                                static_cast<double>(std::abs(out_par.data[i] - out_ref.data[i])));
        std::cout << "conv2d 8x32x24x80 k3: parallel " << t_par * 1e3 << " ms, reference "
                  << t_ref * 1e3 << " ms, speedup " << t_ref / t_par << "x, max|diff| "
                  << max_diff << "\n";
    }

    {
        Waveform wave;
        wave.samples.resize(16000 * 4);
        std::mt19937_64 rng(3);
        for (auto& s : wave.samples) s = static_cast<float>(rng() >> 40) * 1e-7f - 0.8f;
        Spectrogram sp, sr;
        double t_par = time_best_of(3, [&] { sp = cqt(wave); });
        double t_ref = time_best_of(3, [&] { sr = ref::cqt(wave); });
        double max_diff = 0;
        for (std::size_t i = 0; i < sp.data.size(); ++i)
            max_diff = std::max(max_diff,
                                static_cast<double>(std::abs(sp.data[i] - sr.data[i])));
        std::cout << "cqt 4s/16kHz: parallel " << t_par * 1e3 << " ms, reference "
                  << t_ref * 1e3 << " ms, speedup " << t_ref / t_par << "x, max|diff| "
                  << max_diff << "\n";
    }
    return 0;
}
