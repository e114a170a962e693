#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "rollnet/dsp.hpp"
#include "rollnet/loss.hpp"
#include "rollnet/midi.hpp"
#include "rollnet/unet.hpp"

namespace rollnet {

struct TrainConfig {
    int epochs = 100;
    std::size_t batch_size = 8;
    double lr = 0.005;
    uint64_t seed = 7;
    std::size_t max_steps = 0; // 0 = bounded by epochs only
};

struct Checkpoint {
    ModelConfig config;
    ParamSet<float> params;
    uint64_t step = 0;
    std::string vocab_id;
};

// p <- p - lr * g for every learnable entry; running stats untouched.
// A NaN anywhere in the gradients aborts the step.
template <class T>
void sgd_step(ParamSet<T>& params, const ParamSet<T>& grads, double lr) {
    if (params.size() != grads.size()) throw ConfigError("sgd: parameter/gradient mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params.names[i] != grads.names[i])
            throw ConfigError("sgd: parameter order mismatch at " + params.names[i]);
        if (!ParamSet<T>::is_learnable(params.names[i])) continue;
        const auto& g = grads.tensors[i];
        for (T v : g.data)
            if (std::isnan(v))
                throw NumericError("sgd: NaN gradient in " + params.names[i]);
        auto& p = params.tensors[i];
        for (std::size_t k = 0; k < p.data.size(); ++k)
            p.data[k] -= static_cast<T>(lr) * g.data[k];
    }
}

// Checkpoint format "UNW1": magic, u32 tensor count, per tensor
// (u16 name length, name, u8 ndim, u32 dims, f32 LE payload),
// then a u32-length-prefixed key=value config block.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// one log line per step: step, weighted l_roll, l_p, l_i, total
Checkpoint train(const CorpusManifest& manifest, const ModelConfig& model_cfg,
                 const TrainConfig& train_cfg, std::ostream* loss_log = nullptr,
                 const std::string& checkpoint_path = "");

struct Prediction {
    Pianoroll roll;            // probabilities
    PitchRoll pitch;           // max marginal
    InstrumentRoll instrument; // max marginal
};

Prediction predict(const Waveform& wave, Checkpoint& ckpt);

// Explicit vocabulary-size check for commands that pair a checkpoint with
// a vocab file.
void check_vocab_compatible(const Checkpoint& ckpt, const InstrumentVocab& vocab);

// label file convention: the PRL sits next to the audio file
std::string label_path_for(const CorpusEntry& entry);

} // namespace rollnet
