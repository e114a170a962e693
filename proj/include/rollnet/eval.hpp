#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rollnet/model.hpp"
#include "rollnet/rolls.hpp"

namespace rollnet {

struct Counts {
    uint64_t tp = 0, fp = 0, fn = 0;
    void operator+=(const Counts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
    }
};

struct EvalReport {
    struct PerInstrument {
        std::string name;
        Counts counts;
        bool in_truth = false;
        double f1 = 0;
        std::optional<double> auc; // undefined on single-class input
    };

    std::vector<PerInstrument> instruments;
    Counts pitch_counts, roll_counts;
    double pitch_acc = 0;
    double roll_acc = 0;
    double mean_f1 = 0;       // macro, over instruments present in truth
    double micro_f1 = 0;      // pooled counts over the same instruments
    std::optional<double> mean_auc;
    std::size_t clip_count = 0;
    std::size_t skipped_clips = 0;
    float threshold = 0.5f;

    std::string to_table() const;
    std::string to_records() const; // metric \t instrument \t value
};

// Pooled multipitch accuracy TP/(TP+FP+FN); 1.0 when both sides are empty.
Counts frame_counts(const std::vector<float>& pred, const std::vector<float>& truth);
double frame_accuracy(const PitchRoll& pred, const PitchRoll& truth);
double frame_accuracy(const Pianoroll& pred, const Pianoroll& truth);

double f1_from_counts(const Counts& c);
// Per-instrument frame-level F1 plus the macro mean over instruments
// present in the truth.
std::vector<double> instrument_f1(const InstrumentRoll& pred, const InstrumentRoll& truth,
                                  double* mean = nullptr);

// Second s covers frames [floor(s*fr), floor((s+1)*fr)); score = max frame
// probability, label = any frame active. Trailing partial second included.
std::vector<std::vector<double>> per_second_scores(const InstrumentRoll& probs,
                                                   double frame_rate);
std::vector<std::vector<uint8_t>> per_second_labels(const InstrumentRoll& labels,
                                                    double frame_rate);

// Mann-Whitney AUC with ties counted 0.5. Empty optional when the labels
// are single-class.
std::optional<double> auc(const std::vector<double>& scores,
                          const std::vector<uint8_t>& labels);

// Run predict over a manifest split, pool counts across clips, then compute
// rates. With use_labels_as_predictions the ground truth is scored against
// itself (pipeline oracle mode; no checkpoint needed).
EvalReport evaluate(Checkpoint* ckpt, const CorpusManifest& manifest, const std::string& split,
                    const InstrumentVocab& vocab, float threshold = 0.5f,
                    bool use_labels_as_predictions = false);

} // namespace rollnet
