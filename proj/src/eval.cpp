#include "rollnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "rollnet/wav.hpp"

namespace rollnet {

Counts frame_counts(const std::vector<float>& pred, const std::vector<float>& truth) {
    if (pred.size() != truth.size()) throw DataError("metrics: shape mismatch");
    Counts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        bool p = pred[i] != 0.0f, t = truth[i] != 0.0f;
        if (p && t)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (t)
            ++c.fn;
    }
    return c;
}

namespace {
double accuracy_from_counts(const Counts& c) {
    uint64_t denom = c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}
} // namespace

double frame_accuracy(const PitchRoll& pred, const PitchRoll& truth) {
    if (pred.F != truth.F || pred.T != truth.T) throw DataError("accuracy: shape mismatch");
    return accuracy_from_counts(frame_counts(pred.data, truth.data));
}

double frame_accuracy(const Pianoroll& pred, const Pianoroll& truth) {
    if (pred.F != truth.F || pred.T != truth.T || pred.M != truth.M)
        throw DataError("accuracy: shape mismatch");
    return accuracy_from_counts(frame_counts(pred.data, truth.data));
}

double f1_from_counts(const Counts& c) {
    if (c.tp == 0 && c.fp == 0 && c.fn == 0) return 1.0; // both sides empty
    double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

std::vector<double> instrument_f1(const InstrumentRoll& pred, const InstrumentRoll& truth,
                                  double* mean) {
    if (pred.M != truth.M || pred.T != truth.T) throw DataError("f1: shape mismatch");
    std::vector<double> out(pred.M);
    double sum = 0;
    std::size_t active = 0;
    for (std::size_t m = 0; m < pred.M; ++m) {
        Counts c;
        bool any_truth = false;
        for (std::size_t t = 0; t < pred.T; ++t) {
            bool p = pred.at(m, t) != 0.0f, g = truth.at(m, t) != 0.0f;
            any_truth |= g;
            if (p && g)
                ++c.tp;
            else if (p)
                ++c.fp;
            else if (g)
                ++c.fn;
        }
        out[m] = f1_from_counts(c);
        if (any_truth) {
            sum += out[m];
            ++active;
        }
    }
    if (mean) *mean = active == 0 ? 0.0 : sum / static_cast<double>(active);
    return out;
}

std::vector<std::vector<double>> per_second_scores(const InstrumentRoll& probs,
                                                   double frame_rate) {
    if (!(frame_rate > 0)) throw ConfigError("per_second: frame_rate must be > 0");
    auto seconds = static_cast<std::size_t>(
        std::ceil(static_cast<double>(probs.T) / frame_rate));
    std::vector<std::vector<double>> out(probs.M, std::vector<double>(seconds, 0.0));
    for (std::size_t m = 0; m < probs.M; ++m)
        for (std::size_t s = 0; s < seconds; ++s) {
            auto t0 = static_cast<std::size_t>(std::floor(static_cast<double>(s) * frame_rate));
            auto t1 = static_cast<std::size_t>(
                std::floor(static_cast<double>(s + 1) * frame_rate));
            t1 = std::min<std::size_t>(t1, probs.T);
            double mx = 0;
            for (std::size_t t = t0; t < t1; ++t)
                mx = std::max(mx, static_cast<double>(probs.at(m, t)));
            out[m][s] = mx;
        }
    return out;
}

std::vector<std::vector<uint8_t>> per_second_labels(const InstrumentRoll& labels,
                                                    double frame_rate) {
    auto scores = per_second_scores(labels, frame_rate);
    std::vector<std::vector<uint8_t>> out(scores.size());
    for (std::size_t m = 0; m < scores.size(); ++m) {
        out[m].resize(scores[m].size());
        for (std::size_t s = 0; s < scores[m].size(); ++s)
            out[m][s] = scores[m][s] > 0 ? 1 : 0;
    }
    return out;
}

std::optional<double> auc(const std::vector<double>& scores,
                          const std::vector<uint8_t>& labels) {
    if (scores.size() != labels.size()) throw DataError("auc: size mismatch");
    // rank-sum form: O(n log n), ties share average ranks
    std::size_t n = scores.size();
    std::size_t pos = 0;
    for (auto l : labels) pos += l ? 1 : 0;
    std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum_pos += avg_rank;
        i = j;
    }
    double u = rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

EvalReport evaluate(Checkpoint* ckpt, const CorpusManifest& manifest, const std::string& split,
                    const InstrumentVocab& vocab, float threshold,
                    bool use_labels_as_predictions) {
    auto entries = manifest.split(split);
    if (entries.empty()) throw DataError("evaluate: empty split '" + split + "'");
    if (!use_labels_as_predictions) {
        if (!ckpt) throw ConfigError("evaluate: checkpoint required");
        check_vocab_compatible(*ckpt, vocab);
    }

    EvalReport report;
    report.threshold = threshold;
    report.instruments.resize(vocab.size());
    for (std::size_t m = 0; m < vocab.size(); ++m)
        report.instruments[m].name = vocab.entries[m].name;

    std::vector<std::vector<double>> pooled_scores(vocab.size());
    std::vector<std::vector<uint8_t>> pooled_labels(vocab.size());

    for (const auto& entry : entries) {
        Pianoroll truth, pred_roll;
        try {
            AnyRoll labels = read_prl(label_path_for(entry));
            auto* roll = std::get_if<Pianoroll>(&labels);
            if (!roll) throw DataError("evaluate: label file is not a pianoroll");
            truth = std::move(*roll);
            if (use_labels_as_predictions) {
                pred_roll = truth;
            } else {
                Waveform wave = read_wav(entry.audio_path);
                Prediction p = predict(wave, *ckpt);
                pred_roll = std::move(p.roll);
            }
        } catch (const Error& e) {
            std::cerr << "warning: skipping clip " << entry.clip_id << ": " << e.what() << "\n";
            ++report.skipped_clips;
            continue;
        }
        // predictions may run one frame long at clip edges; compare the overlap
        std::size_t T = std::min(truth.T, pred_roll.T);

        InstrumentRoll truth_inst = marginalize_instrument(truth);
        InstrumentRoll pred_inst_probs = marginalize_instrument(pred_roll);
        PitchRoll truth_pitch = marginalize_pitch(truth);
        PitchRoll pred_pitch_probs = marginalize_pitch(pred_roll);

        Pianoroll pred_bin = binarize(pred_roll, threshold);
        PitchRoll pred_pitch_bin = binarize(pred_pitch_probs, threshold);
        InstrumentRoll pred_inst_bin = binarize(pred_inst_probs, threshold);

        for (std::size_t m = 0; m < vocab.size(); ++m) {
            auto& pi = report.instruments[m];
            for (std::size_t t = 0; t < T; ++t) {
                bool p = pred_inst_bin.at(m, t) != 0.0f, g = truth_inst.at(m, t) != 0.0f;
                pi.in_truth |= g;
                if (p && g)
                    ++pi.counts.tp;
                else if (p)
                    ++pi.counts.fp;
                else if (g)
                    ++pi.counts.fn;
            }
        }
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t f = 0; f < truth.F; ++f) {
                bool p = pred_pitch_bin.at(f, t) != 0.0f, g = truth_pitch.at(f, t) != 0.0f;
                if (p && g)
                    ++report.pitch_counts.tp;
                else if (p)
                    ++report.pitch_counts.fp;
                else if (g)
                    ++report.pitch_counts.fn;
            }
            for (std::size_t m = 0; m < truth.M; ++m)
                for (std::size_t f = 0; f < truth.F; ++f) {
                    bool p = pred_bin.at(f, t, m) != 0.0f, g = truth.at(f, t, m) != 0.0f;
                    if (p && g)
                        ++report.roll_counts.tp;
                    else if (p)
                        ++report.roll_counts.fp;
                    else if (g)
                        ++report.roll_counts.fn;
                }
        }

        double fr = truth.frame_rate;
        auto sec_scores = per_second_scores(pred_inst_probs, fr);
        auto sec_labels = per_second_labels(truth_inst, fr);
        for (std::size_t m = 0; m < vocab.size(); ++m) {
            std::size_t S = std::min(sec_scores[m].size(), sec_labels[m].size());
            pooled_scores[m].insert(pooled_scores[m].end(), sec_scores[m].begin(),
                                    sec_scores[m].begin() + static_cast<int64_t>(S));
            pooled_labels[m].insert(pooled_labels[m].end(), sec_labels[m].begin(),
                                    sec_labels[m].begin() + static_cast<int64_t>(S));
        }
        ++report.clip_count;
    }
    if (report.clip_count == 0) throw DataError("evaluate: no usable clips in split");

    report.pitch_acc = accuracy_from_counts(report.pitch_counts);
    report.roll_acc = accuracy_from_counts(report.roll_counts);

    double f1_sum = 0;
    std::size_t active = 0;
    Counts pooled_f1_counts;
    double auc_sum = 0;
    std::size_t auc_n = 0;
    for (std::size_t m = 0; m < vocab.size(); ++m) {
        auto& pi = report.instruments[m];
        pi.f1 = f1_from_counts(pi.counts);
        pi.auc = auc(pooled_scores[m], pooled_labels[m]);
        if (pi.in_truth) {
            f1_sum += pi.f1;
            ++active;
            pooled_f1_counts += pi.counts;
        }
        if (pi.auc) {
            auc_sum += *pi.auc;
            ++auc_n;
        }
    }
    report.mean_f1 = active == 0 ? 0.0 : f1_sum / static_cast<double>(active);
    report.micro_f1 = f1_from_counts(pooled_f1_counts);
    if (auc_n > 0) report.mean_auc = auc_sum / static_cast<double>(auc_n);
    return report;
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "instrument            F1      AUC\n";
    for (const auto& pi : instruments) {
        os << std::left << std::setw(18) << pi.name << std::right << std::setw(8) << pi.f1;
        if (pi.auc)
            os << std::setw(9) << *pi.auc;
        else
            os << "      n/a";
        if (!pi.in_truth) os << "   (absent from truth)";
        os << "\n";
    }
    os << "\n";
    os << "instrument F1 (macro): " << mean_f1 << "\n";
    os << "instrument F1 (micro): " << micro_f1 << "\n";
    if (mean_auc) os << "instrument AUC (mean): " << *mean_auc << "\n";
    os << "pitch Acc:             " << pitch_acc << "\n";
    os << "pianoroll Acc:         " << roll_acc << "\n";
    os << "clips: " << clip_count << "  skipped: " << skipped_clips
       << "  threshold: " << threshold << "\n";
    return os.str();
}

std::string EvalReport::to_records() const {
    std::ostringstream os;
    os << std::setprecision(12);
    for (const auto& pi : instruments) {
        os << "f1\t" << pi.name << "\t" << pi.f1 << "\n";
        if (pi.auc) os << "auc\t" << pi.name << "\t" << *pi.auc << "\n";
    }
    os << "f1_macro\t-\t" << mean_f1 << "\n";
    os << "f1_micro\t-\t" << micro_f1 << "\n";
    if (mean_auc) os << "auc_mean\t-\t" << *mean_auc << "\n";
    os << "pitch_acc\t-\t" << pitch_acc << "\n";
    os << "pianoroll_acc\t-\t" << roll_acc << "\n";
    return os.str();
}

} // namespace rollnet
