#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "rollnet/align.hpp"
#include "rollnet/config.hpp"
#include "rollnet/dsp.hpp"
#include "rollnet/eval.hpp"
#include "rollnet/midi.hpp"
#include "rollnet/model.hpp"
#include "rollnet/png.hpp"
#include "rollnet/rolls.hpp"
#include "rollnet/synth.hpp"
#include "rollnet/wav.hpp"

namespace fs = std::filesystem;
using namespace rollnet;

namespace {

void apply_thread_count(int threads) {
    if (const char* env = std::getenv("ROLLNET_THREADS")) threads = std::atoi(env);
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

InstrumentVocab load_vocab(const std::string& path) {
    return path.empty() ? InstrumentVocab::default_vocab() : InstrumentVocab::load(path);
}

ModelConfig model_config_from(const RunConfig& cfg, std::size_t instruments) {
    ModelConfig mc;
    mc.instruments = instruments;
    std::string widths = cfg.get("model.widths", "16,32,64,128");
    mc.widths.clear();
    std::istringstream ws(widths);
    std::string tok;
    while (std::getline(ws, tok, ',')) mc.widths.push_back(std::stoul(tok));
    mc.leaky_slope = cfg.get_double("model.leaky_slope", 0.2);
    mc.bn_eps = cfg.get_double("model.bn_eps", 1e-5);
    mc.bn_momentum = cfg.get_double("model.bn_momentum", 0.1);
    mc.init_seed = static_cast<uint64_t>(cfg.get_int("model.init_seed", 1));
    return mc;
}

int cmd_corpus(const RunConfig& cfg) {
    uint64_t seed = static_cast<uint64_t>(cfg.get_int("seed", 7));
    std::string out_dir = cfg.get("out", "corpus");
    CorpusConfig cc;
    cc.n_clips = static_cast<int>(cfg.get_int("clips", 8));
    cc.clip_seconds = cfg.get_double("clip_seconds", 20.0);
    cc.vocab = load_vocab(cfg.get("vocab", ""));
    cc.min_polyphony = static_cast<int>(cfg.get_int("min_polyphony", 1));
    cc.max_polyphony = static_cast<int>(cfg.get_int("max_polyphony", 4));
    cc.min_tempo_bpm = static_cast<int>(cfg.get_int("min_tempo", 70));
    cc.max_tempo_bpm = static_cast<int>(cfg.get_int("max_tempo", 140));
    cc.train_fraction = cfg.get_double("split_fraction", 0.75);

    CorpusManifest manifest = generate_corpus(seed, cc, out_dir);
    auto profiles = default_profiles(cc.vocab);
    for (const auto& entry : manifest.entries) {
        auto events = parse_midi_file(entry.midi_path);
        Waveform wave = render(events, profiles, cc.vocab);
        write_wav(entry.audio_path, wave);
        Pianoroll labels =
            events_to_pianoroll(events, kDefaultFrameRate, wave.duration_s(), cc.vocab);
        write_prl(AnyRoll(labels), label_path_for(entry));
    }
    manifest.save(out_dir + "/manifest.tsv");
    cc.vocab.save(out_dir + "/vocab.txt");
    cfg.save(out_dir + "/run_config.txt");
    std::cout << "wrote " << manifest.entries.size() << " clips to " << out_dir << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    std::string manifest_path = cfg.get("manifest", "");
    if (manifest_path.empty()) throw ConfigError("train: manifest required");
    std::string out_dir = cfg.get("out", "run");
    fs::create_directories(out_dir);

    CorpusManifest manifest = CorpusManifest::load(manifest_path);
    InstrumentVocab vocab = load_vocab(cfg.get("vocab", ""));
    ModelConfig mc = model_config_from(cfg, vocab.size());

    TrainConfig tc;
    tc.epochs = static_cast<int>(cfg.get_int("epochs", 100));
    tc.batch_size = static_cast<std::size_t>(cfg.get_int("batch", 8));
    tc.lr = cfg.get_double("lr", 0.005);
    tc.seed = static_cast<uint64_t>(cfg.get_int("seed", 7));
    tc.max_steps = static_cast<std::size_t>(cfg.get_int("steps", 0));

    std::ofstream loss_log(out_dir + "/loss_log.tsv");
    cfg.save(out_dir + "/run_config.txt");
    Checkpoint ckpt = train(manifest, mc, tc, &loss_log, out_dir + "/checkpoint.unw");
    std::cout << "trained " << ckpt.step << " steps; checkpoint at " << out_dir
              << "/checkpoint.unw\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    std::string manifest_path = cfg.get("manifest", "");
    if (manifest_path.empty()) throw ConfigError("eval: manifest required");
    CorpusManifest manifest = CorpusManifest::load(manifest_path);
    InstrumentVocab vocab = load_vocab(cfg.get("vocab", ""));
    std::string split = cfg.get("split", "test");
    auto threshold = static_cast<float>(cfg.get_double("threshold", 0.5));
    bool oracle = cfg.get("oracle", "0") == "1";

    Checkpoint ckpt;
    if (!oracle) {
        std::string ckpt_path = cfg.get("checkpoint", "");
        if (ckpt_path.empty()) throw ConfigError("eval: checkpoint required (or oracle=1)");
        ckpt = load_checkpoint(ckpt_path);
    }
    EvalReport report =
        evaluate(oracle ? nullptr : &ckpt, manifest, split, vocab, threshold, oracle);
    std::cout << report.to_table();
    std::string out = cfg.get("out", "");
    if (!out.empty()) {
        std::ofstream f(out);
        f << report.to_records();
    }
    return 0;
}

int cmd_predict(const RunConfig& cfg) {
    std::string ckpt_path = cfg.get("checkpoint", "");
    std::string wav_path = cfg.get("wav", "");
    if (ckpt_path.empty() || wav_path.empty())
        throw ConfigError("predict: checkpoint and wav required");
    std::string out_dir = cfg.get("out", "predict");
    fs::create_directories(out_dir);

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Waveform wave = read_wav(wav_path);
    Prediction pred = predict(wave, ckpt);

    write_prl(AnyRoll(pred.roll), out_dir + "/roll.prl");
    write_prl(AnyRoll(pred.pitch), out_dir + "/pitch.prl");
    write_prl(AnyRoll(pred.instrument), out_dir + "/instrument.prl");

    if (cfg.get("png", "0") == "1") {
        auto threshold = static_cast<float>(cfg.get_double("threshold", 0.5));
        InstrumentVocab vocab = load_vocab(cfg.get("vocab", ""));
        Pianoroll bin = binarize(pred.roll, threshold);
        render_png(bin, out_dir + "/roll.png", &vocab);
    }
    cfg.save(out_dir + "/run_config.txt");
    std::cout << "wrote predictions to " << out_dir << "\n";
    return 0;
}

int cmd_align(const RunConfig& cfg) {
    std::string wav_path = cfg.get("wav", "");
    std::string midi_path = cfg.get("midi", "");
    if (wav_path.empty() || midi_path.empty()) throw ConfigError("align: wav and midi required");
    std::string out_dir = cfg.get("out", "align");
    fs::create_directories(out_dir);

    InstrumentVocab vocab = load_vocab(cfg.get("vocab", ""));
    Waveform audio = read_wav(wav_path);
    auto events = parse_midi_file(midi_path);

    // drop events outside the vocabulary so the reference rendering is defined
    std::vector<NoteEvent> mapped;
    for (const auto& e : events)
        if (map_program(e.program, e.channel, vocab) >= 0) mapped.push_back(e);
    if (mapped.empty()) throw DataError("align: no events map to the vocabulary");

    Waveform midi_audio = render(mapped, default_profiles(vocab), vocab);
    Spectrogram sa = cqt(audio);
    Spectrogram sm = cqt(midi_audio);
    CostMatrix cost = cost_matrix(sa, sm);
    AlignmentPath path = dtw(cost);

    auto warped = warp_events(mapped, path, sa.frame_rate());
    write_midi_file(out_dir + "/aligned.mid", warped, 120);

    std::ofstream dump(out_dir + "/path.tsv");
    for (auto [a, m] : path.pairs) dump << a << "\t" << m << "\n";
    std::cout << "normalized cost: " << path.normalized_cost << "\n";
    cfg.save(out_dir + "/run_config.txt");
    return 0;
}

int cmd_render(const RunConfig& cfg) {
    std::string prl = cfg.get("prl", "");
    std::string out = cfg.get("out", "");
    if (prl.empty() || out.empty()) throw ConfigError("render: prl and out required");
    AnyRoll roll = read_prl(prl);
    auto* p = std::get_if<Pianoroll>(&roll);
    if (!p) throw DataError("render: only pianoroll PRL files can be rendered");
    auto threshold = static_cast<float>(cfg.get_double("threshold", 0.5));
    Pianoroll bin = p->is_binary() ? *p : binarize(*p, threshold);
    InstrumentVocab vocab = load_vocab(cfg.get("vocab", ""));
    render_png(bin, out, &vocab);
    std::cout << "wrote " << out << "\n";
    return 0;
}

// merge precedence: flags > config file
RunConfig merge_config(const std::string& config_path,
                       const std::vector<std::pair<std::string, std::string>>& flags) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    for (const auto& [k, v] : flags) cfg.set(k, v);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rollnet: multitask frame-level pitch and instrument recognition"};
    app.require_subcommand(1);

    struct Sub {
        CLI::App* cmd;
        std::string config_path;
        std::vector<std::pair<std::string, std::string>> flags;
        int (*run)(const RunConfig&);
    };
    // deque: option callbacks hold references to their Sub, which must
    // survive later push_backs
    std::deque<Sub> subs;

    auto add_sub = [&](const char* name, const char* desc, int (*run)(const RunConfig&),
                       std::initializer_list<std::pair<const char*, const char*>> opts) {
        subs.push_back({app.add_subcommand(name, desc), "", {}, run});
        Sub& s = subs.back();
        s.cmd->add_option("--config", s.config_path, "flat key=value config file");
        for (auto [opt, help] : opts) {
            std::string key = opt;
            s.cmd->add_option_function<std::string>(
                "--" + key, [&s, key](const std::string& v) { s.flags.emplace_back(key, v); },
                help);
        }
        s.cmd->add_option_function<int>(
            "--threads",
            [&s](int v) { s.flags.emplace_back("threads", std::to_string(v)); },
            "worker count (ROLLNET_THREADS overrides)");
    };

    add_sub("corpus", "generate a synthetic MIDI+audio corpus", cmd_corpus,
            {{"seed", "generator seed"},
             {"out", "output directory"},
             {"clips", "number of clips"},
             {"clip_seconds", "seconds per clip"},
             {"vocab", "vocabulary file"},
             {"min_polyphony", "min instruments per clip"},
             {"max_polyphony", "max instruments per clip"},
             {"min_tempo", "min tempo (BPM)"},
             {"max_tempo", "max tempo (BPM)"},
             {"split_fraction", "train split fraction"}});
    add_sub("train", "train the residual U-net", cmd_train,
            {{"manifest", "corpus manifest"},
             {"out", "output directory"},
             {"vocab", "vocabulary file"},
             {"epochs", "epoch count"},
             {"batch", "batch size"},
             {"lr", "learning rate"},
             {"seed", "shuffle seed"},
             {"steps", "stop after this many SGD steps"},
             {"model.widths", "encoder channel widths, comma separated"},
             {"model.init_seed", "weight init seed"}});
    add_sub("eval", "evaluate a checkpoint on a manifest split", cmd_eval,
            {{"checkpoint", "checkpoint file"},
             {"manifest", "corpus manifest"},
             {"split", "train or test"},
             {"vocab", "vocabulary file"},
             {"threshold", "binarization threshold"},
             {"oracle", "1 = score ground truth against itself"},
             {"out", "write machine-readable records here"}});
    add_sub("predict", "predict rolls for a WAV file", cmd_predict,
            {{"checkpoint", "checkpoint file"},
             {"wav", "input audio (PCM16 mono 16 kHz)"},
             {"out", "output directory"},
             {"png", "1 = also render a PNG"},
             {"threshold", "binarization threshold for the PNG"},
             {"vocab", "vocabulary file"}});
    add_sub("align", "DTW-align a WAV against its MIDI", cmd_align,
            {{"wav", "recorded audio"},
             {"midi", "MIDI file to retime"},
             {"out", "output directory"},
             {"vocab", "vocabulary file"}});
    add_sub("render", "render a pianoroll PRL to PNG", cmd_render,
            {{"prl", "input PRL file"},
             {"out", "output PNG path"},
             {"threshold", "binarization threshold for probability rolls"},
             {"vocab", "vocabulary file for the legend"}});

    CLI11_PARSE(app, argc, argv);

    for (const auto& s : subs) {
        if (!s.cmd->parsed()) continue;
        try {
            RunConfig cfg = merge_config(s.config_path, s.flags);
            apply_thread_count(static_cast<int>(cfg.get_int("threads", 0)));
            return s.run(cfg);
        } catch (const ConfigError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        } catch (const ParseError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 3;
        } catch (const DataError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 3;
        } catch (const NumericError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 4;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}
