#include "rollnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "rollnet/wav.hpp"

namespace rollnet {

namespace {

void put_u8(std::ostream& out, uint8_t v) { out.put(static_cast<char>(v)); }
void put_u16(std::ostream& out, uint16_t v) {
    put_u8(out, v & 0xff);
    put_u8(out, v >> 8);
}
void put_u32(std::ostream& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) put_u8(out, (v >> (8 * i)) & 0xff);
}
void put_f32(std::ostream& out, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(out, u);
}
uint8_t get_u8(std::istream& in) {
    int c = in.get();
    if (c == EOF) throw ParseError("checkpoint: truncated file");
    return static_cast<uint8_t>(c);
}
uint16_t get_u16(std::istream& in) {
    uint16_t lo = get_u8(in), hi = get_u8(in);
    return static_cast<uint16_t>(lo | (hi << 8));
}
uint32_t get_u32(std::istream& in) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(get_u8(in)) << (8 * i);
    return v;
}
float get_f32(std::istream& in) {
    uint32_t u = get_u32(in);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

std::string config_block(const Checkpoint& ckpt) {
    std::ostringstream os;
    os << "widths=";
    for (std::size_t i = 0; i < ckpt.config.widths.size(); ++i)
        os << (i ? "," : "") << ckpt.config.widths[i];
    os << "\n";
    os << "instruments=" << ckpt.config.instruments << "\n";
    os << "in_rows=" << ckpt.config.in_rows << "\n";
    os << "frames=" << ckpt.config.frames << "\n";
    os << "leaky_slope=" << ckpt.config.leaky_slope << "\n";
    os << "bn_eps=" << ckpt.config.bn_eps << "\n";
    os << "bn_momentum=" << ckpt.config.bn_momentum << "\n";
    os << "init_seed=" << ckpt.config.init_seed << "\n";
    os << "step=" << ckpt.step << "\n";
    os << "vocab_id=" << ckpt.vocab_id << "\n";
    return os.str();
}

void parse_config_block(const std::string& text, Checkpoint& ckpt) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "widths") {
            ckpt.config.widths.clear();
            std::istringstream vs(val);
            std::string tok;
            while (std::getline(vs, tok, ','))
                ckpt.config.widths.push_back(std::stoul(tok));
        } else if (key == "instruments") {
            ckpt.config.instruments = std::stoul(val);
        } else if (key == "in_rows") {
            ckpt.config.in_rows = std::stoul(val);
        } else if (key == "frames") {
            ckpt.config.frames = std::stoul(val);
        } else if (key == "leaky_slope") {
            ckpt.config.leaky_slope = std::stod(val);
        } else if (key == "bn_eps") {
            ckpt.config.bn_eps = std::stod(val);
        } else if (key == "bn_momentum") {
            ckpt.config.bn_momentum = std::stod(val);
        } else if (key == "init_seed") {
            ckpt.config.init_seed = std::stoull(val);
        } else if (key == "step") {
            ckpt.step = std::stoull(val);
        } else if (key == "vocab_id") {
            ckpt.vocab_id = val;
        }
    }
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot write " + path);
    out.write("UNW1", 4);
    put_u32(out, static_cast<uint32_t>(ckpt.params.size()));
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        const std::string& name = ckpt.params.names[i];
        const auto& t = ckpt.params.tensors[i];
        put_u16(out, static_cast<uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u8(out, 4);
        for (auto d : t.shape) put_u32(out, static_cast<uint32_t>(d));
        for (float v : t.data) put_f32(out, v);
    }
    std::string cfg = config_block(ckpt);
    put_u32(out, static_cast<uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    if (!out) throw DataError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "UNW1", 4) != 0)
        throw ParseError("checkpoint: bad magic");

    Checkpoint ckpt;
    uint32_t count = get_u32(in);
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t nlen = get_u16(in);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        if (in.gcount() != nlen) throw ParseError("checkpoint: truncated name");
        uint8_t ndim = get_u8(in);
        if (ndim != 4) throw ParseError("checkpoint: unsupported tensor rank");
        std::size_t dims[4];
        std::size_t total = 1;
        for (auto& d : dims) {
            d = get_u32(in);
            total *= d;
        }
        Tensor4<float> t(dims[0], dims[1], dims[2], dims[3]);
        for (std::size_t k = 0; k < total; ++k) t.data[k] = get_f32(in);
        ckpt.params.add(name, std::move(t));
    }
    uint32_t clen = get_u32(in);
    std::string cfg(clen, '\0');
    in.read(cfg.data(), clen);
    if (in.gcount() != clen) throw ParseError("checkpoint: truncated config block");
    parse_config_block(cfg, ckpt);
    ckpt.config.validate();

    // the parameter list must match what the config would construct
    UNet<float> probe = UNet<float>::init(ckpt.config);
    if (probe.params.names != ckpt.params.names)
        throw ParseError("checkpoint: parameter list does not match config");
    for (std::size_t i = 0; i < probe.params.size(); ++i)
        if (probe.params.tensors[i].shape != ckpt.params.tensors[i].shape)
            throw ParseError("checkpoint: shape mismatch for " + ckpt.params.names[i]);
    return ckpt;
}

void check_vocab_compatible(const Checkpoint& ckpt, const InstrumentVocab& vocab) {
    if (ckpt.config.instruments != vocab.size())
        throw ConfigError("checkpoint trained with M=" + std::to_string(ckpt.config.instruments) +
                          " but vocabulary '" + vocab.id + "' has M=" +
                          std::to_string(vocab.size()));
}

std::string label_path_for(const CorpusEntry& entry) {
    std::string p = entry.audio_path;
    auto dot = p.rfind('.');
    if (dot != std::string::npos) p.resize(dot);
    return p + ".prl";
}

namespace {

// (N,1,F,T) batch from segment spectrograms and (N,M,F,T) labels
void fill_batch(const std::vector<Segment>& segments, const std::vector<std::size_t>& ids,
                Tensor4<float>& x, Tensor4<float>& y, std::vector<std::size_t>& valid) {
    std::size_t F = segments[ids[0]].spec.F;
    std::size_t Tw = kSegmentFrames;
    std::size_t M = segments[ids[0]].labels.M;
    x = Tensor4<float>(ids.size(), 1, F, Tw);
    y = Tensor4<float>(ids.size(), M, F, Tw);
    valid.resize(ids.size());
    for (std::size_t n = 0; n < ids.size(); ++n) {
        const Segment& s = segments[ids[n]];
        valid[n] = s.valid_frames;
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t t = 0; t < Tw; ++t)
                x.at(n, 0, f, t) = s.spec.at(f, t);
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t f = 0; f < F; ++f)
                for (std::size_t t = 0; t < Tw; ++t)
                    y.at(n, m, f, t) = s.labels.at(f, t, m);
    }
}

} // namespace

Checkpoint train(const CorpusManifest& manifest, const ModelConfig& model_cfg,
                 const TrainConfig& train_cfg, std::ostream* loss_log,
                 const std::string& checkpoint_path) {
    model_cfg.validate();
    auto train_entries = manifest.split("train");
    if (train_entries.empty()) throw DataError("train: empty train split");

    std::vector<Segment> segments;
    std::size_t skipped = 0;
    for (const auto& entry : train_entries) {
        try {
            Waveform wave = read_wav(entry.audio_path);
            Spectrogram spec = cqt(wave);
            AnyRoll labels = read_prl(label_path_for(entry));
            auto* roll = std::get_if<Pianoroll>(&labels);
            if (!roll) throw DataError("train: label file is not a pianoroll");
            if (roll->M != model_cfg.instruments)
                throw ConfigError("train: label M=" + std::to_string(roll->M) +
                                  " does not match model M=" +
                                  std::to_string(model_cfg.instruments));
            auto segs = segment(spec, *roll);
            for (auto& s : segs) segments.push_back(std::move(s));
        } catch (const Error& e) {
            std::cerr << "warning: skipping clip " << entry.clip_id << ": " << e.what() << "\n";
            ++skipped;
        }
    }
    if (segments.empty()) throw DataError("train: no usable training segments");

    ModelConfig cfg = model_cfg;
    UNet<float> net = UNet<float>::init(cfg);

    uint64_t step = 0;
    Checkpoint ckpt;
    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        // deterministic per-epoch shuffle, independent of thread count
        std::vector<std::size_t> order(segments.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::mt19937_64 rng(train_cfg.seed * 0x9e3779b97f4a7c15ull + static_cast<uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng() % i]);

        for (std::size_t pos = 0; pos < order.size(); pos += train_cfg.batch_size) {
            std::size_t end = std::min(order.size(), pos + train_cfg.batch_size);
            std::vector<std::size_t> ids(order.begin() + static_cast<int64_t>(pos),
                                         order.begin() + static_cast<int64_t>(end));
            Tensor4<float> x, y;
            std::vector<std::size_t> valid;
            fill_batch(segments, ids, x, y, valid);

            Tensor4<float> logits = net.forward(x, true);
            Tensor4<float> dlogits;
            LossBreakdown loss = multitask_loss(logits, y, valid, &dlogits);
            ParamSet<float> grads = net.backward(dlogits);
            sgd_step(net.params, grads, train_cfg.lr);
            ++step;

            if (loss_log)
                *loss_log << step << "\t" << loss.w_roll * loss.l_roll << "\t"
                          << loss.w_p * loss.l_p << "\t" << loss.w_i * loss.l_i << "\t"
                          << loss.total() << std::endl;
            if (train_cfg.max_steps && step >= train_cfg.max_steps) break;
        }

        ckpt = Checkpoint{cfg, net.params, step, manifest.vocab_id};
        if (!checkpoint_path.empty()) save_checkpoint(ckpt, checkpoint_path);
        if (train_cfg.max_steps && step >= train_cfg.max_steps) break;
    }
    ckpt = Checkpoint{cfg, net.params, step, manifest.vocab_id};
    if (!checkpoint_path.empty()) save_checkpoint(ckpt, checkpoint_path);
    (void)skipped;
    return ckpt;
}

Prediction predict(const Waveform& wave, Checkpoint& ckpt) {
    Spectrogram spec = cqt(wave);

    Pianoroll dummy(ckpt.config.in_rows, spec.T, ckpt.config.instruments);
    dummy.vocab_id = ckpt.vocab_id;
    auto segs = segment(spec, dummy);

    UNet<float> net;
    net.cfg = ckpt.config;
    net.params = ckpt.params;

    Pianoroll roll(ckpt.config.in_rows, spec.T, ckpt.config.instruments);
    roll.frame_rate = spec.frame_rate();
    roll.vocab_id = ckpt.vocab_id;

    for (const auto& seg : segs) {
        Tensor4<float> x(1, 1, seg.spec.F, kSegmentFrames);
        for (std::size_t f = 0; f < seg.spec.F; ++f)
            for (std::size_t t = 0; t < kSegmentFrames; ++t)
                x.at(0, 0, f, t) = seg.spec.at(f, t);
        Tensor4<float> logits = net.forward(x, false);
        for (std::size_t m = 0; m < roll.M; ++m)
            for (std::size_t f = 0; f < roll.F; ++f)
                for (std::size_t t = 0; t < seg.valid_frames; ++t)
                    roll.at(f, seg.start_frame + t, m) = kern::sigmoid(logits.at(0, m, f, t));
    }

    Prediction pred;
    pred.pitch = marginalize_pitch(roll);
    pred.instrument = marginalize_instrument(roll);
    pred.roll = std::move(roll);

    // marginal-consistency contract: outputs are exact max marginals
    for (std::size_t t = 0; t < pred.roll.T; ++t) {
        for (std::size_t f = 0; f < pred.roll.F; ++f) {
            float mx = 0;
            for (std::size_t m = 0; m < pred.roll.M; ++m)
                mx = std::max(mx, pred.roll.at(f, t, m));
            if (pred.pitch.at(f, t) != mx)
                throw NumericError("predict: pitch marginal consistency violated");
        }
        for (std::size_t m = 0; m < pred.roll.M; ++m) {
            float mx = 0;
            for (std::size_t f = 0; f < pred.roll.F; ++f)
                mx = std::max(mx, pred.roll.at(f, t, m));
            if (pred.instrument.at(m, t) != mx)
                throw NumericError("predict: instrument marginal consistency violated");
        }
    }
    return pred;
}

} // namespace rollnet
