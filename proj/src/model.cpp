#include "kseg/model.hpp"

#include <cstring>
#include <sstream>
#include <stdexcept>

namespace kseg {

namespace {

int64_t round_up(int64_t v, int64_t m) { return ((v + m - 1) / m) * m; }

}  // namespace

void ArchitectureConfig::validate() const {
    if (block_layers.size() != 4)
        throw std::runtime_error("arch: exactly 4 encoder blocks are required");
    for (int64_t l : block_layers)
        if (l < 1) throw std::runtime_error("arch: block layer counts must be >= 1");
    if (growth_rate < 1 || stem_channels < 1 || norm_groups < 1)
        throw std::runtime_error("arch: channel parameters must be >= 1");
    if (stem_channels % norm_groups != 0 || growth_rate % norm_groups != 0)
        throw std::runtime_error("arch: norm_groups must divide stem_channels and growth_rate");
    if (decoder_channels.size() != 4)
        throw std::runtime_error("arch: exactly 4 decoder stages are required");
    for (int64_t c : decoder_channels)
        if (c < 1 || c % norm_groups != 0)
            throw std::runtime_error("arch: norm_groups must divide decoder channel widths");
}

ArchitectureConfig::Plan ArchitectureConfig::plan() const {
    validate();
    Plan p;
    int64_t cur = stem_channels;
    for (int i = 0; i < 4; ++i) {
        p.block_in[i] = cur;
        cur += block_layers[static_cast<size_t>(i)] * growth_rate;
        p.block_out[i] = cur;
        // 1x1x1 transition halves the width, rounded up to a group multiple.
        cur = round_up((cur + 1) / 2, norm_groups);
        p.feature_ch[i] = cur;
    }
    return p;
}

std::string ArchitectureConfig::serialize() const {
    std::ostringstream os;
    os << "block_layers =";
    for (int64_t l : block_layers) os << " " << l;
    os << "\ngrowth_rate = " << growth_rate << "\nstem_channels = " << stem_channels
       << "\nnorm_groups = " << norm_groups << "\ndecoder_channels =";
    for (int64_t c : decoder_channels) os << " " << c;
    os << "\n";
    return os.str();
}

ArchitectureConfig ArchitectureConfig::deserialize(const std::string& text) {
    ArchitectureConfig cfg;
    cfg.block_layers.clear();
    cfg.decoder_channels.clear();
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, line.find(' '));
        std::istringstream vals(line.substr(eq + 1));
        if (key == "block_layers") {
            int64_t v;
            while (vals >> v) cfg.block_layers.push_back(v);
        } else if (key == "decoder_channels") {
            int64_t v;
            while (vals >> v) cfg.decoder_channels.push_back(v);
        } else if (key == "growth_rate")
            vals >> cfg.growth_rate;
        else if (key == "stem_channels")
            vals >> cfg.stem_channels;
        else if (key == "norm_groups")
            vals >> cfg.norm_groups;
    }
    cfg.validate();
    return cfg;
}

ArchitectureConfig ArchitectureConfig::desk_scale() {
    ArchitectureConfig c;
    c.growth_rate = 16;
    c.stem_channels = 16;
    c.norm_groups = 8;
    c.decoder_channels = {64, 48, 32, 16};
    return c;
}

ArchitectureConfig ArchitectureConfig::full_scale() {
    ArchitectureConfig c;
    c.growth_rate = 16;
    c.stem_channels = 16;
    c.norm_groups = 8;
    c.decoder_channels = {64, 48, 32, 16};
    return c;
}

ArchitectureConfig ArchitectureConfig::tiny() {
    ArchitectureConfig c;
    c.block_layers = {1, 1, 1, 1};
    c.growth_rate = 2;
    c.stem_channels = 2;
    c.norm_groups = 2;
    c.decoder_channels = {2, 2, 2, 2};
    return c;
}

// ---------------------------------------------------------------------------

void PreActConv::configure(const std::string& name, int64_t cin, int64_t cout, int64_t k,
                           int64_t stride, int64_t pad, int64_t groups) {
    gn.configure(name + ".gn", cin, groups);
    conv.configure(name + ".conv", cin, cout, k, stride, pad);
}

void PreActConv::init_params(ParameterStore& store, std::mt19937_64& rng) const {
    gn.init_params(store);
    conv.init_params(store, rng);
}

Tensor PreActConv::forward(const ParameterStore& store, const Tensor& x) {
    return conv.forward(store, relu.forward(gn.forward(store, x)));
}

Tensor PreActConv::backward(const ParameterStore& store, const Tensor& grad_y, GradStore& grads) {
    return gn.backward(store, relu.backward(conv.backward(store, grad_y, grads)), grads);
}

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(const ArchitectureConfig& cfg_) : cfg(cfg_), plan(cfg_.plan()) {
    stem.configure("encoder.stem", 1, cfg.stem_channels, 3, 1, 1);
    for (int i = 0; i < 4; ++i) {
        auto& blk = blocks[static_cast<size_t>(i)];
        int64_t cur = plan.block_in[i];
        blk.dense.resize(static_cast<size_t>(cfg.block_layers[static_cast<size_t>(i)]));
        for (size_t j = 0; j < blk.dense.size(); ++j) {
            std::string name =
                "encoder.block" + std::to_string(i) + ".dense" + std::to_string(j);
            blk.dense[j].configure(name, cur, cfg.growth_rate, 3, 1, 1, cfg.norm_groups);
            cur += cfg.growth_rate;
        }
        blk.down.configure("encoder.block" + std::to_string(i) + ".down", cur, cur, 3, 2, 1,
                           cfg.norm_groups);
        blk.trans.configure("encoder.block" + std::to_string(i) + ".trans", cur,
                            plan.feature_ch[i], 1, 1, 0, cfg.norm_groups);
    }
}

void Encoder::init_params(ParameterStore& store, std::mt19937_64& rng) const {
    stem.init_params(store, rng);
    for (const auto& blk : blocks) {
        for (const auto& d : blk.dense) d.init_params(store, rng);
        blk.down.init_params(store, rng);
        blk.trans.init_params(store, rng);
    }
}

EncoderFeatures Encoder::forward(const ParameterStore& store, const Tensor& input) {
    if (input.shape.size() != 4 || input.shape[0] != 1)
        throw std::runtime_error("encoder: expected [1,D,H,W] input, got " +
                                 shape_str(input.shape));
    for (int a = 1; a < 4; ++a)
        if (input.shape[static_cast<size_t>(a)] % 16 != 0)
            throw std::runtime_error("encoder: input dims must be divisible by 16, got " +
                                     shape_str(input.shape));
    EncoderFeatures out;
    Tensor cur = stem.forward(store, input);
    for (int i = 0; i < 4; ++i) {
        auto& blk = blocks[static_cast<size_t>(i)];
        for (auto& layer : blk.dense) {
            Tensor y = layer.forward(store, cur);
            cur = nn::concat_channels(cur, y);
        }
        cur = blk.down.forward(store, cur);
        cur = blk.trans.forward(store, cur);
        out.f[static_cast<size_t>(i)] = cur;
    }
    out.embedding = pool.forward(out.f[3]);
    return out;
}

Tensor Encoder::backward(const ParameterStore& store, std::array<Tensor, 4> grad_f,
                         const Tensor* grad_embedding, GradStore& grads) {
    Tensor grad_cur;
    if (grad_embedding) {
        Tensor g = pool.backward(*grad_embedding);
        if (grad_f[3].numel() == 0)
            grad_f[3] = std::move(g);
        else
            for (size_t i = 0; i < g.data.size(); ++i) grad_f[3].data[i] += g.data[i];
    }
    for (int i = 3; i >= 0; --i) {
        auto& blk = blocks[static_cast<size_t>(i)];
        Tensor g = std::move(grad_f[static_cast<size_t>(i)]);
        if (g.numel() == 0) {
            g = std::move(grad_cur);
        } else if (grad_cur.numel() != 0) {
            for (size_t j = 0; j < g.data.size(); ++j) g.data[j] += grad_cur.data[j];
        }
        g = blk.trans.backward(store, g, grads);
        g = blk.down.backward(store, g, grads);
        int64_t cur_ch = plan.block_out[i];
        for (auto it = blk.dense.rbegin(); it != blk.dense.rend(); ++it) {
            cur_ch -= cfg.growth_rate;
            auto [g_prev, g_y] = nn::split_channels(g, cur_ch, cfg.growth_rate);
            Tensor g_in = it->backward(store, g_y, grads);
            for (size_t j = 0; j < g_prev.data.size(); ++j) g_prev.data[j] += g_in.data[j];
            g = std::move(g_prev);
        }
        grad_cur = std::move(g);
    }
    return stem.backward(store, grad_cur, grads);
}

// ---------------------------------------------------------------------------
// Siamese

std::pair<Tensor, Tensor> SiameseNet::forward(const ParameterStore& store, const Tensor& crop_a,
                                              const Tensor& crop_b) {
    EncoderFeatures fa = branch_a.forward(store, crop_a);
    EncoderFeatures fb = branch_b.forward(store, crop_b);
    return {std::move(fa.embedding), std::move(fb.embedding)};
}

void SiameseNet::backward(const ParameterStore& store, const Tensor& grad_a, const Tensor& grad_b,
                          GradStore& grads) {
    std::array<Tensor, 4> none{};
    branch_a.backward(store, none, &grad_a, grads);
    std::array<Tensor, 4> none_b{};
    branch_b.backward(store, none_b, &grad_b, grads);
}

// ---------------------------------------------------------------------------
// SegNet

SegNet::SegNet(const ArchitectureConfig& cfg_) : cfg(cfg_), encoder(cfg_) {
    auto plan = cfg.plan();
    const auto& dc = cfg.decoder_channels;
    skip_ch = {plan.feature_ch[2], plan.feature_ch[1], plan.feature_ch[0]};  // f3, f2, f1
    for (int s = 0; s < 4; ++s) {
        int64_t in_dec = s == 0 ? plan.feature_ch[3]
                                : dc[static_cast<size_t>(s - 1)] + skip_ch[static_cast<size_t>(s - 1)];
        int64_t in_rec = s == 0 ? plan.feature_ch[3] : dc[static_cast<size_t>(s - 1)];
        int64_t w = dc[static_cast<size_t>(s)];
        std::string dn = "decoder.stage" + std::to_string(s);
        std::string rn = "recon.stage" + std::to_string(s);
        // Concatenated skip widths are group multiples because every feature
        // width already is; no extra rounding needed.
        dec[static_cast<size_t>(s)].c1.configure(dn + ".c1", in_dec, w, 3, 1, 1, cfg.norm_groups);
        dec[static_cast<size_t>(s)].c2.configure(dn + ".c2", w, w, 3, 1, 1, cfg.norm_groups);
        dec[static_cast<size_t>(s)].up_gn.configure(dn + ".up_gn", w, cfg.norm_groups);
        dec[static_cast<size_t>(s)].up.configure(dn + ".up", w, w);
        rec[static_cast<size_t>(s)].c1.configure(rn + ".c1", in_rec, w, 3, 1, 1, cfg.norm_groups);
        rec[static_cast<size_t>(s)].c2.configure(rn + ".c2", w, w, 3, 1, 1, cfg.norm_groups);
        rec[static_cast<size_t>(s)].up_gn.configure(rn + ".up_gn", w, cfg.norm_groups);
        rec[static_cast<size_t>(s)].up.configure(rn + ".up", w, w);
    }
    seg_head.configure("decoder.head", dc[3], 1, 1, 1, 0, cfg.norm_groups);
    rec_head.configure("recon.head", dc[3], 1, 1, 1, 0, cfg.norm_groups);
}

void SegNet::init_params(ParameterStore& store, std::mt19937_64& rng) const {
    encoder.init_params(store, rng);
    for (const auto& st : dec) {
        st.c1.init_params(store, rng);
        st.c2.init_params(store, rng);
        st.up_gn.init_params(store);
        st.up.init_params(store, rng);
    }
    seg_head.init_params(store, rng);
    for (const auto& st : rec) {
        st.c1.init_params(store, rng);
        st.c2.init_params(store, rng);
        st.up_gn.init_params(store);
        st.up.init_params(store, rng);
    }
    rec_head.init_params(store, rng);
}

SegOutput SegNet::forward(const ParameterStore& store, const Tensor& input) {
    EncoderFeatures feats = encoder.forward(store, input);
    skip_cache = {feats.f[2], feats.f[1], feats.f[0], Tensor()};

    auto run_stage = [&](DecStage& st, Tensor x) {
        x = st.c1.forward(store, x);
        x = st.c2.forward(store, x);
        x = st.up_relu.forward(st.up_gn.forward(store, x));
        return st.up.forward(store, x);
    };

    Tensor d = feats.f[3];
    Tensor r = feats.f[3];
    for (int s = 0; s < 4; ++s) {
        d = run_stage(dec[static_cast<size_t>(s)], std::move(d));
        r = run_stage(rec[static_cast<size_t>(s)], std::move(r));
        if (s < 3) {
            const Tensor& skip = skip_cache[static_cast<size_t>(s)];
            if (use_skips) {
                d = nn::concat_channels(d, skip);
            } else {
                Tensor zeros({skip.shape[0], d.shape[1], d.shape[2], d.shape[3]});
                d = nn::concat_channels(d, zeros);
            }
        }
    }
    SegOutput out;
    out.seg_logits = seg_head.forward(store, d);
    out.recon = rec_head.forward(store, r);
    return out;
}

void SegNet::backward(const ParameterStore& store, const Tensor& grad_seg,
                      const Tensor& grad_recon, GradStore& grads) {
    auto back_stage = [&](DecStage& st, Tensor g) {
        g = st.up.backward(store, g, grads);
        g = st.up_gn.backward(store, st.up_relu.backward(g), grads);
        g = st.c2.backward(store, g, grads);
        return st.c1.backward(store, g, grads);
    };

    std::array<Tensor, 4> grad_f{};
    Tensor gd = seg_head.backward(store, grad_seg, grads);
    for (int s = 3; s >= 0; --s) {
        if (s < 3) {
            int64_t up_ch = cfg.decoder_channels[static_cast<size_t>(s)];
            auto [g_up, g_skip] = nn::split_channels(gd, up_ch, skip_ch[static_cast<size_t>(s)]);
            if (use_skips) {
                // f3 feeds stage 1's input, f2 stage 2's, f1 stage 3's.
                size_t fi = static_cast<size_t>(2 - s);
                if (grad_f[fi].numel() == 0)
                    grad_f[fi] = std::move(g_skip);
                else
                    for (size_t i = 0; i < g_skip.data.size(); ++i)
                        grad_f[fi].data[i] += g_skip.data[i];
            }
            gd = std::move(g_up);
        }
        gd = back_stage(dec[static_cast<size_t>(s)], std::move(gd));
    }

    Tensor gr = rec_head.backward(store, grad_recon, grads);
    for (int s = 3; s >= 0; --s) gr = back_stage(rec[static_cast<size_t>(s)], std::move(gr));

    // Both decoders consume f4.
    Tensor grad_f4 = std::move(gd);
    for (size_t i = 0; i < gr.data.size(); ++i) grad_f4.data[i] += gr.data[i];
    grad_f[3] = std::move(grad_f4);
    encoder.backward(store, std::move(grad_f), nullptr, grads);
}

// ---------------------------------------------------------------------------

ParameterStore init_random(const ArchitectureConfig& cfg, uint64_t seed) {
    SegNet net(cfg);
    ParameterStore store;
    std::mt19937_64 rng(seed);
    net.init_params(store, rng);
    return store;
}

ParameterStore init_encoder_random(const ArchitectureConfig& cfg, uint64_t seed) {
    Encoder enc(cfg);
    ParameterStore store;
    std::mt19937_64 rng(seed);
    enc.init_params(store, rng);
    return store;
}

Tensor as_input(const std::vector<double>& voxels, const std::array<int64_t, 3>& shape) {
    Tensor t({1, shape[0], shape[1], shape[2]});
    if (static_cast<int64_t>(voxels.size()) != t.numel())
        throw std::runtime_error("as_input: voxel count does not match shape");
    std::memcpy(t.data.data(), voxels.data(), voxels.size() * sizeof(double));
    return t;
}

}  // namespace kseg
