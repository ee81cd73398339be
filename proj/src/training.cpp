#include "kseg/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "kseg/archive.hpp"
#include "kseg/metrics.hpp"

namespace kseg {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void check_finite(double loss, int epoch, size_t step, const std::string& stage) {
    if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << stage << ": non-finite loss " << loss << " at epoch " << epoch << ", step " << step;
        throw TrainingDivergence(os.str());
    }
}

std::vector<size_t> epoch_order(size_t n, uint64_t run_seed, int epoch) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(mix_seed(run_seed, 0x5a5a5a5aull + static_cast<uint64_t>(epoch)));
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<std::string>> split_cases(
    const std::vector<std::string>& case_ids, double fraction, uint64_t seed) {
    if (case_ids.size() < 2) throw std::runtime_error("split_cases: need at least 2 cases");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::runtime_error("split_cases: fraction must be in (0,1)");
    std::vector<std::string> ids = case_ids;
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    size_t n_train = static_cast<size_t>(
        std::llround(fraction * static_cast<double>(ids.size())));
    if (n_train == 0 || n_train == ids.size())
        throw std::runtime_error("split_cases: split leaves an empty set");
    std::vector<std::string> train(ids.begin(), ids.begin() + static_cast<int64_t>(n_train));
    std::vector<std::string> val(ids.begin() + static_cast<int64_t>(n_train), ids.end());
    return {std::move(train), std::move(val)};
}

std::vector<double> sigmoid(const std::vector<double>& logits) {
    std::vector<double> p(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    return p;
}

// ---------------------------------------------------------------------------
// Proxy stage

TrainState train_proxy(const std::vector<KidneyCrop>& crops,
                       const std::vector<PairSample>& train_pairs,
                       const std::vector<PairSample>& val_pairs, const ArchitectureConfig& arch,
                       const TrainConfig& cfg, TrainState state, const EpochCallback& on_epoch) {
    if (train_pairs.empty()) throw std::runtime_error("train_proxy: no training pairs");
    if (state.fresh()) state.params = init_encoder_random(arch, cfg.seed);
    state.adam.cfg = cfg.adam();
    SiameseNet net(arch);
    Encoder eval_enc(arch);

    auto crop_input = [&](size_t i) { return as_input(crops[i].voxels, crops[i].shape); };

    // Unique crop indices appearing in validation pairs; embedded once per epoch.
    std::set<size_t> val_crop_set;
    for (const auto& p : val_pairs) {
        val_crop_set.insert(p.a);
        val_crop_set.insert(p.b);
    }

    for (int epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
        double t0 = now_seconds();
        auto order = epoch_order(train_pairs.size(), cfg.seed, epoch);
        double loss_sum = 0;
        for (size_t step = 0; step < order.size(); ++step) {
            const PairSample& pair = train_pairs[order[step]];
            auto [ea, eb] = net.forward(state.params, crop_input(pair.a), crop_input(pair.b));
            std::vector<double> ga, gb;
            double loss =
                contrastive_loss(ea.data, eb.data, pair.label, cfg.contrastive, &ga, &gb);
            check_finite(loss, epoch, step, "train_proxy");
            loss_sum += loss;
            GradStore grads;
            Tensor tga({static_cast<int64_t>(ga.size())}), tgb({static_cast<int64_t>(gb.size())});
            tga.data = ga;
            tgb.data = gb;
            net.backward(state.params, tga, tgb, grads);
            state.adam.step(state.params, grads);
        }

        // Validation: pair predicted "same" when d < margin/2.
        std::map<size_t, std::vector<double>> val_emb;
        for (size_t ci : val_crop_set)
            val_emb[ci] = eval_enc.forward(state.params, crop_input(ci)).embedding.data;
        int64_t correct = 0;
        for (const auto& p : val_pairs) {
            const auto& a = val_emb[p.a];
            const auto& b = val_emb[p.b];
            double d2 = 0;
            for (size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
            int pred = std::sqrt(d2) < cfg.contrastive.margin / 2.0 ? 1 : 0;
            correct += pred == p.label;
        }
        double acc = val_pairs.empty()
                         ? 0.0
                         : static_cast<double>(correct) / static_cast<double>(val_pairs.size());

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss_total = loss_sum / static_cast<double>(train_pairs.size());
        rec.val_metric = acc;
        rec.seconds = now_seconds() - t0;
        state.curve.push_back(rec);
        if (acc > state.best_metric) {
            state.best_metric = acc;
            state.best_epoch = epoch;
            state.best = state.params;
        }
        state.next_epoch = epoch + 1;
        if (on_epoch) on_epoch(rec, state);
    }
    if (state.best.empty()) state.best = state.params;
    return state;
}

ParameterStore transfer_encoder(const ParameterStore& siamese_ckpt) {
    ParameterStore out;
    for (const auto& [name, value] : siamese_ckpt)
        if (name.rfind("encoder.", 0) == 0) out.emplace(name, value);
    if (out.empty())
        throw std::runtime_error("transfer_encoder: checkpoint contains no encoder parameters");
    return out;
}

// ---------------------------------------------------------------------------
// Segmentation stage

namespace {

void apply_encoder_init(ParameterStore& params, const ParameterStore& encoder_init) {
    for (const auto& [name, value] : encoder_init) {
        if (name.rfind("encoder.", 0) != 0)
            throw std::runtime_error("encoder init: unexpected non-encoder parameter " + name);
        auto it = params.find(name);
        if (it == params.end())
            throw std::runtime_error("encoder init: parameter " + name +
                                     " does not exist in the segmentation network");
        if (it->second.shape != value.shape)
            throw std::runtime_error("encoder init: shape mismatch for " + name + ": " +
                                     shape_str(it->second.shape) + " vs " +
                                     shape_str(value.shape));
        it->second = value;
    }
    // The transfer must cover the whole encoder.
    for (const auto& [name, value] : params)
        if (name.rfind("encoder.", 0) == 0 && encoder_init.find(name) == encoder_init.end())
            throw std::runtime_error("encoder init: missing encoder parameter " + name);
}

double validation_dice(SegNet& net, const ParameterStore& params,
                       const std::vector<SegCase>& val_cases) {
    if (val_cases.empty()) return 0.0;
    double sum = 0;
    for (const auto& c : val_cases) {
        SegOutput out = net.forward(params, c.image);
        std::vector<double> probs = sigmoid(out.seg_logits.data);
        BinaryMask pred = binarize(probs, {c.image.shape[1], c.image.shape[2], c.image.shape[3]},
                                   0.5);
        BinaryMask gt;
        gt.shape = pred.shape;
        gt.voxels = c.target;
        sum += dice(pred, gt);
    }
    return sum / static_cast<double>(val_cases.size());
}

}  // namespace

TrainState train_segmentation(const std::vector<SegCase>& train_cases,
                              const std::vector<SegCase>& val_cases,
                              const std::optional<ParameterStore>& encoder_init,
                              const ArchitectureConfig& arch, const TrainConfig& cfg,
                              const LossSchedule& schedule, TrainState state,
                              const EpochCallback& on_epoch) {
    if (train_cases.empty()) throw std::runtime_error("train_segmentation: no training cases");
    {
        // Validation cases must never contribute gradients.
        std::set<std::string> train_ids;
        for (const auto& c : train_cases) train_ids.insert(c.id);
        for (const auto& c : val_cases)
            if (train_ids.count(c.id))
                throw std::runtime_error("train_segmentation: case " + c.id +
                                         " appears in both splits");
    }
    if (state.fresh()) {
        state.params = init_random(arch, cfg.seed);
        if (encoder_init) apply_encoder_init(state.params, *encoder_init);
    }
    state.adam.cfg = cfg.adam();
    SegNet net(arch);

    for (int epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
        double t0 = now_seconds();
        auto order = epoch_order(train_cases.size(), cfg.seed, epoch);
        double sum_total = 0, sum_bce = 0, sum_dice = 0, sum_recon = 0;
        double w_bce = 0, w_dice = 0;
        for (size_t step = 0; step < order.size(); ++step) {
            const SegCase& c = train_cases[order[step]];
            SegOutput out = net.forward(state.params, c.image);
            std::vector<double> probs = sigmoid(out.seg_logits.data);
            double fg_weight = default_fg_weight(c.target);
            std::vector<double> grad_probs, grad_recon;
            SegLossBreakdown loss =
                composite_seg_loss(probs, c.target, out.recon.data, c.image.data, epoch, schedule,
                                   cfg.lambda_rec, fg_weight, &grad_probs, &grad_recon);
            check_finite(loss.total, epoch, step, "train_segmentation");
            sum_total += loss.total;
            sum_bce += loss.bce;
            sum_dice += loss.dice;
            sum_recon += loss.recon;
            w_bce = loss.w_bce;
            w_dice = loss.w_dice;

            Tensor grad_logits(out.seg_logits.shape);
            for (size_t i = 0; i < probs.size(); ++i)
                grad_logits.data[i] = grad_probs[i] * probs[i] * (1.0 - probs[i]);
            Tensor grad_rec(out.recon.shape);
            grad_rec.data = grad_recon;

            GradStore grads;
            net.backward(state.params, grad_logits, grad_rec, grads);
            state.adam.step(state.params, grads);
        }

        double val_dc = validation_dice(net, state.params, val_cases);

        EpochRecord rec;
        rec.epoch = epoch;
        double n = static_cast<double>(train_cases.size());
        rec.loss_total = sum_total / n;
        rec.loss_bce = sum_bce / n;
        rec.loss_dice = sum_dice / n;
        rec.loss_recon = sum_recon / n;
        rec.w_bce = w_bce;
        rec.w_dice = w_dice;
        rec.val_metric = val_dc;
        rec.seconds = now_seconds() - t0;
        state.curve.push_back(rec);
        if (val_dc > state.best_metric) {
            state.best_metric = val_dc;
            state.best_epoch = epoch;
            state.best = state.params;
        }
        state.next_epoch = epoch + 1;
        if (on_epoch) on_epoch(rec, state);
    }
    if (state.best.empty()) state.best = state.params;
    return state;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kFormatVersion = "1";

void put_params(Archive& a, const std::string& prefix, const ParameterStore& params) {
    for (const auto& [name, value] : params)
        a[prefix + name] = ArchiveEntry::from_tensor(value);
}

ParameterStore get_params(const Archive& a, const std::string& prefix) {
    ParameterStore out;
    for (const auto& [name, entry] : a)
        if (name.rfind(prefix, 0) == 0)
            out.emplace(name.substr(prefix.size()), entry.to_tensor());
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterStore& params,
                     const ArchitectureConfig& arch, const std::string& kind) {
    Archive a;
    a["__format_version__"] = ArchiveEntry::from_string(kFormatVersion);
    a["__arch__"] = ArchiveEntry::from_string(arch.serialize());
    a["__kind__"] = ArchiveEntry::from_string(kind);
    put_params(a, "param/", params);
    write_archive(path, a);
}

Checkpoint load_checkpoint(const std::string& path) {
    Archive a = read_archive(path);
    auto vit = a.find("__format_version__");
    if (vit == a.end() || vit->second.to_string() != kFormatVersion)
        throw std::runtime_error("checkpoint: unsupported format version in " + path);
    Checkpoint c;
    c.arch = ArchitectureConfig::deserialize(a.at("__arch__").to_string());
    c.kind = a.at("__kind__").to_string();
    c.params = get_params(a, "param/");
    if (c.params.empty()) throw std::runtime_error("checkpoint: no parameters in " + path);
    return c;
}

Checkpoint load_checkpoint(const std::string& path, const ArchitectureConfig& expected) {
    Checkpoint c = load_checkpoint(path);
    if (!(c.arch == expected))
        throw std::runtime_error("checkpoint: architecture in " + path +
                                 " does not match the requested configuration");
    return c;
}

void save_train_state(const std::string& path, const TrainState& state,
                      const ArchitectureConfig& arch, const std::string& kind) {
    Archive a;
    a["__format_version__"] = ArchiveEntry::from_string(kFormatVersion);
    a["__arch__"] = ArchiveEntry::from_string(arch.serialize());
    a["__kind__"] = ArchiveEntry::from_string(kind);
    put_params(a, "param/", state.params);
    put_params(a, "best/", state.best);
    put_params(a, "adam_m/", state.adam.m);
    put_params(a, "adam_v/", state.adam.v);
    std::ostringstream meta;
    meta.precision(17);
    meta << state.adam.t << " " << state.next_epoch << " " << state.best_metric << " "
         << state.best_epoch;
    a["__state__"] = ArchiveEntry::from_string(meta.str());
    write_archive(path, a);
}

TrainState load_train_state(const std::string& path, const ArchitectureConfig& expected,
                            const std::string& kind) {
    Archive a = read_archive(path);
    auto vit = a.find("__format_version__");
    if (vit == a.end() || vit->second.to_string() != kFormatVersion)
        throw std::runtime_error("train state: unsupported format version in " + path);
    if (a.at("__kind__").to_string() != kind)
        throw std::runtime_error("train state: " + path + " is not a " + kind + " checkpoint");
    ArchitectureConfig arch = ArchitectureConfig::deserialize(a.at("__arch__").to_string());
    if (!(arch == expected))
        throw std::runtime_error("train state: architecture in " + path +
                                 " does not match the requested configuration");
    TrainState s;
    s.params = get_params(a, "param/");
    s.best = get_params(a, "best/");
    s.adam.m = get_params(a, "adam_m/");
    s.adam.v = get_params(a, "adam_v/");
    std::istringstream meta(a.at("__state__").to_string());
    meta >> s.adam.t >> s.next_epoch >> s.best_metric >> s.best_epoch;
    if (!meta) throw std::runtime_error("train state: corrupt state record in " + path);
    return s;
}

SegCase make_seg_case(const std::string& id, const Volume& v, const LabelMask& m) {
    if (v.shape != m.shape) throw std::runtime_error("make_seg_case: image/mask shape mismatch");
    SegCase c;
    c.id = id;
    c.image = as_input(v.voxels, v.shape);
    c.target.resize(m.voxels.size());
    for (size_t i = 0; i < m.voxels.size(); ++i) c.target[i] = m.voxels[i] ? 1 : 0;
    return c;
}

}  // namespace kseg
