#include "kseg/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "kseg/archive.hpp"
#include "kseg/nifti.hpp"
#include "kseg/phantom.hpp"
#include "kseg/plot.hpp"
#include "kseg/proxy.hpp"

namespace kseg {

namespace fs = std::filesystem;

namespace {

const std::array<uint8_t, 3> kBlue{31, 119, 180};
const std::array<uint8_t, 3> kOrange{255, 127, 14};

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int epochs_to_threshold(const TrainingCurve& curve, double threshold) {
    for (const auto& r : curve)
        if (r.val_metric >= threshold) return r.epoch + 1;
    return -1;
}

std::vector<double> curve_epochs(const TrainingCurve& c) {
    std::vector<double> x;
    for (const auto& r : c) x.push_back(static_cast<double>(r.epoch + 1));
    return x;
}

std::vector<double> curve_vals(const TrainingCurve& c) {
    std::vector<double> y;
    for (const auto& r : c) y.push_back(r.val_metric);
    return y;
}

}  // namespace

std::vector<std::string> list_cases(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("dataset: " + dir + " is not a directory");
    std::vector<std::string> ids;
    fs::path manifest = fs::path(dir) / "manifest.tsv";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            auto tab = line.find('\t');
            std::string id = tab == std::string::npos ? line : line.substr(0, tab);
            if (id.empty()) continue;
            if (!saved_case_exists(dir, id))
                throw DataError("dataset: manifest lists " + id + " but " + dir + "/" + id +
                                ".kvol is missing");
            ids.push_back(id);
        }
    } else {
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.path().extension() == ".kvol") ids.push_back(e.path().stem().string());
        }
        std::sort(ids.begin(), ids.end());
    }
    if (ids.empty()) throw DataError("dataset: no cases found in " + dir);
    return ids;
}

std::vector<std::string> cmd_gen_phantoms(const ExperimentConfig& cfg, const std::string& out_dir) {
    if (!cfg.phantom) throw ConfigError("gen-phantoms: the config has no dataset.phantom section");
    const PhantomSpec& spec = *cfg.phantom;
    spec.validate();
    fs::create_directories(out_dir);
    std::vector<std::string> ids;
    std::ostringstream manifest;
    manifest << "case_id\tshape\tlabel1_voxels\tlabel2_voxels\tcontent_hash\n";
    for (int64_t i = 0; i < cfg.phantom_cases; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "case_%05lld", static_cast<long long>(i));
        std::string case_id(buf);
        auto [img, mask] = generate_case(spec, i);
        // Phantoms are born at target spacing, so only the intensity half of
        // the pipeline applies before they are training-ready.
        img = normalize(window_clip(img, cfg.preprocess.window_lo, cfg.preprocess.window_hi));
        int64_t n1 = 0, n2 = 0;
        for (uint8_t v : mask.voxels) {
            n1 += v == 1;
            n2 += v == 2;
        }
        PreprocessedCase c;
        c.volume = std::move(img);
        c.mask = std::move(mask);
        c.original_shape = spec.dims;
        c.original_spacing = spec.spacing;
        save_case(out_dir, case_id, c);
        uint64_t h = fnv1a(c.volume.voxels.data(), c.volume.voxels.size() * sizeof(double));
        h = fnv1a(c.mask->voxels.data(), c.mask->voxels.size(), h);
        manifest << case_id << "\t" << spec.dims[0] << "x" << spec.dims[1] << "x" << spec.dims[2]
                 << "\t" << n1 << "\t" << n2 << "\t" << std::hex << h << std::dec << "\n";
        ids.push_back(case_id);
    }
    std::ofstream mf(fs::path(out_dir) / "manifest.tsv");
    if (!mf) throw DataError("gen-phantoms: cannot write manifest in " + out_dir);
    mf << manifest.str();
    return ids;
}

std::string ensure_dataset(const ExperimentConfig& cfg) {
    if (cfg.case_dir) {
        list_cases(*cfg.case_dir);  // validates existence and content
        return *cfg.case_dir;
    }
    std::string data_dir = (fs::path(cfg.out_dir) / "data").string();
    if (fs::exists(fs::path(data_dir) / "manifest.tsv")) {
        auto ids = list_cases(data_dir);
        if (static_cast<int64_t>(ids.size()) == cfg.phantom_cases) return data_dir;
    }
    cmd_gen_phantoms(cfg, data_dir);
    return data_dir;
}

std::vector<SegCase> load_seg_cases(const std::string& dir, const std::vector<std::string>& ids) {
    std::vector<SegCase> cases;
    cases.reserve(ids.size());
    for (const auto& id : ids) {
        PreprocessedCase c = load_saved_case(dir, id);
        if (!c.mask) throw DataError("dataset: case " + id + " has no segmentation mask");
        cases.push_back(make_seg_case(id, c.volume, *c.mask));
    }
    return cases;
}

std::vector<KidneyCrop> build_crops(const std::string& dir, const std::vector<std::string>& ids,
                                    const std::array<int64_t, 3>& crop_shape) {
    std::vector<KidneyCrop> crops;
    for (const auto& id : ids) {
        PreprocessedCase c = load_saved_case(dir, id);
        if (!c.mask) throw DataError("dataset: case " + id + " has no segmentation mask");
        try {
            split_sagittal(c.volume, *c.mask, id);  // midline sanity check
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping case for the proxy task: " << e.what() << "\n";
            continue;
        }
        crops.push_back(extract_crop(c.volume, *c.mask, Side::Left, crop_shape, id));
        crops.push_back(extract_crop(c.volume, *c.mask, Side::Right, crop_shape, id));
    }
    if (crops.empty()) throw DataError("dataset: no usable proxy crops in " + dir);
    return crops;
}

// ---------------------------------------------------------------------------
// Curve CSV

void write_curve_csv(const std::string& path, const TrainingCurve& curve, bool proxy) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out.precision(17);
    if (proxy) {
        out << "epoch,loss_total,val_acc,seconds\n";
        for (const auto& r : curve)
            out << r.epoch << "," << r.loss_total << "," << r.val_metric << "," << r.seconds
                << "\n";
    } else {
        out << "epoch,loss_total,loss_bce,loss_dice,loss_recon,w_bce,w_dice,val_dc,seconds\n";
        for (const auto& r : curve)
            out << r.epoch << "," << r.loss_total << "," << r.loss_bce << "," << r.loss_dice << ","
                << r.loss_recon << "," << r.w_bce << "," << r.w_dice << "," << r.val_metric << ","
                << r.seconds << "\n";
    }
}

TrainingCurve read_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    std::string header;
    std::getline(in, header);
    bool proxy = header.find("val_acc") != std::string::npos;
    TrainingCurve curve;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<double> f;
        while (std::getline(ls, field, ',')) f.push_back(std::stod(field));
        EpochRecord r;
        if (proxy) {
            if (f.size() != 4) throw DataError("curve: malformed row in " + path);
            r.epoch = static_cast<int>(f[0]);
            r.loss_total = f[1];
            r.val_metric = f[2];
            r.seconds = f[3];
        } else {
            if (f.size() != 9) throw DataError("curve: malformed row in " + path);
            r.epoch = static_cast<int>(f[0]);
            r.loss_total = f[1];
            r.loss_bce = f[2];
            r.loss_dice = f[3];
            r.loss_recon = f[4];
            r.w_bce = f[5];
            r.w_dice = f[6];
            r.val_metric = f[7];
            r.seconds = f[8];
        }
        curve.push_back(r);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// preprocess

int cmd_preprocess(const std::string& input_dir, const std::string& out_dir,
                   const PreprocessConfig& cfg) {
    if (!fs::is_directory(input_dir))
        throw DataError("preprocess: " + input_dir + " is not a directory");
    std::vector<std::string> case_ids;
    for (const auto& e : fs::directory_iterator(input_dir)) {
        if (e.is_directory() && e.path().filename().string().rfind("case_", 0) == 0)
            case_ids.push_back(e.path().filename().string());
    }
    std::sort(case_ids.begin(), case_ids.end());
    if (case_ids.empty())
        throw DataError("preprocess: no case_* directories under " + input_dir);

    fs::create_directories(out_dir);
    auto find_nifti = [&](const std::string& case_id, const std::string& stem,
                          bool required) -> std::optional<std::string> {
        for (const char* ext : {".nii.gz", ".nii"}) {
            fs::path p = fs::path(input_dir) / case_id / (stem + ext);
            if (fs::exists(p)) return p.string();
        }
        if (required)
            throw DataError("preprocess: " + case_id + " has no " + stem + ".nii[.gz]");
        return std::nullopt;
    };

    int written = 0;
    for (const auto& case_id : case_ids) {
        if (saved_case_exists(out_dir, case_id)) {
            std::cout << case_id << ": already preprocessed, skipping\n";
            continue;
        }
        std::string image = *find_nifti(case_id, "imaging", true);
        std::optional<std::string> mask = find_nifti(case_id, "segmentation", false);
        PreprocessedCase c = preprocess_case(image, mask, cfg);
        save_case(out_dir, case_id, c);
        std::cout << case_id << ": " << c.original_shape[0] << "x" << c.original_shape[1] << "x"
                  << c.original_shape[2] << " -> " << c.volume.shape[0] << "x" << c.volume.shape[1]
                  << "x" << c.volume.shape[2] << (mask ? " (with mask)" : "") << "\n";
        ++written;
    }
    return written;
}

// ---------------------------------------------------------------------------
// Training commands

namespace {

void write_split(const std::string& path, const std::vector<std::string>& train,
                 const std::vector<std::string>& val) {
    std::ofstream out(path);
    for (const auto& id : train) out << "train\t" << id << "\n";
    for (const auto& id : val) out << "val\t" << id << "\n";
}

TrainState maybe_resume(const std::string& state_path, const std::string& curve_path,
                        const ArchitectureConfig& arch, const std::string& kind) {
    TrainState state;
    if (!fs::exists(state_path)) return state;
    state = load_train_state(state_path, arch, kind);
    if (fs::exists(curve_path)) {
        for (const auto& r : read_curve_csv(curve_path))
            if (r.epoch < state.next_epoch) state.curve.push_back(r);
    }
    std::cout << "resuming " << kind << " training from epoch " << state.next_epoch << "\n";
    return state;
}

void finish_run(RunResult& r, const ExperimentConfig& cfg, const std::string& kind, bool proxy) {
    r.best_ckpt = (fs::path(r.run_dir) / "best.ckpt").string();
    r.last_ckpt = (fs::path(r.run_dir) / "last.ckpt").string();
    save_checkpoint(r.best_ckpt, r.state.best, cfg.arch, kind);
    save_checkpoint(r.last_ckpt, r.state.params, cfg.arch, kind);
    write_curve_csv(r.curve_csv, r.state.curve, proxy);
}

}  // namespace

RunResult cmd_train_proxy(const ExperimentConfig& cfg, uint64_t seed, const std::string& run_dir) {
    fs::create_directories(run_dir);
    std::string dataset = ensure_dataset(cfg);
    auto ids = list_cases(dataset);
    auto [train_ids, val_ids] = split_cases(ids, cfg.split_fraction, seed);
    write_split((fs::path(run_dir) / "split.txt").string(), train_ids, val_ids);

    std::vector<KidneyCrop> crops = build_crops(dataset, train_ids, cfg.crop_shape);
    size_t n_train_crops = crops.size();
    {
        std::vector<KidneyCrop> val_crops = build_crops(dataset, val_ids, cfg.crop_shape);
        crops.insert(crops.end(), val_crops.begin(), val_crops.end());
    }
    std::vector<KidneyCrop> train_view(crops.begin(),
                                       crops.begin() + static_cast<int64_t>(n_train_crops));
    std::vector<KidneyCrop> val_view(crops.begin() + static_cast<int64_t>(n_train_crops),
                                     crops.end());
    int64_t n_val_pairs = std::max<int64_t>(8, cfg.n_pairs / 4);
    // With a single validation case, same-side pairs are impossible; fall back
    // to opposite-side pairs only rather than failing the whole run.
    double val_fraction = cfg.same_fraction;
    {
        size_t l = 0, r = 0;
        for (const auto& c : val_view) (c.side == Side::Left ? l : r)++;
        if (l < 2 && r < 2) val_fraction = 0.0;
    }
    std::vector<PairSample> train_pairs =
        sample_pairs(train_view, cfg.n_pairs, cfg.same_fraction, mix_seed(seed, 0x70726f78ull));
    std::vector<PairSample> val_pairs =
        sample_pairs(val_view, n_val_pairs, val_fraction, mix_seed(seed, 0x76616c70ull));
    for (auto& p : val_pairs) {
        p.a += n_train_crops;
        p.b += n_train_crops;
    }
    {
        std::vector<PairSample> all = train_pairs;
        all.insert(all.end(), val_pairs.begin(), val_pairs.end());
        write_pair_manifest((fs::path(run_dir) / "pairs.tsv").string(), crops, all);
    }

    ExperimentConfig snapshot = cfg;
    snapshot.save((fs::path(run_dir) / "config.json").string());

    RunResult r;
    r.run_dir = run_dir;
    r.curve_csv = (fs::path(run_dir) / "curve.csv").string();
    std::string state_path = (fs::path(run_dir) / "last.state").string();

    TrainConfig tc = cfg.proxy_train;
    tc.seed = seed;
    TrainState init = maybe_resume(state_path, r.curve_csv, cfg.arch, "proxy");

    auto on_epoch = [&](const EpochRecord& rec, const TrainState& st) {
        write_curve_csv(r.curve_csv, st.curve, true);
        save_train_state(state_path, st, cfg.arch, "proxy");
        std::cout << "[proxy seed=" << seed << "] epoch " << rec.epoch + 1 << "/" << tc.epochs
                  << " loss=" << rec.loss_total << " val_acc=" << rec.val_metric << "\n";
    };
    r.state = train_proxy(crops, train_pairs, val_pairs, cfg.arch, tc, std::move(init), on_epoch);
    finish_run(r, cfg, "proxy", true);
    return r;
}

RunResult cmd_train_seg(const ExperimentConfig& cfg, uint64_t seed, const std::string& run_dir,
                        const std::optional<std::string>& encoder_ckpt) {
    fs::create_directories(run_dir);
    std::string dataset = ensure_dataset(cfg);
    auto ids = list_cases(dataset);
    auto [train_ids, val_ids] = split_cases(ids, cfg.split_fraction, seed);
    write_split((fs::path(run_dir) / "split.txt").string(), train_ids, val_ids);

    std::vector<SegCase> train_cases = load_seg_cases(dataset, train_ids);
    std::vector<SegCase> val_cases = load_seg_cases(dataset, val_ids);

    std::optional<ParameterStore> encoder_init;
    if (encoder_ckpt) {
        Checkpoint ck = load_checkpoint(*encoder_ckpt, cfg.arch);
        encoder_init = transfer_encoder(ck.params);
    }

    ExperimentConfig snapshot = cfg;
    snapshot.save((fs::path(run_dir) / "config.json").string());

    RunResult r;
    r.run_dir = run_dir;
    r.curve_csv = (fs::path(run_dir) / "curve.csv").string();
    std::string state_path = (fs::path(run_dir) / "last.state").string();

    TrainConfig tc = cfg.seg_train;
    tc.seed = seed;
    LossSchedule schedule = cfg.schedule;
    schedule.total_epochs = tc.epochs;
    TrainState init = maybe_resume(state_path, r.curve_csv, cfg.arch, "segmentation");

    auto on_epoch = [&](const EpochRecord& rec, const TrainState& st) {
        write_curve_csv(r.curve_csv, st.curve, false);
        save_train_state(state_path, st, cfg.arch, "segmentation");
        std::cout << "[seg seed=" << seed << (encoder_ckpt ? " pretrained" : " scratch")
                  << "] epoch " << rec.epoch + 1 << "/" << tc.epochs << " loss=" << rec.loss_total
                  << " val_dc=" << rec.val_metric << "\n";
    };
    r.state = train_segmentation(train_cases, val_cases, encoder_init, cfg.arch, tc, schedule,
                                 std::move(init), on_epoch);
    finish_run(r, cfg, "segmentation", false);
    return r;
}

// ---------------------------------------------------------------------------
// evaluate / export

EvaluationResult cmd_evaluate(const std::string& ckpt_path, const std::string& case_dir,
                              const std::optional<std::string>& report_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    if (ck.kind != "segmentation")
        throw ConfigError("evaluate: " + ckpt_path + " is not a segmentation checkpoint");
    SegNet net(ck.arch);

    EvaluationResult res;
    auto ids = list_cases(case_dir);
    for (const auto& id : ids) {
        PreprocessedCase c = load_saved_case(case_dir, id);
        if (!c.mask) throw DataError("evaluate: case " + id + " has no segmentation mask");
        SegOutput out = net.forward(ck.params, make_seg_case(id, c.volume, *c.mask).image);
        std::vector<double> probs = sigmoid(out.seg_logits.data);
        res.cases.push_back(evaluate_case(id, probs, *c.mask, c.volume.spacing, 0.5, c.pad));
    }

    double sdc = 0, shd = 0, sbl = 0;
    for (const auto& m : res.cases) {
        sdc += m.dc;
        shd += m.hd;
        sbl += m.bl;
    }
    double n = static_cast<double>(res.cases.size());
    res.mean_dc = sdc / n;
    res.mean_hd = shd / n;
    res.mean_bl = sbl / n;

    std::ostringstream tsv;
    tsv.precision(6);
    tsv << "case_id\tdc\thd_mm\tboundary_diff_pct\n";
    for (const auto& m : res.cases)
        tsv << m.case_id << "\t" << m.dc << "\t" << m.hd << "\t" << m.bl << "\n";
    tsv << "MEAN\t" << res.mean_dc << "\t" << res.mean_hd << "\t" << res.mean_bl << "\n";
    std::cout << tsv.str();
    if (report_path) {
        std::ofstream out(*report_path);
        if (!out) throw DataError("evaluate: cannot write " + *report_path);
        out << tsv.str();
    }
    return res;
}

namespace {

// Nearest-neighbor resampling of a label grid onto an explicit target shape
// (the case's original grid, reversing the preprocessing resample).
LabelMask nn_resample_to(const LabelMask& m, const std::array<int64_t, 3>& out_shape,
                         const std::array<double, 3>& out_spacing) {
    LabelMask out;
    out.shape = out_shape;
    out.spacing = out_spacing;
    out.origin = m.origin;
    out.voxels.resize(static_cast<size_t>(out.numel()));
    for (int a = 0; a < 3; ++a)
        if (out_shape[a] < 1) throw DataError("export-masks: bad original shape");
    std::array<double, 3> scale;
    for (int a = 0; a < 3; ++a)
        scale[a] = out_spacing[a] / m.spacing[a];
    for (int64_t z = 0; z < out_shape[0]; ++z)
        for (int64_t y = 0; y < out_shape[1]; ++y)
            for (int64_t x = 0; x < out_shape[2]; ++x) {
                int64_t c[3];
                int64_t idx[3] = {z, y, x};
                for (int a = 0; a < 3; ++a) {
                    double src = (static_cast<double>(idx[a]) + 0.5) * scale[a] - 0.5;
                    c[a] = std::clamp<int64_t>(static_cast<int64_t>(std::llround(src)), 0,
                                               m.shape[a] - 1);
                }
                out.at(z, y, x) = m.at(c[0], c[1], c[2]);
            }
    return out;
}

}  // namespace

void cmd_export_masks(const std::string& ckpt_path, const std::string& case_dir,
                      const std::string& out_dir) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    if (ck.kind != "segmentation")
        throw ConfigError("export-masks: " + ckpt_path + " is not a segmentation checkpoint");
    SegNet net(ck.arch);
    fs::create_directories(out_dir);

    for (const auto& id : list_cases(case_dir)) {
        PreprocessedCase c = load_saved_case(case_dir, id);
        Tensor input = as_input(c.volume.voxels, c.volume.shape);
        SegOutput out = net.forward(ck.params, input);
        std::vector<double> probs = sigmoid(out.seg_logits.data);

        LabelMask pred;
        pred.shape = c.volume.shape;
        pred.spacing = c.volume.spacing;
        pred.origin = c.volume.origin;
        pred.voxels.resize(probs.size());
        for (size_t i = 0; i < probs.size(); ++i) pred.voxels[i] = probs[i] > 0.5 ? 1 : 0;

        LabelMask native = nn_resample_to(unpad(pred, c.pad), c.original_shape, c.original_spacing);

        NiftiVolume nv;
        nv.shape = native.shape;
        nv.spacing = native.spacing;
        nv.origin = native.origin;
        nv.data.assign(native.voxels.begin(), native.voxels.end());
        std::string path = (fs::path(out_dir) / (id + "_pred.nii.gz")).string();
        write_nifti(path, nv, NiftiDType::U8);
        std::cout << id << ": wrote " << path << "\n";
    }
}

// ---------------------------------------------------------------------------
// compare

ComparisonResult cmd_compare(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    ensure_dataset(cfg);

    ComparisonResult result;
    for (uint64_t seed : cfg.seeds) {
        ComparisonSeedResult sr;
        sr.seed = seed;
        fs::path seed_dir = fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed));
        try {
            RunResult proxy = cmd_train_proxy(cfg, seed, (seed_dir / "proxy").string());
            sr.proxy_val_acc = proxy.state.best_metric;
            RunResult mws =
                cmd_train_seg(cfg, seed, (seed_dir / "mws").string(), proxy.best_ckpt);
            RunResult mwos = cmd_train_seg(cfg, seed, (seed_dir / "mwos").string(), std::nullopt);

            sr.mws_curve = mws.state.curve;
            sr.mwos_curve = mwos.state.curve;
            sr.mws_best_dc = mws.state.best_metric;
            sr.mwos_best_dc = mwos.state.best_metric;
            sr.mws_epochs_to_threshold = epochs_to_threshold(sr.mws_curve, cfg.dc_threshold);
            sr.mwos_epochs_to_threshold = epochs_to_threshold(sr.mwos_curve, cfg.dc_threshold);

            std::vector<PlotSeries> series(2);
            series[0] = {"PRETRAINED", kBlue, curve_epochs(sr.mws_curve),
                         moving_average(curve_vals(sr.mws_curve), cfg.smoothing_window)};
            series[1] = {"SCRATCH", kOrange, curve_epochs(sr.mwos_curve),
                         moving_average(curve_vals(sr.mwos_curve), cfg.smoothing_window)};
            write_line_plot((seed_dir / "dc_curves.png").string(), series,
                            "VAL DICE, SEED " + std::to_string(seed), "EPOCH", "DICE");
        } catch (const std::exception& e) {
            sr.failed = true;
            sr.error = e.what();
            std::cerr << "warning: seed " << seed << " failed: " << e.what() << "\n";
        }
        result.seeds.push_back(std::move(sr));
    }

    std::vector<double> mws_best, mwos_best;
    size_t min_epochs = std::numeric_limits<size_t>::max();
    for (const auto& s : result.seeds) {
        if (s.failed) continue;
        mws_best.push_back(s.mws_best_dc);
        mwos_best.push_back(s.mwos_best_dc);
        min_epochs = std::min({min_epochs, s.mws_curve.size(), s.mwos_curve.size()});
    }
    if (mws_best.empty()) throw DataError("compare: every seed failed");
    result.mws_median_best_dc = median(mws_best);
    result.mwos_median_best_dc = median(mwos_best);

    // Aggregate curve: mean validation DC per epoch across successful seeds.
    std::vector<double> ep, mws_mean(min_epochs, 0), mwos_mean(min_epochs, 0);
    for (size_t e = 0; e < min_epochs; ++e) {
        ep.push_back(static_cast<double>(e + 1));
        for (const auto& s : result.seeds) {
            if (s.failed) continue;
            mws_mean[e] += s.mws_curve[e].val_metric / static_cast<double>(mws_best.size());
            mwos_mean[e] += s.mwos_curve[e].val_metric / static_cast<double>(mwos_best.size());
        }
    }
    std::vector<PlotSeries> agg(2);
    agg[0] = {"PRETRAINED", kBlue, ep, moving_average(mws_mean, cfg.smoothing_window)};
    agg[1] = {"SCRATCH", kOrange, ep, moving_average(mwos_mean, cfg.smoothing_window)};
    write_line_plot((fs::path(cfg.out_dir) / "compare_aggregate.png").string(), agg,
                    "MEAN VAL DICE ACROSS SEEDS", "EPOCH", "DICE");

    std::ostringstream tsv;
    tsv.precision(6);
    tsv << "seed\tarm\tbest_dc\tbest_epoch\tepochs_to_dc" << cfg.dc_threshold
        << "\tproxy_val_acc\tstatus\n";
    for (const auto& s : result.seeds) {
        if (s.failed) {
            tsv << s.seed << "\t-\t-\t-\t-\t-\tFAILED: " << s.error << "\n";
            continue;
        }
        int mws_be = -1, mwos_be = -1;
        for (const auto& r : s.mws_curve)
            if (r.val_metric == s.mws_best_dc) {
                mws_be = r.epoch + 1;
                break;
            }
        for (const auto& r : s.mwos_curve)
            if (r.val_metric == s.mwos_best_dc) {
                mwos_be = r.epoch + 1;
                break;
            }
        tsv << s.seed << "\tpretrained\t" << s.mws_best_dc << "\t" << mws_be << "\t"
            << s.mws_epochs_to_threshold << "\t" << s.proxy_val_acc << "\tok\n";
        tsv << s.seed << "\tscratch\t" << s.mwos_best_dc << "\t" << mwos_be << "\t"
            << s.mwos_epochs_to_threshold << "\t-\tok\n";
    }
    tsv << "MEDIAN\tpretrained\t" << result.mws_median_best_dc << "\t-\t-\t-\t-\n";
    tsv << "MEDIAN\tscratch\t" << result.mwos_median_best_dc << "\t-\t-\t-\t-\n";
    result.summary_tsv = tsv.str();

    std::ofstream out(fs::path(cfg.out_dir) / "summary.tsv");
    if (!out) throw DataError("compare: cannot write summary.tsv");
    out << result.summary_tsv;
    std::cout << result.summary_tsv;
    return result;
}

}  // namespace kseg
