#include "kseg/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace kseg {

using nlohmann::json;

ExperimentConfig::ExperimentConfig() {
    proxy_train.epochs = 40;
    seg_train.epochs = 60;
    schedule.total_epochs = seg_train.epochs;
}

void ExperimentConfig::validate() const {
    if (phantom && case_dir)
        throw ConfigError("config: specify either dataset.phantom or dataset.case_dir, not both");
    if (!phantom && !case_dir)
        throw ConfigError("config: a dataset source (phantom or case_dir) is required");
    if (phantom) {
        if (phantom_cases < 4) throw ConfigError("config: phantom_cases must be at least 4");
        try {
            phantom->validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: phantom: ") + e.what());
        }
    }
    try {
        arch.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: arch: ") + e.what());
    }
    for (double c : crop_shape)
        if (c < 1) throw ConfigError("config: crop_shape entries must be positive");
    if (n_pairs < 2) throw ConfigError("config: n_pairs must be at least 2");
    if (same_fraction < 0.0 || same_fraction > 1.0)
        throw ConfigError("config: same_fraction must be in [0, 1]");
    if (proxy_train.epochs < 1 || seg_train.epochs < 1)
        throw ConfigError("config: epoch counts must be positive");
    if (proxy_train.learning_rate <= 0 || seg_train.learning_rate <= 0)
        throw ConfigError("config: learning rates must be positive");
    if (proxy_train.weight_decay < 0 || seg_train.weight_decay < 0)
        throw ConfigError("config: weight decay must be non-negative");
    if (seg_train.lambda_rec < 0) throw ConfigError("config: lambda_rec must be non-negative");
    if (proxy_train.contrastive.margin <= 0) throw ConfigError("config: margin must be positive");
    if (split_fraction <= 0.0 || split_fraction >= 1.0)
        throw ConfigError("config: split_fraction must be in (0, 1)");
    if (seeds.empty()) throw ConfigError("config: at least one seed is required");
    if (out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
    if (smoothing_window < 1) throw ConfigError("config: smoothing_window must be >= 1");
    if (dc_threshold <= 0.0 || dc_threshold >= 1.0)
        throw ConfigError("config: dc_threshold must be in (0, 1)");
    if (preprocess.window_lo >= preprocess.window_hi)
        throw ConfigError("config: window_lo must be below window_hi");
    if (preprocess.pad_multiple < 1) throw ConfigError("config: pad_multiple must be positive");
    for (double s : preprocess.target_spacing)
        if (s <= 0) throw ConfigError("config: target_spacing must be positive");
}

namespace {

// Strict field extraction: unknown keys are errors so typos do not silently
// fall back to defaults.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            if (it.key() == k) known = true;
        if (!known) throw ConfigError("config: unknown key \"" + it.key() + "\" in " + where);
    }
}

template <typename T>
void get_to(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for " + where + "." + key + ": " + e.what());
    }
}

void parse_train(const json& j, const std::string& where, TrainConfig& t) {
    check_keys(j, where, {"epochs", "learning_rate", "weight_decay", "lambda_rec", "margin"});
    get_to(j, "epochs", t.epochs, where);
    get_to(j, "learning_rate", t.learning_rate, where);
    get_to(j, "weight_decay", t.weight_decay, where);
    get_to(j, "lambda_rec", t.lambda_rec, where);
    get_to(j, "margin", t.contrastive.margin, where);
}

json train_json(const TrainConfig& t, bool proxy) {
    json j{{"epochs", t.epochs},
           {"learning_rate", t.learning_rate},
           {"weight_decay", t.weight_decay}};
    if (proxy)
        j["margin"] = t.contrastive.margin;
    else
        j["lambda_rec"] = t.lambda_rec;
    return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");

    ExperimentConfig c;
    check_keys(j, "top level",
               {"dataset", "preprocess", "arch", "proxy", "seg", "schedule", "split_fraction",
                "seeds", "out_dir", "smoothing_window", "dc_threshold"});

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, "dataset", {"phantom", "case_dir", "n_cases"});
        if (d.contains("case_dir")) {
            std::string dir;
            get_to(d, "case_dir", dir, "dataset");
            c.case_dir = dir;
        }
        get_to(d, "n_cases", c.phantom_cases, "dataset");
        if (d.contains("phantom")) {
            const json& p = d.at("phantom");
            PhantomSpec s;
            check_keys(p, "dataset.phantom",
                       {"seed", "dims", "semi_axes", "size_asymmetry_ratio", "shape_jitter",
                        "position_jitter", "superior_offset", "kidney_mean", "kidney_std",
                        "background_mean", "background_std", "smoothing_radius", "spacing"});
            get_to(p, "seed", s.seed, "phantom");
            get_to(p, "dims", s.dims, "phantom");
            get_to(p, "semi_axes", s.semi_axes, "phantom");
            get_to(p, "size_asymmetry_ratio", s.size_asymmetry_ratio, "phantom");
            get_to(p, "shape_jitter", s.shape_jitter, "phantom");
            get_to(p, "position_jitter", s.position_jitter, "phantom");
            get_to(p, "superior_offset", s.superior_offset, "phantom");
            get_to(p, "kidney_mean", s.kidney_mean, "phantom");
            get_to(p, "kidney_std", s.kidney_std, "phantom");
            get_to(p, "background_mean", s.background_mean, "phantom");
            get_to(p, "background_std", s.background_std, "phantom");
            get_to(p, "smoothing_radius", s.smoothing_radius, "phantom");
            get_to(p, "spacing", s.spacing, "phantom");
            c.phantom = s;
        }
    }

    if (j.contains("preprocess")) {
        const json& p = j.at("preprocess");
        check_keys(p, "preprocess", {"target_spacing", "window_lo", "window_hi", "pad_multiple"});
        get_to(p, "target_spacing", c.preprocess.target_spacing, "preprocess");
        get_to(p, "window_lo", c.preprocess.window_lo, "preprocess");
        get_to(p, "window_hi", c.preprocess.window_hi, "preprocess");
        get_to(p, "pad_multiple", c.preprocess.pad_multiple, "preprocess");
    }

    if (j.contains("arch")) {
        const json& a = j.at("arch");
        if (a.is_string()) {
            std::string name = a.get<std::string>();
            if (name == "desk")
                c.arch = ArchitectureConfig::desk_scale();
            else if (name == "full")
                c.arch = ArchitectureConfig::full_scale();
            else if (name == "tiny")
                c.arch = ArchitectureConfig::tiny();
            else
                throw ConfigError("config: unknown arch preset \"" + name + "\"");
        } else {
            check_keys(a, "arch",
                       {"block_layers", "growth_rate", "stem_channels", "norm_groups",
                        "decoder_channels"});
            get_to(a, "block_layers", c.arch.block_layers, "arch");
            get_to(a, "growth_rate", c.arch.growth_rate, "arch");
            get_to(a, "stem_channels", c.arch.stem_channels, "arch");
            get_to(a, "norm_groups", c.arch.norm_groups, "arch");
            get_to(a, "decoder_channels", c.arch.decoder_channels, "arch");
        }
    }

    if (j.contains("proxy")) {
        const json& p = j.at("proxy");
        check_keys(p, "proxy",
                   {"crop_shape", "n_pairs", "same_fraction", "epochs", "learning_rate",
                    "weight_decay", "margin"});
        get_to(p, "crop_shape", c.crop_shape, "proxy");
        get_to(p, "n_pairs", c.n_pairs, "proxy");
        get_to(p, "same_fraction", c.same_fraction, "proxy");
        parse_train(json{{"epochs", p.value("epochs", c.proxy_train.epochs)},
                         {"learning_rate", p.value("learning_rate", c.proxy_train.learning_rate)},
                         {"weight_decay", p.value("weight_decay", c.proxy_train.weight_decay)},
                         {"margin", p.value("margin", c.proxy_train.contrastive.margin)}},
                    "proxy", c.proxy_train);
    }

    if (j.contains("seg")) parse_train(j.at("seg"), "seg", c.seg_train);

    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        check_keys(s, "schedule", {"w_bce_start", "w_dice_start", "w_bce_end", "w_dice_end"});
        get_to(s, "w_bce_start", c.schedule.w_bce_start, "schedule");
        get_to(s, "w_dice_start", c.schedule.w_dice_start, "schedule");
        get_to(s, "w_bce_end", c.schedule.w_bce_end, "schedule");
        get_to(s, "w_dice_end", c.schedule.w_dice_end, "schedule");
    }
    c.schedule.total_epochs = c.seg_train.epochs;

    get_to(j, "split_fraction", c.split_fraction, "top level");
    get_to(j, "seeds", c.seeds, "top level");
    get_to(j, "out_dir", c.out_dir, "top level");
    get_to(j, "smoothing_window", c.smoothing_window, "top level");
    get_to(j, "dc_threshold", c.dc_threshold, "top level");

    c.proxy_train.split_fraction = c.split_fraction;
    c.seg_train.split_fraction = c.split_fraction;
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    json d;
    if (case_dir) d["case_dir"] = *case_dir;
    if (phantom) {
        const PhantomSpec& s = *phantom;
        d["n_cases"] = phantom_cases;
        d["phantom"] = json{{"seed", s.seed},
                            {"dims", s.dims},
                            {"semi_axes", s.semi_axes},
                            {"size_asymmetry_ratio", s.size_asymmetry_ratio},
                            {"shape_jitter", s.shape_jitter},
                            {"position_jitter", s.position_jitter},
                            {"superior_offset", s.superior_offset},
                            {"kidney_mean", s.kidney_mean},
                            {"kidney_std", s.kidney_std},
                            {"background_mean", s.background_mean},
                            {"background_std", s.background_std},
                            {"smoothing_radius", s.smoothing_radius},
                            {"spacing", s.spacing}};
    }
    j["dataset"] = d;
    j["preprocess"] = json{{"target_spacing", preprocess.target_spacing},
                           {"window_lo", preprocess.window_lo},
                           {"window_hi", preprocess.window_hi},
                           {"pad_multiple", preprocess.pad_multiple}};
    j["arch"] = json{{"block_layers", arch.block_layers},
                     {"growth_rate", arch.growth_rate},
                     {"stem_channels", arch.stem_channels},
                     {"norm_groups", arch.norm_groups},
                     {"decoder_channels", arch.decoder_channels}};
    json p = train_json(proxy_train, true);
    p["crop_shape"] = crop_shape;
    p["n_pairs"] = n_pairs;
    p["same_fraction"] = same_fraction;
    j["proxy"] = p;
    j["seg"] = train_json(seg_train, false);
    j["schedule"] = json{{"w_bce_start", schedule.w_bce_start},
                         {"w_dice_start", schedule.w_dice_start},
                         {"w_bce_end", schedule.w_bce_end},
                         {"w_dice_end", schedule.w_dice_end}};
    j["split_fraction"] = split_fraction;
    j["seeds"] = seeds;
    j["out_dir"] = out_dir;
    j["smoothing_window"] = smoothing_window;
    j["dc_threshold"] = dc_threshold;
    return j.dump(2) + "\n";
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("config: cannot write " + path);
    out << to_json_text();
}

}  // namespace kseg
