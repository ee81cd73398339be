// kseg: phantom generation, preprocessing, contrastive pre-training,
// segmentation training, evaluation, and the pretrain-vs-scratch comparison,
// all driven by one JSON config.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kseg/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

kseg::ExperimentConfig load_config(const std::string& path) {
    return kseg::ExperimentConfig::load(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised kidney segmentation pipeline"};
    app.require_subcommand(1);

    std::string device = "cpu";
    app.add_option("--device", device, "Compute device (only \"cpu\" is available)");

    std::string config_path, out_dir, input_dir, cases_dir, ckpt_path, report_path, encoder_ckpt;
    std::optional<uint64_t> seed;

    auto* gen = app.add_subcommand("gen-phantoms", "Generate the synthetic phantom dataset");
    gen->add_option("--config", config_path, "Experiment config (JSON)")->required();
    gen->add_option("--out", out_dir, "Output directory (default: <out_dir>/data)");

    auto* pre = app.add_subcommand("preprocess", "Convert raw NIfTI cases to training archives");
    pre->add_option("--input", input_dir, "Directory of case_XXXXX subdirectories")->required();
    pre->add_option("--out", out_dir, "Output directory")->required();
    pre->add_option("--config", config_path, "Experiment config for preprocessing parameters");

    auto* tp = app.add_subcommand("train-proxy", "Contrastive side-discrimination pre-training");
    tp->add_option("--config", config_path, "Experiment config (JSON)")->required();
    tp->add_option("--seed", seed, "Override the run seed (default: first config seed)");
    tp->add_option("--out", out_dir, "Run directory (default: <out_dir>/proxy_seed_<s>)");

    auto* ts = app.add_subcommand("train-seg", "Segmentation training");
    ts->add_option("--config", config_path, "Experiment config (JSON)")->required();
    ts->add_option("--seed", seed, "Override the run seed (default: first config seed)");
    ts->add_option("--out", out_dir, "Run directory (default: <out_dir>/seg_seed_<s>)");
    ts->add_option("--encoder", encoder_ckpt,
                   "Proxy checkpoint whose encoder initializes the network");

    auto* ev = app.add_subcommand("evaluate", "Compute DC / HD / boundary metrics on a case set");
    ev->add_option("--checkpoint", ckpt_path, "Segmentation checkpoint")->required();
    ev->add_option("--cases", cases_dir, "Preprocessed case directory")->required();
    ev->add_option("--report", report_path, "Write the metrics table to this TSV file");

    auto* cp = app.add_subcommand("compare", "Paired pretrained-vs-scratch study over all seeds");
    cp->add_option("--config", config_path, "Experiment config (JSON)")->required();
    cp->add_option("--out", out_dir, "Override the config out_dir");

    auto* ex = app.add_subcommand("export-masks", "Write predictions as NIfTI on original grids");
    ex->add_option("--checkpoint", ckpt_path, "Segmentation checkpoint")->required();
    ex->add_option("--cases", cases_dir, "Preprocessed case directory")->required();
    ex->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (device != "cpu") throw kseg::ConfigError("unknown device \"" + device + "\"");

        if (gen->parsed()) {
            kseg::ExperimentConfig cfg = load_config(config_path);
            std::string dir = out_dir.empty() ? cfg.out_dir + "/data" : out_dir;
            auto ids = kseg::cmd_gen_phantoms(cfg, dir);
            std::cout << "wrote " << ids.size() << " cases to " << dir << "\n";
        } else if (pre->parsed()) {
            kseg::PreprocessConfig pc;
            if (!config_path.empty()) pc = load_config(config_path).preprocess;
            int n = kseg::cmd_preprocess(input_dir, out_dir, pc);
            std::cout << "preprocessed " << n << " cases into " << out_dir << "\n";
        } else if (tp->parsed()) {
            kseg::ExperimentConfig cfg = load_config(config_path);
            uint64_t s = seed.value_or(cfg.seeds.front());
            std::string dir =
                out_dir.empty() ? cfg.out_dir + "/proxy_seed_" + std::to_string(s) : out_dir;
            auto run = kseg::cmd_train_proxy(cfg, s, dir);
            std::cout << "best val_acc " << run.state.best_metric << " at epoch "
                      << run.state.best_epoch + 1 << "; checkpoint " << run.best_ckpt << "\n";
        } else if (ts->parsed()) {
            kseg::ExperimentConfig cfg = load_config(config_path);
            uint64_t s = seed.value_or(cfg.seeds.front());
            std::string dir =
                out_dir.empty() ? cfg.out_dir + "/seg_seed_" + std::to_string(s) : out_dir;
            std::optional<std::string> enc;
            if (!encoder_ckpt.empty()) enc = encoder_ckpt;
            auto run = kseg::cmd_train_seg(cfg, s, dir, enc);
            std::cout << "best val_dc " << run.state.best_metric << " at epoch "
                      << run.state.best_epoch + 1 << "; checkpoint " << run.best_ckpt << "\n";
        } else if (ev->parsed()) {
            std::optional<std::string> report;
            if (!report_path.empty()) report = report_path;
            kseg::cmd_evaluate(ckpt_path, cases_dir, report);
        } else if (cp->parsed()) {
            kseg::ExperimentConfig cfg = load_config(config_path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            kseg::cmd_compare(cfg);
        } else if (ex->parsed()) {
            kseg::cmd_export_masks(ckpt_path, cases_dir, out_dir);
        }
    } catch (const kseg::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const kseg::TrainingDivergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
