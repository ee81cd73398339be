#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kseg/config.hpp"
#include "kseg/metrics.hpp"
#include "kseg/training.hpp"

namespace kseg {

/// Case ids found in a preprocessed-case directory (manifest order when a
/// manifest exists, otherwise sorted scan of *.kvol).
std::vector<std::string> list_cases(const std::string& dir);

/// Directory holding the dataset for this config: case_dir when given,
/// otherwise <out_dir>/data, generating phantoms there on first use.
std::string ensure_dataset(const ExperimentConfig& cfg);

std::vector<SegCase> load_seg_cases(const std::string& dir, const std::vector<std::string>& ids);

/// Both kidney crops for every case that splits cleanly; cases whose labels
/// straddle the midline are skipped with a warning.
std::vector<KidneyCrop> build_crops(const std::string& dir, const std::vector<std::string>& ids,
                                    const std::array<int64_t, 3>& crop_shape);

void write_curve_csv(const std::string& path, const TrainingCurve& curve, bool proxy);
TrainingCurve read_curve_csv(const std::string& path);

/// KiTS-layout conversion: <input>/case_XXXXX/{imaging,segmentation}.nii[.gz]
/// -> preprocessed archives in out_dir. Existing outputs are skipped.
/// Returns the number of cases written (not counting skips).
int cmd_preprocess(const std::string& input_dir, const std::string& out_dir,
                   const PreprocessConfig& cfg);

std::vector<std::string> cmd_gen_phantoms(const ExperimentConfig& cfg, const std::string& out_dir);

struct RunResult {
    TrainState state;
    std::string run_dir;
    std::string best_ckpt;
    std::string last_ckpt;
    std::string curve_csv;
};

/// Contrastive pre-training for one seed. Resumes from <run_dir>/last.state
/// when present.
RunResult cmd_train_proxy(const ExperimentConfig& cfg, uint64_t seed, const std::string& run_dir);

/// Segmentation training for one seed; encoder_ckpt (a proxy checkpoint)
/// switches the run from scratch init to transferred init.
RunResult cmd_train_seg(const ExperimentConfig& cfg, uint64_t seed, const std::string& run_dir,
                        const std::optional<std::string>& encoder_ckpt);

struct EvaluationResult {
    std::vector<MetricsReport> cases;
    double mean_dc = 0;
    double mean_hd = 0;
    double mean_bl = 0;
};

EvaluationResult cmd_evaluate(const std::string& ckpt_path, const std::string& case_dir,
                              const std::optional<std::string>& report_path);

void cmd_export_masks(const std::string& ckpt_path, const std::string& case_dir,
                      const std::string& out_dir);

struct ComparisonSeedResult {
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
    double proxy_val_acc = 0;
    TrainingCurve mws_curve;
    TrainingCurve mwos_curve;
    double mws_best_dc = 0;
    double mwos_best_dc = 0;
    int mws_epochs_to_threshold = -1;  // 1-based epoch count, -1 = never reached
    int mwos_epochs_to_threshold = -1;
};

struct ComparisonResult {
    std::vector<ComparisonSeedResult> seeds;
    double mws_median_best_dc = 0;
    double mwos_median_best_dc = 0;
    std::string summary_tsv;
};

/// Paired pretrain-vs-scratch study over cfg.seeds. Each arm pair shares the
/// seed, split, and non-encoder initialization. Per-seed failures are
/// recorded and do not abort the remaining seeds.
ComparisonResult cmd_compare(const ExperimentConfig& cfg);

}  // namespace kseg
