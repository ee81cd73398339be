#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kseg/losses.hpp"
#include "kseg/model.hpp"
#include "kseg/optim.hpp"
#include "kseg/proxy.hpp"

namespace kseg {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-2;
    int epochs = 40;
    uint64_t seed = 0;
    double split_fraction = 0.8;
    double lambda_rec = 0.1;
    ContrastiveConfig contrastive;

    AdamConfig adam() const {
        AdamConfig a;
        a.lr = learning_rate;
        a.weight_decay = weight_decay;
        return a;
    }
};

/// Raised when a training step produces a non-finite loss.
struct TrainingDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EpochRecord {
    int epoch = 0;
    double loss_total = 0;
    double loss_bce = 0;
    double loss_dice = 0;
    double loss_recon = 0;
    double w_bce = 0;
    double w_dice = 0;
    double val_metric = 0;  // pair accuracy (proxy) or mean DC (segmentation)
    double seconds = 0;
};
using TrainingCurve = std::vector<EpochRecord>;

/// Mutable training state; doubles as the resume handle.
struct TrainState {
    ParameterStore params;
    Adam adam;
    TrainingCurve curve;
    ParameterStore best;
    double best_metric = -1.0;
    int best_epoch = -1;
    int next_epoch = 0;

    bool fresh() const { return params.empty(); }
};

using EpochCallback = std::function<void(const EpochRecord&, const TrainState&)>;

std::pair<std::vector<std::string>, std::vector<std::string>> split_cases(
    const std::vector<std::string>& case_ids, double fraction, uint64_t seed);

/// Siamese contrastive training over crop pairs, batch size 1. Validation
/// metric: pair accuracy with decision boundary d < margin/2.
TrainState train_proxy(const std::vector<KidneyCrop>& crops,
                       const std::vector<PairSample>& train_pairs,
                       const std::vector<PairSample>& val_pairs, const ArchitectureConfig& arch,
                       const TrainConfig& cfg, TrainState state = {},
                       const EpochCallback& on_epoch = nullptr);

/// Encoder-prefixed subset of a proxy checkpoint, values bit-identical.
ParameterStore transfer_encoder(const ParameterStore& siamese_ckpt);

struct SegCase {
    std::string id;
    Tensor image;                 // [1, D, H, W], preprocessed
    std::vector<uint8_t> target;  // binary foreground
};

/// Composite-loss segmentation training, batch size 1. Validation metric:
/// mean DC at threshold 0.5. encoder_init transfers pre-trained encoder
/// weights; all other parameters stay at their seeded random init.
TrainState train_segmentation(const std::vector<SegCase>& train_cases,
                              const std::vector<SegCase>& val_cases,
                              const std::optional<ParameterStore>& encoder_init,
                              const ArchitectureConfig& arch, const TrainConfig& cfg,
                              const LossSchedule& schedule, TrainState state = {},
                              const EpochCallback& on_epoch = nullptr);

struct Checkpoint {
    ParameterStore params;
    ArchitectureConfig arch;
    std::string kind;  // "proxy" | "segmentation"
};

void save_checkpoint(const std::string& path, const ParameterStore& params,
                     const ArchitectureConfig& arch, const std::string& kind);
Checkpoint load_checkpoint(const std::string& path);
/// Errors when the stored architecture differs from the expected one.
Checkpoint load_checkpoint(const std::string& path, const ArchitectureConfig& expected);

/// Full training state including optimizer moments, for resume.
void save_train_state(const std::string& path, const TrainState& state,
                      const ArchitectureConfig& arch, const std::string& kind);
TrainState load_train_state(const std::string& path, const ArchitectureConfig& expected,
                            const std::string& kind);

std::vector<double> sigmoid(const std::vector<double>& logits);

SegCase make_seg_case(const std::string& id, const Volume& v, const LabelMask& m);

}  // namespace kseg
