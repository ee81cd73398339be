#pragma once

#include <cstdint>
#include <vector>

#include "kseg/tensor.hpp"

namespace kseg {

struct ContrastiveConfig {
    double margin = 1.0;
};

/// y*d^2 + (1-y)*max(0, m-d)^2 with d the Euclidean embedding distance.
/// Optional analytic gradients w.r.t. both embeddings.
double contrastive_loss(const std::vector<double>& a, const std::vector<double>& b, int y,
                        const ContrastiveConfig& cfg, std::vector<double>* grad_a = nullptr,
                        std::vector<double>* grad_b = nullptr);

/// 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps), in [0, 1].
double soft_dice_loss(const std::vector<double>& probs, const std::vector<uint8_t>& target,
                      double eps = 1e-5, std::vector<double>* grad_probs = nullptr);

/// Mean over voxels of -[w*g*log(p) + (1-g)*log(1-p)], p clamped at 1e-7.
double weighted_bce(const std::vector<double>& probs, const std::vector<uint8_t>& target,
                    double fg_weight, std::vector<double>* grad_probs = nullptr);

/// Inverse foreground frequency of a target mask, clamped to [1, 100].
double default_fg_weight(const std::vector<uint8_t>& target);

struct LossSchedule {
    double w_bce_start = 0.6;
    double w_dice_start = 0.4;
    double w_bce_end = 0.4;
    double w_dice_end = 0.6;
    int total_epochs = 1;
};

/// Linear interpolation from start to end weights; the pair always sums to 1.
std::pair<double, double> schedule_weights(int epoch, const LossSchedule& s);

struct SegLossBreakdown {
    double total = 0;
    double bce = 0;
    double dice = 0;
    double recon = 0;
    double w_bce = 0;
    double w_dice = 0;
};

/// w_bce(e)*BCE + w_dice(e)*dice + lambda_rec * MSE(recon, input).
SegLossBreakdown composite_seg_loss(const std::vector<double>& probs,
                                    const std::vector<uint8_t>& target,
                                    const std::vector<double>& recon,
                                    const std::vector<double>& input_volume, int epoch,
                                    const LossSchedule& schedule, double lambda_rec,
                                    double fg_weight,
                                    std::vector<double>* grad_probs = nullptr,
                                    std::vector<double>* grad_recon = nullptr);

}  // namespace kseg
