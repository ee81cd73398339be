#include "kseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kseg {

double contrastive_loss(const std::vector<double>& a, const std::vector<double>& b, int y,
                        const ContrastiveConfig& cfg, std::vector<double>* grad_a,
                        std::vector<double>* grad_b) {
    if (a.size() != b.size()) throw std::runtime_error("contrastive_loss: embedding length mismatch");
    if (y != 0 && y != 1) throw std::runtime_error("contrastive_loss: label must be 0 or 1");
    if (!(cfg.margin > 0)) throw std::runtime_error("contrastive_loss: margin must be positive");
    double d2 = 0;
    for (size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    double d = std::sqrt(d2);

    double loss;
    double coeff;  // dL/d(a-b) = coeff * (a - b)
    if (y == 1) {
        loss = d2;
        coeff = 2.0;
    } else if (d >= cfg.margin) {
        loss = 0.0;
        coeff = 0.0;
    } else {
        double gap = cfg.margin - d;
        loss = gap * gap;
        coeff = d > 0 ? -2.0 * gap / d : 0.0;  // subgradient 0 at d = 0
    }
    if (grad_a) {
        grad_a->resize(a.size());
        grad_b->resize(a.size());
        for (size_t i = 0; i < a.size(); ++i) {
            double g = coeff * (a[i] - b[i]);
            (*grad_a)[i] = g;
            (*grad_b)[i] = -g;
        }
    }
    return loss;
}

double soft_dice_loss(const std::vector<double>& probs, const std::vector<uint8_t>& target,
                      double eps, std::vector<double>* grad_probs) {
    if (probs.size() != target.size()) throw std::runtime_error("soft_dice_loss: shape mismatch");
    double inter = 0, psum = 0, gsum = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        double p = probs[i];
        if (p < 0.0 || p > 1.0) throw std::runtime_error("soft_dice_loss: probs outside [0,1]");
        double g = target[i] ? 1.0 : 0.0;
        inter += p * g;
        psum += p;
        gsum += g;
    }
    double num = 2.0 * inter + eps;
    double den = psum + gsum + eps;
    if (grad_probs) {
        grad_probs->resize(probs.size());
        double inv_den2 = 1.0 / (den * den);
        for (size_t i = 0; i < probs.size(); ++i) {
            double g = target[i] ? 1.0 : 0.0;
            (*grad_probs)[i] = -(2.0 * g * den - num) * inv_den2;
        }
    }
    return 1.0 - num / den;
}

double weighted_bce(const std::vector<double>& probs, const std::vector<uint8_t>& target,
                    double fg_weight, std::vector<double>* grad_probs) {
    if (probs.size() != target.size()) throw std::runtime_error("weighted_bce: shape mismatch");
    if (!(fg_weight > 0)) throw std::runtime_error("weighted_bce: fg_weight must be positive");
    constexpr double clamp = 1e-7;
    double inv_n = 1.0 / static_cast<double>(probs.size());
    double loss = 0;
    if (grad_probs) grad_probs->assign(probs.size(), 0.0);
    for (size_t i = 0; i < probs.size(); ++i) {
        double p = std::clamp(probs[i], clamp, 1.0 - clamp);
        if (target[i]) {
            loss -= fg_weight * std::log(p);
            if (grad_probs && probs[i] > clamp && probs[i] < 1.0 - clamp)
                (*grad_probs)[i] = -fg_weight / p * inv_n;
        } else {
            loss -= std::log(1.0 - p);
            if (grad_probs && probs[i] > clamp && probs[i] < 1.0 - clamp)
                (*grad_probs)[i] = 1.0 / (1.0 - p) * inv_n;
        }
    }
    return loss * inv_n;
}

double default_fg_weight(const std::vector<uint8_t>& target) {
    size_t fg = 0;
    for (uint8_t v : target) fg += v ? 1 : 0;
    if (fg == 0) return 100.0;
    double w = static_cast<double>(target.size()) / static_cast<double>(fg);
    return std::clamp(w, 1.0, 100.0);
}

std::pair<double, double> schedule_weights(int epoch, const LossSchedule& s) {
    if (s.total_epochs < 1) throw std::runtime_error("schedule: total_epochs must be >= 1");
    if (epoch < 0 || epoch >= s.total_epochs)
        throw std::runtime_error("schedule: epoch out of range");
    double t = s.total_epochs == 1
                   ? 0.0
                   : static_cast<double>(epoch) / static_cast<double>(s.total_epochs - 1);
    double w_bce = s.w_bce_start + t * (s.w_bce_end - s.w_bce_start);
    // w_dice moves by the same amount in the opposite direction, so the pair
    // sums to exactly 1.
    double w_dice = 1.0 - w_bce;
    return {w_bce, w_dice};
}

SegLossBreakdown composite_seg_loss(const std::vector<double>& probs,
                                    const std::vector<uint8_t>& target,
                                    const std::vector<double>& recon,
                                    const std::vector<double>& input_volume, int epoch,
                                    const LossSchedule& schedule, double lambda_rec,
                                    double fg_weight, std::vector<double>* grad_probs,
                                    std::vector<double>* grad_recon) {
    if (recon.size() != input_volume.size())
        throw std::runtime_error("composite_seg_loss: recon/input shape mismatch");
    auto [w_bce, w_dice] = schedule_weights(epoch, schedule);
    SegLossBreakdown out;
    out.w_bce = w_bce;
    out.w_dice = w_dice;

    std::vector<double> g_bce, g_dice;
    out.bce = weighted_bce(probs, target, fg_weight, grad_probs ? &g_bce : nullptr);
    out.dice = soft_dice_loss(probs, target, 1e-5, grad_probs ? &g_dice : nullptr);

    double inv_n = 1.0 / static_cast<double>(recon.size());
    double mse = 0;
    for (size_t i = 0; i < recon.size(); ++i) {
        double d = recon[i] - input_volume[i];
        mse += d * d;
    }
    out.recon = mse * inv_n;
    out.total = w_bce * out.bce + w_dice * out.dice + lambda_rec * out.recon;

    if (grad_probs) {
        grad_probs->resize(probs.size());
        for (size_t i = 0; i < probs.size(); ++i)
            (*grad_probs)[i] = w_bce * g_bce[i] + w_dice * g_dice[i];
    }
    if (grad_recon) {
        grad_recon->resize(recon.size());
        for (size_t i = 0; i < recon.size(); ++i)
            (*grad_recon)[i] = lambda_rec * 2.0 * (recon[i] - input_volume[i]) * inv_n;
    }
    return out;
}

}  // namespace kseg
