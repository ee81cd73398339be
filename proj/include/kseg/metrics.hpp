#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kseg/volume.hpp"

namespace kseg {

/// Binary mask on a 3D grid (foreground = nonzero).
struct BinaryMask {
    std::array<int64_t, 3> shape{};
    std::vector<uint8_t> voxels;

    uint8_t at(int64_t z, int64_t y, int64_t x) const {
        return voxels[static_cast<size_t>((z * shape[1] + y) * shape[2] + x)];
    }
};

struct ConfusionCounts {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    int64_t total() const { return tp + fp + fn + tn; }
};

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt);

/// 2TP / (2TP + FP + FN); 1.0 when both masks are empty, 0.0 when exactly
/// one is.
double dice(const BinaryMask& pred, const BinaryMask& gt);

/// Boundary voxel: foreground with at least one of its 6 face neighbors
/// background (volume faces count as background). Returns voxel-center
/// coordinates.
std::vector<std::array<int64_t, 3>> boundary_voxels(const BinaryMask& m);

/// Exact symmetric Hausdorff distance between boundary point sets, in mm.
double hausdorff(const BinaryMask& pred, const BinaryMask& gt,
                 const std::array<double, 3>& spacing);

/// 100 * |B(pred) - B(gt)| / B(gt), boundary voxel counts.
double boundary_length_diff(const BinaryMask& pred, const BinaryMask& gt);

struct MetricsReport {
    std::string case_id;
    double dc = 0;
    double hd = 0;  // mm
    double bl = 0;  // percent
};

/// Binarizes probabilities at the threshold, strips padding from both the
/// prediction and the ground truth, and computes all three metrics.
MetricsReport evaluate_case(const std::string& case_id, const std::vector<double>& pred_probs,
                            const LabelMask& gt, const std::array<double, 3>& spacing,
                            double threshold, const PadRecord& pad);

BinaryMask binarize(const std::vector<double>& probs, const std::array<int64_t, 3>& shape,
                    double threshold);
BinaryMask foreground(const LabelMask& m);

}  // namespace kseg
