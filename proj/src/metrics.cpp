#include "kseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kseg {

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.shape != gt.shape) throw std::runtime_error("confusion: shape mismatch");
    ConfusionCounts c;
    for (size_t i = 0; i < pred.voxels.size(); ++i) {
        bool p = pred.voxels[i] != 0, g = gt.voxels[i] != 0;
        if (p && g)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

double dice(const BinaryMask& pred, const BinaryMask& gt) {
    ConfusionCounts c = confusion(pred, gt);
    int64_t den = 2 * c.tp + c.fp + c.fn;
    if (den == 0) return 1.0;  // both empty: perfect agreement
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(den);
}

std::vector<std::array<int64_t, 3>> boundary_voxels(const BinaryMask& m) {
    std::vector<std::array<int64_t, 3>> out;
    auto [Z, Y, X] = m.shape;
    for (int64_t z = 0; z < Z; ++z)
        for (int64_t y = 0; y < Y; ++y)
            for (int64_t x = 0; x < X; ++x) {
                if (!m.at(z, y, x)) continue;
                bool boundary = z == 0 || z == Z - 1 || y == 0 || y == Y - 1 || x == 0 ||
                                x == X - 1 || !m.at(z - 1, y, x) || !m.at(z + 1, y, x) ||
                                !m.at(z, y - 1, x) || !m.at(z, y + 1, x) || !m.at(z, y, x - 1) ||
                                !m.at(z, y, x + 1);
                if (boundary) out.push_back({z, y, x});
            }
    return out;
}

namespace {

double directed_hausdorff(const std::vector<std::array<int64_t, 3>>& from,
                          const std::vector<std::array<int64_t, 3>>& to,
                          const std::array<double, 3>& sp) {
    double worst = 0;
    for (const auto& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to) {
            double dz = (static_cast<double>(p[0] - q[0])) * sp[0];
            double dy = (static_cast<double>(p[1] - q[1])) * sp[1];
            double dx = (static_cast<double>(p[2] - q[2])) * sp[2];
            double d2 = dz * dz + dy * dy + dx * dx;
            if (d2 < best) {
                best = d2;
                if (best <= worst) break;  // cannot raise the max-min
            }
        }
        if (best > worst) worst = best;
    }
    return std::sqrt(worst);
}

}  // namespace

double hausdorff(const BinaryMask& pred, const BinaryMask& gt,
                 const std::array<double, 3>& spacing) {
    if (pred.shape != gt.shape) throw std::runtime_error("hausdorff: shape mismatch");
    auto bp = boundary_voxels(pred);
    auto bg = boundary_voxels(gt);
    if (bp.empty()) throw std::runtime_error("hausdorff: prediction mask is empty");
    if (bg.empty()) throw std::runtime_error("hausdorff: ground-truth mask is empty");
    return std::max(directed_hausdorff(bp, bg, spacing), directed_hausdorff(bg, bp, spacing));
}

double boundary_length_diff(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.shape != gt.shape) throw std::runtime_error("boundary_length_diff: shape mismatch");
    auto bp = boundary_voxels(pred).size();
    auto bg = boundary_voxels(gt).size();
    if (bg == 0) throw std::runtime_error("boundary_length_diff: ground truth is empty");
    return 100.0 * std::abs(static_cast<double>(bp) - static_cast<double>(bg)) /
           static_cast<double>(bg);
}

BinaryMask binarize(const std::vector<double>& probs, const std::array<int64_t, 3>& shape,
                    double threshold) {
    BinaryMask m;
    m.shape = shape;
    m.voxels.resize(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) m.voxels[i] = probs[i] > threshold ? 1 : 0;
    return m;
}

BinaryMask foreground(const LabelMask& m) {
    BinaryMask b;
    b.shape = m.shape;
    b.voxels.resize(m.voxels.size());
    for (size_t i = 0; i < m.voxels.size(); ++i) b.voxels[i] = m.voxels[i] ? 1 : 0;
    return b;
}

MetricsReport evaluate_case(const std::string& case_id, const std::vector<double>& pred_probs,
                            const LabelMask& gt, const std::array<double, 3>& spacing,
                            double threshold, const PadRecord& pad) {
    if (pred_probs.size() != gt.voxels.size())
        throw std::runtime_error("evaluate_case: prediction/ground-truth size mismatch");

    LabelMask pred_labels;
    pred_labels.shape = gt.shape;
    pred_labels.spacing = gt.spacing;
    pred_labels.voxels.resize(pred_probs.size());
    for (size_t i = 0; i < pred_probs.size(); ++i)
        pred_labels.voxels[i] = pred_probs[i] > threshold ? 1 : 0;

    LabelMask pred_unpadded = unpad(pred_labels, pad);
    LabelMask gt_unpadded = unpad(gt, pad);

    BinaryMask p = foreground(pred_unpadded);
    BinaryMask g = foreground(gt_unpadded);

    MetricsReport r;
    r.case_id = case_id;
    r.dc = dice(p, g);
    bool p_empty = std::all_of(p.voxels.begin(), p.voxels.end(), [](uint8_t v) { return !v; });
    bool g_empty = std::all_of(g.voxels.begin(), g.voxels.end(), [](uint8_t v) { return !v; });
    r.hd = (p_empty || g_empty) ? std::numeric_limits<double>::infinity()
                                : hausdorff(p, g, spacing);
    r.bl = g_empty ? std::numeric_limits<double>::infinity() : boundary_length_diff(p, g);
    return r;
}

}  // namespace kseg
