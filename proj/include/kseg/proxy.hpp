#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kseg/volume.hpp"

namespace kseg {

enum class Side { Left, Right };

inline uint8_t side_label(Side s) { return s == Side::Left ? 1 : 2; }
inline const char* side_name(Side s) { return s == Side::Left ? "L" : "R"; }

/// Fixed-size image crop centered on one kidney. Intensities only.
struct KidneyCrop {
    std::array<int64_t, 3> shape{};
    std::vector<double> voxels;
    Side side = Side::Left;
    std::string case_id;
};

/// Indices into a crop list plus the same-side label.
struct PairSample {
    size_t a = 0;
    size_t b = 0;
    int label = 0;  // 1 iff both crops come from the same side
};

struct CaseHalves {
    Volume left_volume;
    LabelMask left_mask;
    Volume right_volume;
    LabelMask right_mask;
};

/// Splits at floor(dims_x / 2). Errors if either kidney straddles the midline.
CaseHalves split_sagittal(const Volume& v, const LabelMask& m, const std::string& case_id);

KidneyCrop extract_crop(const Volume& v, const LabelMask& m, Side side,
                        const std::array<int64_t, 3>& crop_shape,
                        const std::string& case_id = "");

std::vector<PairSample> sample_pairs(const std::vector<KidneyCrop>& crops, int64_t n_pairs,
                                     double same_fraction, uint64_t seed);

/// Audit manifest: case_id_a, side_a, case_id_b, side_b, y (tab-separated).
void write_pair_manifest(const std::string& path, const std::vector<KidneyCrop>& crops,
                         const std::vector<PairSample>& pairs);

}  // namespace kseg
