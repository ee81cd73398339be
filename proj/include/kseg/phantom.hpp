#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kseg/volume.hpp"

namespace kseg {

/// Deterministic synthetic abdomen: smoothed noise background plus two
/// ellipsoidal "kidneys" that differ in size, shape, and vertical position.
struct PhantomSpec {
    uint64_t seed = 0;
    std::array<int64_t, 3> dims{64, 128, 128};            // z, y, x
    std::array<double, 3> semi_axes{8.0, 12.0, 12.0};     // right kidney, voxels
    double size_asymmetry_ratio = 1.15;                   // left axes scaled up
    double shape_jitter = 0.06;    // relative per-axis, per-side perturbation
    double position_jitter = 3.0;  // voxels
    double superior_offset = 4.0;  // left kidney placed this much higher (smaller z)
    double kidney_mean = 120.0;
    double kidney_std = 15.0;
    double background_mean = 0.0;
    double background_std = 40.0;
    int smoothing_radius = 1;
    std::array<double, 3> spacing{3.22, 1.62, 1.62};

    void validate() const;
};

std::pair<Volume, LabelMask> generate_case(const PhantomSpec& spec, int64_t case_index);

/// Writes n cases in the preprocessed-case archive format (no preprocessing
/// applied; phantoms are generated at target spacing) plus manifest.tsv.
/// Returns the case ids.
std::vector<std::string> generate_dataset(const PhantomSpec& spec, int64_t n_cases,
                                          const std::string& out_dir);

/// 6-connected component count for one label value (validation helper).
int64_t connected_components(const LabelMask& m, uint8_t label);

}  // namespace kseg
