#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kseg/tensor.hpp"

namespace kseg {

/// 3D scalar grid with physical voxel spacing. Axis order is (z, y, x).
struct Volume {
    std::array<int64_t, 3> shape{};
    std::vector<double> voxels;
    std::array<double, 3> spacing{3.22, 1.62, 1.62};
    std::array<double, 3> origin{0, 0, 0};

    int64_t numel() const { return shape[0] * shape[1] * shape[2]; }
    double& at(int64_t z, int64_t y, int64_t x) {
        return voxels[static_cast<size_t>((z * shape[1] + y) * shape[2] + x)];
    }
    double at(int64_t z, int64_t y, int64_t x) const {
        return voxels[static_cast<size_t>((z * shape[1] + y) * shape[2] + x)];
    }
    void validate() const;
};

/// Integer labels aligned to a Volume. 0 background, 1 left kidney, 2 right.
struct LabelMask {
    std::array<int64_t, 3> shape{};
    std::vector<uint8_t> voxels;
    std::array<double, 3> spacing{3.22, 1.62, 1.62};
    std::array<double, 3> origin{0, 0, 0};

    int64_t numel() const { return shape[0] * shape[1] * shape[2]; }
    uint8_t& at(int64_t z, int64_t y, int64_t x) {
        return voxels[static_cast<size_t>((z * shape[1] + y) * shape[2] + x)];
    }
    uint8_t at(int64_t z, int64_t y, int64_t x) const {
        return voxels[static_cast<size_t>((z * shape[1] + y) * shape[2] + x)];
    }
    void validate() const;
};

/// Zero-padding applied per axis; inverts pad_to_multiple exactly.
struct PadRecord {
    std::array<int64_t, 3> lo{0, 0, 0};
    std::array<int64_t, 3> hi{0, 0, 0};
};

struct PreprocessConfig {
    std::array<double, 3> target_spacing{3.22, 1.62, 1.62};
    double window_lo = -80.0;
    double window_hi = 300.0;
    int64_t pad_multiple = 16;
};

std::pair<Volume, std::optional<LabelMask>> load_case(const std::string& image_path,
                                                      const std::optional<std::string>& mask_path);

std::pair<Volume, std::optional<LabelMask>> resample(const Volume& v,
                                                     const std::optional<LabelMask>& m,
                                                     const std::array<double, 3>& target_spacing);

Volume window_clip(const Volume& v, double lo = -80.0, double hi = 300.0);

Volume normalize(const Volume& v);

struct PaddedCase {
    Volume volume;
    std::optional<LabelMask> mask;
    PadRecord pad;
};
PaddedCase pad_to_multiple(const Volume& v, const std::optional<LabelMask>& m,
                           int64_t multiple = 16);

Volume unpad(const Volume& v, const PadRecord& pad);
LabelMask unpad(const LabelMask& m, const PadRecord& pad);

struct PreprocessedCase {
    Volume volume;
    std::optional<LabelMask> mask;
    PadRecord pad;
    std::array<int64_t, 3> original_shape{};
    std::array<double, 3> original_spacing{};
};
PreprocessedCase preprocess_case(const std::string& image_path,
                                 const std::optional<std::string>& mask_path,
                                 const PreprocessConfig& cfg);

/// Persists a preprocessed case as an array archive (<stem>.kvol) plus a
/// human-readable sidecar (<stem>.meta).
void save_case(const std::string& dir, const std::string& case_id, const PreprocessedCase& c);
PreprocessedCase load_saved_case(const std::string& dir, const std::string& case_id);
bool saved_case_exists(const std::string& dir, const std::string& case_id);

}  // namespace kseg
