#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace kseg {

/// A 3D scalar volume read from (or written to) a NIfTI-1 file, already
/// reordered to the internal canonical (z, y, x) axis order.
struct NiftiVolume {
    std::array<int64_t, 3> shape{};    // z, y, x
    std::array<double, 3> spacing{};   // dz, dy, dx in mm
    std::array<double, 3> origin{};    // world translation, (z, y, x)
    std::vector<double> data;          // row-major, x fastest
};

/// Reads .nii or .nii.gz. Supported datatypes: u8, i16, u16, i32, f32, f64.
/// Applies scl_slope/scl_inter and header-driven axis canonicalization.
NiftiVolume read_nifti(const std::string& path);

enum class NiftiDType { U8, F32 };

/// Writes a canonical-order volume with a diagonal sform. Gzip-compresses
/// when the path ends in ".gz".
void write_nifti(const std::string& path, const NiftiVolume& v, NiftiDType dtype);

}  // namespace kseg
