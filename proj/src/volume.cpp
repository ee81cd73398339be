#include "kseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "kseg/archive.hpp"
#include "kseg/nifti.hpp"

namespace kseg {

namespace fs = std::filesystem;

void Volume::validate() const {
    for (double s : spacing)
        if (!(s > 0)) throw std::runtime_error("volume: spacing must be strictly positive");
    for (int64_t d : shape)
        if (d < 1) throw std::runtime_error("volume: dimensions must be >= 1");
    if (static_cast<int64_t>(voxels.size()) != numel())
        throw std::runtime_error("volume: voxel count does not match shape");
}

void LabelMask::validate() const {
    for (int64_t d : shape)
        if (d < 1) throw std::runtime_error("mask: dimensions must be >= 1");
    if (static_cast<int64_t>(voxels.size()) != numel())
        throw std::runtime_error("mask: voxel count does not match shape");
    for (uint8_t v : voxels)
        if (v > 2) throw std::runtime_error("mask: unexpected label value " + std::to_string(v));
}

std::pair<Volume, std::optional<LabelMask>> load_case(
    const std::string& image_path, const std::optional<std::string>& mask_path) {
    if (!fs::exists(image_path)) throw std::runtime_error("load_case: missing file " + image_path);
    NiftiVolume img = read_nifti(image_path);
    Volume v;
    v.shape = img.shape;
    v.spacing = img.spacing;
    v.origin = img.origin;
    v.voxels = std::move(img.data);
    v.validate();

    std::optional<LabelMask> mask;
    if (mask_path) {
        if (!fs::exists(*mask_path)) throw std::runtime_error("load_case: missing file " + *mask_path);
        NiftiVolume seg = read_nifti(*mask_path);
        if (seg.shape != v.shape)
            throw std::runtime_error("load_case: image/mask shape mismatch: " +
                                     shape_str({v.shape[0], v.shape[1], v.shape[2]}) + " vs " +
                                     shape_str({seg.shape[0], seg.shape[1], seg.shape[2]}));
        LabelMask m;
        m.shape = seg.shape;
        m.spacing = v.spacing;
        m.origin = v.origin;
        m.voxels.resize(seg.data.size());
        for (size_t i = 0; i < seg.data.size(); ++i) {
            double val = std::round(seg.data[i]);
            if (val < 0 || val > 2)
                throw std::runtime_error("load_case: unexpected label value " +
                                         std::to_string(val) + " in " + *mask_path);
            m.voxels[i] = static_cast<uint8_t>(val);
        }
        mask = std::move(m);
    }
    return {std::move(v), std::move(mask)};
}

namespace {

// Voxel-center aligned source coordinate for output index i.
inline double src_coord(int64_t i, double out_sp, double in_sp) {
    return (static_cast<double>(i) + 0.5) * out_sp / in_sp - 0.5;
}

}  // namespace

std::pair<Volume, std::optional<LabelMask>> resample(const Volume& v,
                                                     const std::optional<LabelMask>& m,
                                                     const std::array<double, 3>& target) {
    for (double s : target)
        if (!(s > 0)) throw std::runtime_error("resample: target spacing must be positive");
    v.validate();
    if (m) {
        if (m->shape != v.shape) throw std::runtime_error("resample: mask shape mismatch");
        m->validate();
    }

    if (v.spacing == target) {
        auto out = std::make_pair(v, m);
        return out;
    }

    std::array<int64_t, 3> out_shape{};
    for (int a = 0; a < 3; ++a) {
        out_shape[a] = static_cast<int64_t>(
            std::llround(static_cast<double>(v.shape[a]) * v.spacing[a] / target[a]));
        if (out_shape[a] < 1)
            throw std::runtime_error("resample: degenerate output shape on axis " + std::to_string(a));
    }

    Volume out;
    out.shape = out_shape;
    out.spacing = target;
    out.origin = v.origin;
    out.voxels.resize(static_cast<size_t>(out.numel()));

    auto clampi = [](int64_t i, int64_t n) { return std::clamp<int64_t>(i, 0, n - 1); };

    for (int64_t z = 0; z < out_shape[0]; ++z) {
        double fz = src_coord(z, target[0], v.spacing[0]);
        int64_t z0 = static_cast<int64_t>(std::floor(fz));
        double tz = fz - static_cast<double>(z0);
        int64_t z0c = clampi(z0, v.shape[0]), z1c = clampi(z0 + 1, v.shape[0]);
        for (int64_t y = 0; y < out_shape[1]; ++y) {
            double fy = src_coord(y, target[1], v.spacing[1]);
            int64_t y0 = static_cast<int64_t>(std::floor(fy));
            double ty = fy - static_cast<double>(y0);
            int64_t y0c = clampi(y0, v.shape[1]), y1c = clampi(y0 + 1, v.shape[1]);
            for (int64_t x = 0; x < out_shape[2]; ++x) {
                double fx = src_coord(x, target[2], v.spacing[2]);
                int64_t x0 = static_cast<int64_t>(std::floor(fx));
                double tx = fx - static_cast<double>(x0);
                int64_t x0c = clampi(x0, v.shape[2]), x1c = clampi(x0 + 1, v.shape[2]);

                double c000 = v.at(z0c, y0c, x0c), c001 = v.at(z0c, y0c, x1c);
                double c010 = v.at(z0c, y1c, x0c), c011 = v.at(z0c, y1c, x1c);
                double c100 = v.at(z1c, y0c, x0c), c101 = v.at(z1c, y0c, x1c);
                double c110 = v.at(z1c, y1c, x0c), c111 = v.at(z1c, y1c, x1c);
                double c00 = c000 + tx * (c001 - c000);
                double c01 = c010 + tx * (c011 - c010);
                double c10 = c100 + tx * (c101 - c100);
                double c11 = c110 + tx * (c111 - c110);
                double c0 = c00 + ty * (c01 - c00);
                double c1 = c10 + ty * (c11 - c10);
                out.at(z, y, x) = c0 + tz * (c1 - c0);
            }
        }
    }

    std::optional<LabelMask> out_mask;
    if (m) {
        LabelMask om;
        om.shape = out_shape;
        om.spacing = target;
        om.origin = m->origin;
        om.voxels.resize(static_cast<size_t>(out.numel()));
        for (int64_t z = 0; z < out_shape[0]; ++z) {
            int64_t zs = clampi(static_cast<int64_t>(std::llround(src_coord(z, target[0], v.spacing[0]))),
                                v.shape[0]);
            for (int64_t y = 0; y < out_shape[1]; ++y) {
                int64_t ys = clampi(
                    static_cast<int64_t>(std::llround(src_coord(y, target[1], v.spacing[1]))),
                    v.shape[1]);
                for (int64_t x = 0; x < out_shape[2]; ++x) {
                    int64_t xs = clampi(
                        static_cast<int64_t>(std::llround(src_coord(x, target[2], v.spacing[2]))),
                        v.shape[2]);
                    om.at(z, y, x) = m->at(zs, ys, xs);
                }
            }
        }
        out_mask = std::move(om);
    }
    return {std::move(out), std::move(out_mask)};
}

Volume window_clip(const Volume& v, double lo, double hi) {
    if (!(lo < hi)) throw std::runtime_error("window_clip: lo must be < hi");
    Volume out = v;
    for (auto& x : out.voxels) x = std::min(hi, std::max(lo, x));
    return out;
}

Volume normalize(const Volume& v) {
    if (v.numel() <= 1) throw std::runtime_error("normalize: volume must have > 1 voxel");
    double mean = 0;
    for (double x : v.voxels) mean += x;
    mean /= static_cast<double>(v.voxels.size());
    double var = 0;
    for (double x : v.voxels) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.voxels.size());
    double sd = std::sqrt(var);
    if (sd == 0.0) throw std::runtime_error("normalize: constant volume (zero standard deviation)");
    Volume out = v;
    for (auto& x : out.voxels) x = (x - mean) / sd;
    return out;
}

PaddedCase pad_to_multiple(const Volume& v, const std::optional<LabelMask>& m, int64_t multiple) {
    if (multiple < 1) throw std::runtime_error("pad_to_multiple: multiple must be >= 1");
    v.validate();
    PaddedCase out;
    std::array<int64_t, 3> padded{};
    for (int a = 0; a < 3; ++a) {
        padded[a] = ((v.shape[a] + multiple - 1) / multiple) * multiple;
        int64_t total = padded[a] - v.shape[a];
        out.pad.lo[a] = total / 2;
        out.pad.hi[a] = total - total / 2;  // extra voxel on the high side
    }
    out.volume.shape = padded;
    out.volume.spacing = v.spacing;
    out.volume.origin = v.origin;
    out.volume.voxels.assign(static_cast<size_t>(out.volume.numel()), 0.0);
    for (int64_t z = 0; z < v.shape[0]; ++z)
        for (int64_t y = 0; y < v.shape[1]; ++y)
            for (int64_t x = 0; x < v.shape[2]; ++x)
                out.volume.at(z + out.pad.lo[0], y + out.pad.lo[1], x + out.pad.lo[2]) =
                    v.at(z, y, x);
    if (m) {
        LabelMask om;
        om.shape = padded;
        om.spacing = m->spacing;
        om.origin = m->origin;
        om.voxels.assign(static_cast<size_t>(out.volume.numel()), 0);
        for (int64_t z = 0; z < v.shape[0]; ++z)
            for (int64_t y = 0; y < v.shape[1]; ++y)
                for (int64_t x = 0; x < v.shape[2]; ++x)
                    om.at(z + out.pad.lo[0], y + out.pad.lo[1], x + out.pad.lo[2]) = m->at(z, y, x);
        out.mask = std::move(om);
    }
    return out;
}

Volume unpad(const Volume& v, const PadRecord& pad) {
    Volume out;
    for (int a = 0; a < 3; ++a) {
        out.shape[a] = v.shape[a] - pad.lo[a] - pad.hi[a];
        if (out.shape[a] < 1) throw std::runtime_error("unpad: pad record exceeds volume");
    }
    out.spacing = v.spacing;
    out.origin = v.origin;
    out.voxels.resize(static_cast<size_t>(out.numel()));
    for (int64_t z = 0; z < out.shape[0]; ++z)
        for (int64_t y = 0; y < out.shape[1]; ++y)
            for (int64_t x = 0; x < out.shape[2]; ++x)
                out.at(z, y, x) = v.at(z + pad.lo[0], y + pad.lo[1], x + pad.lo[2]);
    return out;
}

LabelMask unpad(const LabelMask& m, const PadRecord& pad) {
    LabelMask out;
    for (int a = 0; a < 3; ++a) {
        out.shape[a] = m.shape[a] - pad.lo[a] - pad.hi[a];
        if (out.shape[a] < 1) throw std::runtime_error("unpad: pad record exceeds mask");
    }
    out.spacing = m.spacing;
    out.origin = m.origin;
    out.voxels.resize(static_cast<size_t>(out.numel()));
    for (int64_t z = 0; z < out.shape[0]; ++z)
        for (int64_t y = 0; y < out.shape[1]; ++y)
            for (int64_t x = 0; x < out.shape[2]; ++x)
                out.at(z, y, x) = m.at(z + pad.lo[0], y + pad.lo[1], x + pad.lo[2]);
    return out;
}

PreprocessedCase preprocess_case(const std::string& image_path,
                                 const std::optional<std::string>& mask_path,
                                 const PreprocessConfig& cfg) {
    auto [raw, raw_mask] = load_case(image_path, mask_path);
    PreprocessedCase out;
    out.original_shape = raw.shape;
    out.original_spacing = raw.spacing;
    auto [res, res_mask] = resample(raw, raw_mask, cfg.target_spacing);
    Volume clipped = window_clip(res, cfg.window_lo, cfg.window_hi);
    Volume normed = normalize(clipped);
    PaddedCase padded = pad_to_multiple(normed, res_mask, cfg.pad_multiple);
    out.volume = std::move(padded.volume);
    out.mask = std::move(padded.mask);
    out.pad = padded.pad;
    return out;
}

namespace {

std::string arr3(const std::array<int64_t, 3>& a) {
    std::ostringstream os;
    os << a[0] << " " << a[1] << " " << a[2];
    return os.str();
}

std::string arr3d(const std::array<double, 3>& a) {
    std::ostringstream os;
    os.precision(17);
    os << a[0] << " " << a[1] << " " << a[2];
    return os.str();
}

template <typename T, size_t N>
std::array<T, N> parse_arr(const std::string& s) {
    std::istringstream is(s);
    std::array<T, N> out{};
    for (auto& v : out)
        if (!(is >> v)) throw std::runtime_error("case meta: cannot parse '" + s + "'");
    return out;
}

}  // namespace

void save_case(const std::string& dir, const std::string& case_id, const PreprocessedCase& c) {
    fs::create_directories(dir);
    Archive a;
    Tensor img;
    img.shape = {c.volume.shape[0], c.volume.shape[1], c.volume.shape[2]};
    img.data = c.volume.voxels;
    a["image"] = ArchiveEntry::from_tensor(img);
    if (c.mask) {
        ArchiveEntry e;
        e.dtype = ArchiveEntry::DType::U8;
        e.shape = {c.mask->shape[0], c.mask->shape[1], c.mask->shape[2]};
        e.u8 = c.mask->voxels;
        a["mask"] = std::move(e);
    }
    write_archive((fs::path(dir) / (case_id + ".kvol")).string(), a);

    KeyValueMap kv;
    kv["case_id"] = case_id;
    kv["shape"] = arr3(c.volume.shape);
    kv["spacing"] = arr3d(c.volume.spacing);
    kv["origin"] = arr3d(c.volume.origin);
    kv["pad_lo"] = arr3(c.pad.lo);
    kv["pad_hi"] = arr3(c.pad.hi);
    kv["original_shape"] = arr3(c.original_shape);
    kv["original_spacing"] = arr3d(c.original_spacing);
    kv["has_mask"] = c.mask ? "1" : "0";
    write_keyvalue((fs::path(dir) / (case_id + ".meta")).string(), kv);
}

bool saved_case_exists(const std::string& dir, const std::string& case_id) {
    return fs::exists(fs::path(dir) / (case_id + ".kvol")) &&
           fs::exists(fs::path(dir) / (case_id + ".meta"));
}

PreprocessedCase load_saved_case(const std::string& dir, const std::string& case_id) {
    Archive a = read_archive((fs::path(dir) / (case_id + ".kvol")).string());
    KeyValueMap kv = read_keyvalue((fs::path(dir) / (case_id + ".meta")).string());
    PreprocessedCase c;
    auto it = a.find("image");
    if (it == a.end()) throw std::runtime_error("case archive missing 'image': " + case_id);
    Tensor img = it->second.to_tensor();
    if (img.shape.size() != 3) throw std::runtime_error("case image is not 3D: " + case_id);
    c.volume.shape = {img.shape[0], img.shape[1], img.shape[2]};
    c.volume.voxels = std::move(img.data);
    c.volume.spacing = parse_arr<double, 3>(kv.at("spacing"));
    c.volume.origin = parse_arr<double, 3>(kv.at("origin"));
    c.pad.lo = parse_arr<int64_t, 3>(kv.at("pad_lo"));
    c.pad.hi = parse_arr<int64_t, 3>(kv.at("pad_hi"));
    c.original_shape = parse_arr<int64_t, 3>(kv.at("original_shape"));
    c.original_spacing = parse_arr<double, 3>(kv.at("original_spacing"));
    auto mit = a.find("mask");
    if (mit != a.end()) {
        LabelMask m;
        m.shape = {mit->second.shape[0], mit->second.shape[1], mit->second.shape[2]};
        m.voxels = mit->second.u8;
        m.spacing = c.volume.spacing;
        m.origin = c.volume.origin;
        m.validate();
        if (m.shape != c.volume.shape)
            throw std::runtime_error("case archive image/mask shape mismatch: " + case_id);
        c.mask = std::move(m);
    }
    c.volume.validate();
    return c;
}

}  // namespace kseg
