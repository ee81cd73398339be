#include "kseg/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace kseg {

namespace {

// NIfTI-1 header, 348 bytes. Only the fields we consume are named precisely;
// the rest are kept as padding so offsets line up.
#pragma pack(push, 1)
struct Nifti1Header {
    int32_t sizeof_hdr;        // 0: must be 348
    char data_type[10];        // 4
    char db_name[18];          // 14
    int32_t extents;           // 32
    int16_t session_error;     // 36
    char regular;              // 38
    char dim_info;             // 39
    int16_t dim[8];            // 40
    float intent_p1, intent_p2, intent_p3;  // 56
    int16_t intent_code;       // 68
    int16_t datatype;          // 70
    int16_t bitpix;            // 72
    int16_t slice_start;       // 74
    float pixdim[8];           // 76
    float vox_offset;          // 108
    float scl_slope;           // 112
    float scl_inter;           // 116
    int16_t slice_end;         // 120
    char slice_code;           // 122
    char xyzt_units;           // 123
    float cal_max, cal_min;    // 124
    float slice_duration;      // 132
    float toffset;             // 136
    int32_t glmax, glmin;      // 140
    char descrip[80];          // 148
    char aux_file[24];         // 228
    int16_t qform_code;        // 252
    int16_t sform_code;        // 254
    float quatern_b, quatern_c, quatern_d;  // 256
    float qoffset_x, qoffset_y, qoffset_z;  // 268
    float srow_x[4];           // 280
    float srow_y[4];           // 296
    float srow_z[4];           // 312
    char intent_name[16];      // 328
    char magic[4];             // 344
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr int16_t DT_UINT8 = 2;
constexpr int16_t DT_INT16 = 4;
constexpr int16_t DT_INT32 = 8;
constexpr int16_t DT_FLOAT32 = 16;
constexpr int16_t DT_FLOAT64 = 64;
constexpr int16_t DT_UINT16 = 512;

struct GzFile {
    gzFile f = nullptr;
    explicit GzFile(const std::string& path, const char* mode) {
        f = gzopen(path.c_str(), mode);
        if (!f) throw std::runtime_error("nifti: cannot open " + path);
    }
    ~GzFile() {
        if (f) gzclose(f);
    }
    void read(void* buf, size_t n) {
        if (gzread(f, buf, static_cast<unsigned>(n)) != static_cast<int>(n))
            throw std::runtime_error("nifti: truncated read");
    }
    void write(const void* buf, size_t n) {
        if (gzwrite(f, buf, static_cast<unsigned>(n)) != static_cast<int>(n))
            throw std::runtime_error("nifti: write failed");
    }
};

// Voxel-to-world affine, columns for data axes (i, j, k), rows (x, y, z).
using Affine = std::array<std::array<double, 3>, 3>;

Affine header_affine(const Nifti1Header& h) {
    Affine a{};
    if (h.sform_code > 0) {
        for (int c = 0; c < 3; ++c) {
            a[0][c] = h.srow_x[c];
            a[1][c] = h.srow_y[c];
            a[2][c] = h.srow_z[c];
        }
        return a;
    }
    if (h.qform_code > 0) {
        double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
        double t = 1.0 - (b * b + c * c + d * d);
        double q = t > 0 ? std::sqrt(t) : 0.0;
        double R[3][3] = {
            {q * q + b * b - c * c - d * d, 2 * b * c - 2 * q * d, 2 * b * d + 2 * q * c},
            {2 * b * c + 2 * q * d, q * q + c * c - b * b - d * d, 2 * c * d - 2 * q * b},
            {2 * b * d - 2 * q * c, 2 * c * d + 2 * q * b, q * q + d * d - c * c - b * b}};
        double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
        for (int r = 0; r < 3; ++r)
            for (int cc = 0; cc < 3; ++cc)
                a[r][cc] = R[r][cc] * h.pixdim[cc + 1] * (cc == 2 ? qfac : 1.0);
        return a;
    }
    // No orientation info: assume axis-aligned positive spacing.
    for (int c = 0; c < 3; ++c) a[c][c] = h.pixdim[c + 1] != 0 ? h.pixdim[c + 1] : 1.0;
    return a;
}

}  // namespace

NiftiVolume read_nifti(const std::string& path) {
    GzFile gz(path, "rb");
    Nifti1Header h{};
    gz.read(&h, sizeof(h));
    if (h.sizeof_hdr != 348)
        throw std::runtime_error("nifti: not a NIfTI-1 file (bad sizeof_hdr): " + path);
    if (std::strncmp(h.magic, "n+1", 3) != 0 && std::strncmp(h.magic, "ni1", 3) != 0)
        throw std::runtime_error("nifti: bad magic in " + path);
    int ndim = h.dim[0];
    for (int d = 4; d <= ndim && d < 8; ++d)
        if (h.dim[d] > 1) throw std::runtime_error("nifti: volume is not 3D: " + path);
    if (ndim < 3) throw std::runtime_error("nifti: volume is not 3D: " + path);

    int64_t nx = h.dim[1], ny = h.dim[2], nz = h.dim[3];
    if (nx < 1 || ny < 1 || nz < 1) throw std::runtime_error("nifti: degenerate dims in " + path);
    int64_t n = nx * ny * nz;

    // Skip any header extension up to vox_offset.
    int64_t skip = static_cast<int64_t>(h.vox_offset) - 348;
    if (skip > 0) {
        std::vector<char> junk(static_cast<size_t>(skip));
        gz.read(junk.data(), junk.size());
    }

    std::vector<double> raw(static_cast<size_t>(n));
    auto load = [&](auto tag) {
        using T = decltype(tag);
        std::vector<T> buf(static_cast<size_t>(n));
        gz.read(buf.data(), buf.size() * sizeof(T));
        for (int64_t i = 0; i < n; ++i) raw[static_cast<size_t>(i)] = static_cast<double>(buf[static_cast<size_t>(i)]);
    };
    switch (h.datatype) {
        case DT_UINT8: load(uint8_t{}); break;
        case DT_INT16: load(int16_t{}); break;
        case DT_UINT16: load(uint16_t{}); break;
        case DT_INT32: load(int32_t{}); break;
        case DT_FLOAT32: load(float{}); break;
        case DT_FLOAT64: load(double{}); break;
        default:
            throw std::runtime_error("nifti: unsupported datatype " + std::to_string(h.datatype));
    }
    double slope = (h.scl_slope != 0.0f) ? h.scl_slope : 1.0;
    double inter = h.scl_inter;
    if (slope != 1.0 || inter != 0.0)
        for (auto& v : raw) v = v * slope + inter;

    // Canonicalize: find for each data axis (i,j,k) the dominant world axis
    // and its sign, then reorder so storage is (z, y, x) with x fastest.
    Affine aff = header_affine(h);
    int world_of[3];   // data axis -> world axis (0=x,1=y,2=z)
    int sign_of[3];
    bool used[3] = {false, false, false};
    for (int da = 0; da < 3; ++da) {
        int best = -1;
        double mag = -1;
        for (int w = 0; w < 3; ++w) {
            double m = std::fabs(aff[w][da]);
            if (!used[w] && m > mag) {
                mag = m;
                best = w;
            }
        }
        used[best] = true;
        world_of[da] = best;
        sign_of[da] = aff[best][da] < 0 ? -1 : 1;
    }

    int64_t dims_file[3] = {nx, ny, nz};
    double spacing_file[3];
    for (int da = 0; da < 3; ++da) {
        double s = 0;
        for (int w = 0; w < 3; ++w) s += aff[w][da] * aff[w][da];
        spacing_file[da] = std::sqrt(s);
        if (spacing_file[da] <= 0) spacing_file[da] = 1.0;
    }

    // data_axis_for_world[w]: which file axis carries world axis w.
    int axis_for_world[3];
    for (int da = 0; da < 3; ++da) axis_for_world[world_of[da]] = da;

    NiftiVolume out;
    // internal order (z, y, x) = world (z, y, x)
    int internal_axis[3] = {axis_for_world[2], axis_for_world[1], axis_for_world[0]};
    out.shape = {dims_file[internal_axis[0]], dims_file[internal_axis[1]], dims_file[internal_axis[2]]};
    out.spacing = {spacing_file[internal_axis[0]], spacing_file[internal_axis[1]], spacing_file[internal_axis[2]]};
    out.origin = {0.0, 0.0, 0.0};
    out.data.resize(static_cast<size_t>(n));

    int64_t stride_file[3] = {1, nx, nx * ny};
    for (int64_t zi = 0; zi < out.shape[0]; ++zi)
        for (int64_t yi = 0; yi < out.shape[1]; ++yi)
            for (int64_t xi = 0; xi < out.shape[2]; ++xi) {
                int64_t idx_int[3] = {zi, yi, xi};
                int64_t off = 0;
                for (int a = 0; a < 3; ++a) {
                    int da = internal_axis[a];
                    int64_t i = idx_int[a];
                    if (sign_of[da] < 0) i = dims_file[da] - 1 - i;
                    off += i * stride_file[da];
                }
                out.data[static_cast<size_t>((zi * out.shape[1] + yi) * out.shape[2] + xi)] =
                    raw[static_cast<size_t>(off)];
            }
    return out;
}

void write_nifti(const std::string& path, const NiftiVolume& v, NiftiDType dtype) {
    if (static_cast<int64_t>(v.data.size()) != v.shape[0] * v.shape[1] * v.shape[2])
        throw std::runtime_error("nifti: data size does not match shape");
    Nifti1Header h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = static_cast<int16_t>(v.shape[2]);  // x
    h.dim[2] = static_cast<int16_t>(v.shape[1]);  // y
    h.dim[3] = static_cast<int16_t>(v.shape[0]);  // z
    for (int d = 4; d < 8; ++d) h.dim[d] = 1;
    h.pixdim[0] = 1.0f;
    h.pixdim[1] = static_cast<float>(v.spacing[2]);
    h.pixdim[2] = static_cast<float>(v.spacing[1]);
    h.pixdim[3] = static_cast<float>(v.spacing[0]);
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.datatype = dtype == NiftiDType::U8 ? DT_UINT8 : DT_FLOAT32;
    h.bitpix = dtype == NiftiDType::U8 ? 8 : 32;
    h.sform_code = 1;
    h.qform_code = 0;
    h.srow_x[0] = static_cast<float>(v.spacing[2]);
    h.srow_y[1] = static_cast<float>(v.spacing[1]);
    h.srow_z[2] = static_cast<float>(v.spacing[0]);
    h.srow_x[3] = static_cast<float>(v.origin[2]);
    h.srow_y[3] = static_cast<float>(v.origin[1]);
    h.srow_z[3] = static_cast<float>(v.origin[0]);
    std::memcpy(h.magic, "n+1", 4);

    bool gzipped = path.size() > 3 && path.substr(path.size() - 3) == ".gz";
    GzFile gz(path, gzipped ? "wb" : "wbT");  // "T" = store without compression
    gz.write(&h, sizeof(h));
    char pad[4] = {0, 0, 0, 0};
    gz.write(pad, 4);
    size_t n = v.data.size();
    if (dtype == NiftiDType::U8) {
        std::vector<uint8_t> buf(n);
        for (size_t i = 0; i < n; ++i) buf[i] = static_cast<uint8_t>(std::lround(v.data[i]));
        gz.write(buf.data(), n);
    } else {
        std::vector<float> buf(n);
        for (size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(v.data[i]);
        gz.write(buf.data(), n * sizeof(float));
    }
}

}  // namespace kseg
