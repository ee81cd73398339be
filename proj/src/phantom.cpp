#include "kseg/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace kseg {

namespace fs = std::filesystem;

void PhantomSpec::validate() const {
    for (int64_t d : dims)
        if (d < 8) throw std::runtime_error("phantom: dims too small");
    for (double a : semi_axes)
        if (!(a > 0)) throw std::runtime_error("phantom: semi-axes must be positive");
    if (!(size_asymmetry_ratio > 1.0))
        throw std::runtime_error("phantom: size_asymmetry_ratio must be > 1");
    double half = static_cast<double>(dims[2]) / 2.0;
    double worst_ax = semi_axes[2] * size_asymmetry_ratio * (1.0 + shape_jitter);
    if (2.0 * worst_ax + 2.0 * position_jitter + 4.0 >= half)
        throw std::runtime_error("phantom: ellipsoid cannot fit strictly inside a sagittal half");
}

namespace {

struct Ellipsoid {
    std::array<double, 3> center;
    std::array<double, 3> axes;
};

bool fits(const Ellipsoid& e, const std::array<int64_t, 3>& dims, double x_min, double x_max) {
    for (int a = 0; a < 3; ++a) {
        if (e.center[a] - e.axes[a] < 1.0) return false;
        if (e.center[a] + e.axes[a] > static_cast<double>(dims[a]) - 2.0) return false;
    }
    if (e.center[2] - e.axes[2] <= x_min + 1.0) return false;
    if (e.center[2] + e.axes[2] >= x_max - 1.0) return false;
    return true;
}

void box_smooth(Volume& v, int radius) {
    if (radius < 1) return;
    auto [Z, Y, X] = v.shape;
    std::vector<double> tmp(v.voxels.size());
    auto pass = [&](int axis) {
        int64_t n[3] = {Z, Y, X};
        for (int64_t z = 0; z < Z; ++z)
            for (int64_t y = 0; y < Y; ++y)
                for (int64_t x = 0; x < X; ++x) {
                    int64_t idx[3] = {z, y, x};
                    double acc = 0;
                    int cnt = 0;
                    for (int d = -radius; d <= radius; ++d) {
                        int64_t i = idx[axis] + d;
                        if (i < 0 || i >= n[axis]) continue;
                        int64_t q[3] = {z, y, x};
                        q[axis] = i;
                        acc += v.at(q[0], q[1], q[2]);
                        ++cnt;
                    }
                    tmp[static_cast<size_t>((z * Y + y) * X + x)] = acc / cnt;
                }
        v.voxels = tmp;
    };
    pass(0);
    pass(1);
    pass(2);
}

}  // namespace

std::pair<Volume, LabelMask> generate_case(const PhantomSpec& spec, int64_t case_index) {
    spec.validate();
    std::mt19937_64 rng(mix_seed(spec.seed, static_cast<uint64_t>(case_index)));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    const auto& d = spec.dims;
    double half_x = static_cast<double>(d[2]) / 2.0;

    auto draw_side = [&](bool left) {
        double scale = left ? spec.size_asymmetry_ratio : 1.0;
        std::array<double, 3> nominal_center = {
            static_cast<double>(d[0]) / 2.0 + (left ? -spec.superior_offset : 0.0),
            static_cast<double>(d[1]) / 2.0,
            left ? half_x / 2.0 : 3.0 * half_x / 2.0};
        double x_min = left ? 0.0 : half_x;
        double x_max = left ? half_x : static_cast<double>(d[2]);
        for (int attempt = 0; attempt < 16; ++attempt) {
            Ellipsoid e;
            for (int a = 0; a < 3; ++a) {
                e.axes[a] = spec.semi_axes[a] * scale * (1.0 + spec.shape_jitter * uni(rng));
                e.center[a] = nominal_center[a] + spec.position_jitter * uni(rng);
            }
            if (fits(e, d, x_min, x_max)) return e;
        }
        throw std::runtime_error("phantom: could not place " + std::string(left ? "left" : "right") +
                                 " kidney inside its sagittal half (case " +
                                 std::to_string(case_index) + ")");
    };
    Ellipsoid left = draw_side(true);
    Ellipsoid right = draw_side(false);

    LabelMask mask;
    mask.shape = d;
    mask.spacing = spec.spacing;
    mask.voxels.assign(static_cast<size_t>(mask.numel()), 0);
    auto inside = [](const Ellipsoid& e, int64_t z, int64_t y, int64_t x) {
        double dz = (static_cast<double>(z) - e.center[0]) / e.axes[0];
        double dy = (static_cast<double>(y) - e.center[1]) / e.axes[1];
        double dx = (static_cast<double>(x) - e.center[2]) / e.axes[2];
        return dz * dz + dy * dy + dx * dx <= 1.0;
    };
    for (int64_t z = 0; z < d[0]; ++z)
        for (int64_t y = 0; y < d[1]; ++y)
            for (int64_t x = 0; x < d[2]; ++x) {
                if (inside(left, z, y, x))
                    mask.at(z, y, x) = 1;
                else if (inside(right, z, y, x))
                    mask.at(z, y, x) = 2;
            }

    Volume img;
    img.shape = d;
    img.spacing = spec.spacing;
    img.voxels.resize(static_cast<size_t>(img.numel()));
    std::normal_distribution<double> bg(spec.background_mean, spec.background_std);
    std::normal_distribution<double> kid(spec.kidney_mean, spec.kidney_std);
    for (int64_t i = 0; i < img.numel(); ++i)
        img.voxels[static_cast<size_t>(i)] = mask.voxels[static_cast<size_t>(i)] ? kid(rng) : bg(rng);
    box_smooth(img, spec.smoothing_radius);

    return {std::move(img), std::move(mask)};
}

int64_t connected_components(const LabelMask& m, uint8_t label) {
    auto [Z, Y, X] = m.shape;
    std::vector<uint8_t> seen(m.voxels.size(), 0);
    auto idx = [&](int64_t z, int64_t y, int64_t x) {
        return static_cast<size_t>((z * Y + y) * X + x);
    };
    int64_t components = 0;
    std::deque<std::array<int64_t, 3>> queue;
    for (int64_t z = 0; z < Z; ++z)
        for (int64_t y = 0; y < Y; ++y)
            for (int64_t x = 0; x < X; ++x) {
                if (m.at(z, y, x) != label || seen[idx(z, y, x)]) continue;
                ++components;
                seen[idx(z, y, x)] = 1;
                queue.push_back({z, y, x});
                while (!queue.empty()) {
                    auto [cz, cy, cx] = queue.front();
                    queue.pop_front();
                    const int64_t off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                               {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                    for (const auto& o : off) {
                        int64_t nz = cz + o[0], ny = cy + o[1], nx = cx + o[2];
                        if (nz < 0 || nz >= Z || ny < 0 || ny >= Y || nx < 0 || nx >= X) continue;
                        if (m.at(nz, ny, nx) != label || seen[idx(nz, ny, nx)]) continue;
                        seen[idx(nz, ny, nx)] = 1;
                        queue.push_back({nz, ny, nx});
                    }
                }
            }
    return components;
}

std::vector<std::string> generate_dataset(const PhantomSpec& spec, int64_t n_cases,
                                          const std::string& out_dir) {
    if (n_cases < 1) throw std::runtime_error("phantom: n_cases must be >= 1");
    fs::create_directories(out_dir);
    std::vector<std::string> ids;
    std::ostringstream manifest;
    manifest << "case_id\tshape\tlabel1_voxels\tlabel2_voxels\tcontent_hash\n";
    for (int64_t i = 0; i < n_cases; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "case_%05lld", static_cast<long long>(i));
        std::string case_id(buf);
        auto [img, mask] = generate_case(spec, i);
        mask.validate();
        int64_t n1 = 0, n2 = 0;
        for (uint8_t v : mask.voxels) {
            n1 += v == 1;
            n2 += v == 2;
        }
        PreprocessedCase c;
        c.volume = std::move(img);
        c.mask = std::move(mask);
        c.original_shape = spec.dims;
        c.original_spacing = spec.spacing;
        save_case(out_dir, case_id, c);
        uint64_t h = fnv1a(c.volume.voxels.data(), c.volume.voxels.size() * sizeof(double));
        h = fnv1a(c.mask->voxels.data(), c.mask->voxels.size(), h);
        manifest << case_id << "\t" << spec.dims[0] << "x" << spec.dims[1] << "x" << spec.dims[2]
                 << "\t" << n1 << "\t" << n2 << "\t" << std::hex << h << std::dec << "\n";
        ids.push_back(case_id);
    }
    std::ofstream mf(fs::path(out_dir) / "manifest.tsv");
    if (!mf) throw std::runtime_error("phantom: cannot write manifest in " + out_dir);
    mf << manifest.str();
    return ids;
}

}  // namespace kseg
