#include "kseg/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace kseg {

CaseHalves split_sagittal(const Volume& v, const LabelMask& m, const std::string& case_id) {
    if (v.shape != m.shape) throw std::runtime_error("split_sagittal: image/mask shape mismatch");
    int64_t split = v.shape[2] / 2;
    bool has1 = false, has2 = false;
    for (int64_t z = 0; z < m.shape[0]; ++z)
        for (int64_t y = 0; y < m.shape[1]; ++y)
            for (int64_t x = 0; x < m.shape[2]; ++x) {
                uint8_t l = m.at(z, y, x);
                if (l == 0) continue;
                if (l == 1) {
                    has1 = true;
                    if (x >= split)
                        throw std::runtime_error("split_sagittal: left kidney straddles midline in case " + case_id);
                } else {
                    has2 = true;
                    if (x < split)
                        throw std::runtime_error("split_sagittal: right kidney straddles midline in case " + case_id);
                }
            }
    if (!has1 || !has2)
        throw std::runtime_error("split_sagittal: case " + case_id + " lacks one of the kidney labels");

    auto slice = [&](int64_t x0, int64_t x1) {
        Volume hv;
        LabelMask hm;
        hv.shape = {v.shape[0], v.shape[1], x1 - x0};
        hv.spacing = v.spacing;
        hv.origin = v.origin;
        hv.voxels.resize(static_cast<size_t>(hv.numel()));
        hm.shape = hv.shape;
        hm.spacing = m.spacing;
        hm.origin = m.origin;
        hm.voxels.resize(static_cast<size_t>(hm.numel()));
        for (int64_t z = 0; z < hv.shape[0]; ++z)
            for (int64_t y = 0; y < hv.shape[1]; ++y)
                for (int64_t x = 0; x < hv.shape[2]; ++x) {
                    hv.at(z, y, x) = v.at(z, y, x0 + x);
                    hm.at(z, y, x) = m.at(z, y, x0 + x);
                }
        return std::make_pair(std::move(hv), std::move(hm));
    };
    auto [lv, lm] = slice(0, split);
    auto [rv, rm] = slice(split, v.shape[2]);
    return CaseHalves{std::move(lv), std::move(lm), std::move(rv), std::move(rm)};
}

KidneyCrop extract_crop(const Volume& v, const LabelMask& m, Side side,
                        const std::array<int64_t, 3>& crop_shape, const std::string& case_id) {
    if (v.shape != m.shape) throw std::runtime_error("extract_crop: image/mask shape mismatch");
    uint8_t label = side_label(side);
    double cz = 0, cy = 0, cx = 0;
    int64_t count = 0;
    for (int64_t z = 0; z < m.shape[0]; ++z)
        for (int64_t y = 0; y < m.shape[1]; ++y)
            for (int64_t x = 0; x < m.shape[2]; ++x)
                if (m.at(z, y, x) == label) {
                    cz += static_cast<double>(z);
                    cy += static_cast<double>(y);
                    cx += static_cast<double>(x);
                    ++count;
                }
    if (count == 0)
        throw std::runtime_error(std::string("extract_crop: no voxels with label ") +
                                 std::to_string(label) + " in case " + case_id);
    int64_t centroid[3] = {static_cast<int64_t>(std::llround(cz / count)),
                           static_cast<int64_t>(std::llround(cy / count)),
                           static_cast<int64_t>(std::llround(cx / count))};

    KidneyCrop crop;
    crop.shape = crop_shape;
    crop.side = side;
    crop.case_id = case_id;
    crop.voxels.assign(static_cast<size_t>(crop_shape[0] * crop_shape[1] * crop_shape[2]), 0.0);
    int64_t start[3];
    for (int a = 0; a < 3; ++a) start[a] = centroid[a] - crop_shape[a] / 2;
    for (int64_t z = 0; z < crop_shape[0]; ++z) {
        int64_t sz = start[0] + z;
        if (sz < 0 || sz >= v.shape[0]) continue;
        for (int64_t y = 0; y < crop_shape[1]; ++y) {
            int64_t sy = start[1] + y;
            if (sy < 0 || sy >= v.shape[1]) continue;
            for (int64_t x = 0; x < crop_shape[2]; ++x) {
                int64_t sx = start[2] + x;
                if (sx < 0 || sx >= v.shape[2]) continue;
                crop.voxels[static_cast<size_t>((z * crop_shape[1] + y) * crop_shape[2] + x)] =
                    v.at(sz, sy, sx);
            }
        }
    }
    return crop;
}

std::vector<PairSample> sample_pairs(const std::vector<KidneyCrop>& crops, int64_t n_pairs,
                                     double same_fraction, uint64_t seed) {
    if (n_pairs < 1) throw std::runtime_error("sample_pairs: n_pairs must be >= 1");
    if (!(same_fraction >= 0.0 && same_fraction <= 1.0))
        throw std::runtime_error("sample_pairs: same_fraction out of [0,1]");
    std::vector<size_t> lefts, rights;
    for (size_t i = 0; i < crops.size(); ++i)
        (crops[i].side == Side::Left ? lefts : rights).push_back(i);
    if (lefts.empty() || rights.empty())
        throw std::runtime_error("sample_pairs: need at least one crop of each side");

    int64_t n_same = static_cast<int64_t>(std::llround(static_cast<double>(n_pairs) * same_fraction));
    if (n_same > 0 && lefts.size() < 2 && rights.size() < 2)
        throw std::runtime_error("sample_pairs: same-side pairs need two distinct crops on a side");

    std::mt19937_64 rng(seed);
    std::vector<PairSample> pairs;
    pairs.reserve(static_cast<size_t>(n_pairs));
    auto pick = [&](const std::vector<size_t>& pool) {
        return pool[std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng)];
    };
    for (int64_t i = 0; i < n_same; ++i) {
        // Alternate sides where possible so both are represented.
        const std::vector<size_t>* pool;
        if (lefts.size() < 2)
            pool = &rights;
        else if (rights.size() < 2)
            pool = &lefts;
        else
            pool = (i % 2 == 0) ? &lefts : &rights;
        size_t a = pick(*pool), b = pick(*pool);
        while (b == a) b = pick(*pool);
        pairs.push_back({a, b, 1});
    }
    for (int64_t i = n_same; i < n_pairs; ++i) pairs.push_back({pick(lefts), pick(rights), 0});

    // Deterministic interleave so same/opposite labels are not block-ordered.
    std::shuffle(pairs.begin(), pairs.end(), rng);
    return pairs;
}

void write_pair_manifest(const std::string& path, const std::vector<KidneyCrop>& crops,
                         const std::vector<PairSample>& pairs) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write pair manifest: " + path);
    os << "case_id_a\tside_a\tcase_id_b\tside_b\ty\n";
    for (const auto& p : pairs)
        os << crops[p.a].case_id << "\t" << side_name(crops[p.a].side) << "\t" << crops[p.b].case_id
           << "\t" << side_name(crops[p.b].side) << "\t" << p.label << "\n";
}

}  // namespace kseg
