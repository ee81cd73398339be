#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "kseg/volume.hpp"

namespace testutil {

inline kseg::Volume random_volume(std::mt19937_64& rng, const std::array<int64_t, 3>& shape,
                                  double lo = -100.0, double hi = 400.0) {
    kseg::Volume v;
    v.shape = shape;
    v.voxels.resize(static_cast<size_t>(v.numel()));
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& x : v.voxels) x = d(rng);
    return v;
}

inline kseg::LabelMask random_mask(std::mt19937_64& rng, const std::array<int64_t, 3>& shape,
                                   double fg_prob = 0.3) {
    kseg::LabelMask m;
    m.shape = shape;
    m.voxels.resize(static_cast<size_t>(m.numel()));
    std::bernoulli_distribution d(fg_prob);
    for (auto& x : m.voxels) x = d(rng) ? 1 : 0;
    return m;
}

/// Relative-error agreement between an analytic and a numeric gradient entry.
inline bool grad_close(double analytic, double numeric, double rel_tol, double abs_floor = 1e-8) {
    double diff = std::abs(analytic - numeric);
    if (diff < abs_floor) return true;
    double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return diff / scale < rel_tol;
}

/// Central finite difference of f at x along one coordinate.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace testutil
