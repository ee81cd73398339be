#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kseg {

/// Dense row-major n-dimensional array of doubles. Feature maps use the
/// layout [C, D, H, W]; raw volumes use [D, H, W].
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) {
            if (d < 0) throw std::invalid_argument("negative tensor dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

std::string shape_str(const std::vector<int64_t>& s);

// splitmix64: counter-based seed mixing so per-case / per-epoch streams are
// independent of generation order.
uint64_t splitmix64(uint64_t x);
uint64_t mix_seed(uint64_t a, uint64_t b);

// FNV-1a over raw bytes, used for manifest/content hashing.
uint64_t fnv1a(const void* bytes, size_t n, uint64_t h = 1469598103934665603ull);

}  // namespace kseg
