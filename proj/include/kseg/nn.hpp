#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "kseg/tensor.hpp"

namespace kseg {

/// Named map of parameter arrays; the unit of checkpointing and transfer.
using ParameterStore = std::map<std::string, Tensor>;
using GradStore = std::map<std::string, Tensor>;

namespace nn {

Tensor& grad_slot(GradStore& g, const std::string& name, const std::vector<int64_t>& shape);

/// 3D convolution over [C, D, H, W] feature maps, im2col + dgemm.
/// Weight shape [cout, cin, k, k, k], bias [cout].
struct Conv3d {
    std::string weight_name, bias_name;
    int64_t cin = 0, cout = 0, k = 3, stride = 1, pad = 1;

    Tensor x_cache;
    std::array<int64_t, 3> in_dims{}, out_dims{};

    void configure(std::string name, int64_t cin_, int64_t cout_, int64_t k_, int64_t stride_,
                   int64_t pad_);
    void init_params(ParameterStore& store, std::mt19937_64& rng) const;
    Tensor forward(const ParameterStore& store, const Tensor& x);
    Tensor backward(const ParameterStore& store, const Tensor& grad_y, GradStore& grads);
    void clear_cache() { x_cache = Tensor(); }
};

/// Transpose convolution, kernel 2, stride 2: exact x2 upsampling.
/// Weight shape [cin, cout, 2, 2, 2], bias [cout].
struct ConvTranspose3d {
    std::string weight_name, bias_name;
    int64_t cin = 0, cout = 0;

    Tensor x_cache;
    std::array<int64_t, 3> in_dims{};

    void configure(std::string name, int64_t cin_, int64_t cout_);
    void init_params(ParameterStore& store, std::mt19937_64& rng) const;
    Tensor forward(const ParameterStore& store, const Tensor& x);
    Tensor backward(const ParameterStore& store, const Tensor& grad_y, GradStore& grads);
    void clear_cache() { x_cache = Tensor(); }
};

/// Group normalization with affine scale/offset, eps 1e-5.
struct GroupNorm {
    std::string scale_name, offset_name;
    int64_t channels = 0, groups = 1;
    static constexpr double eps = 1e-5;

    Tensor xhat_cache;
    std::vector<double> inv_std_cache;

    void configure(std::string name, int64_t channels_, int64_t groups_);
    void init_params(ParameterStore& store) const;
    Tensor forward(const ParameterStore& store, const Tensor& x);
    Tensor backward(const ParameterStore& store, const Tensor& grad_y, GradStore& grads);
    void clear_cache() {
        xhat_cache = Tensor();
        inv_std_cache.clear();
    }
};

struct ReLU {
    std::vector<uint8_t> mask_cache;
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_y) const;
    void clear_cache() { mask_cache.clear(); }
};

/// Spatial global average over [C, D, H, W] -> [C].
struct GlobalAvgPool {
    std::array<int64_t, 4> in_shape{};
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_y) const;
};

Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Splits grad of concat(a, b) back into the two channel ranges.
std::pair<Tensor, Tensor> split_channels(const Tensor& g, int64_t ca, int64_t cb);

}  // namespace nn
}  // namespace kseg
