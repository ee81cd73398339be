#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "kseg/nn.hpp"

namespace kseg {

/// Adam with decoupled weight decay (applied directly to the parameters, not
/// through the gradient).
struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

struct Adam {
    AdamConfig cfg;
    std::map<std::string, Tensor> m, v;
    int64_t t = 0;

    Adam() = default;
    explicit Adam(AdamConfig c) : cfg(c) {}
    void step(ParameterStore& params, const GradStore& grads);
};

}  // namespace kseg
