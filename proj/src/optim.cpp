#include "kseg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace kseg {

void Adam::step(ParameterStore& params, const GradStore& grads) {
    ++t;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        auto& mt = m.try_emplace(name, Tensor(p.shape)).first->second;
        auto& vt = v.try_emplace(name, Tensor(p.shape)).first->second;
        const Tensor* g = git != grads.end() ? &git->second : nullptr;
        if (g && g->shape != p.shape)
            throw std::runtime_error("adam: gradient shape mismatch for " + name);
        for (size_t i = 0; i < p.data.size(); ++i) {
            double gi = g ? g->data[i] : 0.0;
            mt.data[i] = cfg.beta1 * mt.data[i] + (1.0 - cfg.beta1) * gi;
            vt.data[i] = cfg.beta2 * vt.data[i] + (1.0 - cfg.beta2) * gi * gi;
            double mhat = mt.data[i] / bc1;
            double vhat = vt.data[i] / bc2;
            p.data[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p.data[i]);
        }
    }
}

}  // namespace kseg
