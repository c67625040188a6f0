#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cueing/registry.hpp"

namespace cueing::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam. Moments are kept for every parameter slot; frozen
// parameters are skipped entirely (values and moments untouched).
template <typename T>
class AdamT {
public:
    AdamT(const RegistryT<T>& registry, AdamConfig cfg) : cfg_(cfg) {
        m_.resize(registry.size());
        v_.resize(registry.size());
        for (size_t i = 0; i < registry.size(); ++i) {
            m_[i].assign(registry[i].value.numel(), T(0));
            v_[i].assign(registry[i].value.numel(), T(0));
        }
    }

    int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

    void step(RegistryT<T>& registry) {
        if (registry.size() != m_.size()) throw std::invalid_argument("adam: registry mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (size_t i = 0; i < registry.size(); ++i) {
            ParamT<T>& p = registry[i];
            if (!p.trainable) continue;
            if (p.grad.numel() != p.value.numel())
                throw std::invalid_argument("adam: missing gradient for " + p.name);
            T* m = m_[i].data();
            T* v = v_[i].data();
            for (size_t j = 0; j < p.value.numel(); ++j) {
                const double g = static_cast<double>(p.grad.data[j]);
                double mj = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
                double vj = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
                m[j] = static_cast<T>(mj);
                v[j] = static_cast<T>(vj);
                const double mhat = mj / bc1;
                const double vhat = vj / bc2;
                p.value.data[j] -= static_cast<T>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
            }
        }
    }

private:
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
};

using Adam = AdamT<float>;

}  // namespace cueing::nn
