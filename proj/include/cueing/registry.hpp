#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cueing/rng.hpp"
#include "cueing/tensor.hpp"

namespace cueing::nn {

template <typename T>
struct ParamT {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;  // same shape, zeroed between steps
    bool trainable = true;
};

// Ordered registry of named parameters; names are unique dotted paths and the
// registration order is the serialization order.
template <typename T>
class RegistryT {
public:
    ParamT<T>& add(const std::string& name, std::vector<int> shape) {
        if (index_.count(name)) throw std::invalid_argument("registry: duplicate name " + name);
        auto p = std::make_unique<ParamT<T>>();
        p->name = name;
        p->value = TensorT<T>(shape);
        p->grad = TensorT<T>(std::move(shape));
        index_[name] = items_.size();
        items_.push_back(std::move(p));
        return *items_.back();
    }

    ParamT<T>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("registry: no parameter " + name);
        return *items_[it->second];
    }
    const ParamT<T>& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("registry: no parameter " + name);
        return *items_[it->second];
    }
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    size_t size() const { return items_.size(); }
    ParamT<T>& operator[](size_t i) { return *items_[i]; }
    const ParamT<T>& operator[](size_t i) const { return *items_[i]; }

    void zero_grad() {
        for (auto& p : items_) std::fill(p->grad.data.begin(), p->grad.data.end(), T(0));
    }

    int64_t count_params(bool trainable_only) const {
        int64_t n = 0;
        for (const auto& p : items_)
            if (!trainable_only || p->trainable) n += static_cast<int64_t>(p->value.numel());
        return n;
    }

    // Fan-in-scaled uniform init for weights, zeros for biases; seeded per
    // parameter so the stream does not depend on shapes of earlier tensors.
    void init_params(uint64_t seed) {
        for (size_t i = 0; i < items_.size(); ++i) {
            ParamT<T>& p = *items_[i];
            bool is_bias = p.value.ndim() == 1 && p.name.find("gain") == std::string::npos;
            if (p.name.size() >= 5 && p.name.substr(p.name.size() - 5) == ".gain") {
                std::fill(p.value.data.begin(), p.value.data.end(), T(1));
                continue;
            }
            if (is_bias) {
                std::fill(p.value.data.begin(), p.value.data.end(), T(0));
                continue;
            }
            size_t fan_in = 1;
            for (int d = 1; d < p.value.ndim(); ++d)
                fan_in *= static_cast<size_t>(p.value.dim(d));
            double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            Rng rng(mix_seed(seed, i));
            for (T& v : p.value.data) v = static_cast<T>(rng.uniform(-bound, bound));
        }
    }

private:
    std::vector<std::unique_ptr<ParamT<T>>> items_;
    std::unordered_map<std::string, size_t> index_;
};

using Registry = RegistryT<float>;

}  // namespace cueing::nn
