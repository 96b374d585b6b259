#pragma once

#include <cmath>

#include "irid/tensor/tensor.hpp"

namespace irid {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01; // decoupled; applied directly to the weights
};

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m, v; // one slot per parameter
    int64_t t = 0;                    // completed steps
};

template <typename T>
void zero_grad(const std::vector<TensorRef<T>>& params) {
    for (const auto& p : params) {
        p->ensure_grad();
        std::fill(p->grad.begin(), p->grad.end(), T(0));
    }
}

// One AdamW update over `params` using their accumulated .grad. If any
// gradient element is non-finite the step is skipped entirely (state and
// weights untouched) and false is returned.
template <typename T>
bool adam_step(const std::vector<TensorRef<T>>& params, AdamState<T>& state,
               const AdamConfig& cfg = {}) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i]->size(), T(0));
            state.v[i].assign(params[i]->size(), T(0));
        }
    }
    require(state.m.size() == params.size(), "adam_step: state/parameter count mismatch");

    for (const auto& p : params) {
        p->ensure_grad();
        for (T g : p->grad)
            if (!std::isfinite(g)) return false;
    }

    state.t += 1;
    const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.t)));
    const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.t)));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
    const T wd = static_cast<T>(cfg.weight_decay);
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        require(static_cast<int64_t>(state.m[i].size()) == p.size(),
                "adam_step: state size mismatch for parameter " + std::to_string(i));
        for (int64_t j = 0; j < p.size(); ++j) {
            T g = p.grad[j];
            state.m[i][j] = b1 * state.m[i][j] + (T(1) - b1) * g;
            state.v[i][j] = b2 * state.v[i][j] + (T(1) - b2) * g * g;
            T mhat = state.m[i][j] / bc1;
            T vhat = state.v[i][j] / bc2;
            p.value[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p.value[j]);
        }
    }
    return true;
}

} // namespace irid
