#pragma once

#include <cmath>
#include <string>

#include "irid/tensor/ops.hpp"

namespace irid {

// Central-difference check of reverse-mode gradients. `build` constructs the
// graph on a fresh tape from the current parameter values and returns a
// scalar loss; it must not mutate the parameters. Returns the worst relative
// error | analytic - numeric | / max(|analytic|, |numeric|, 1e-6) over every
// element of every parameter.
template <typename T, typename F>
T grad_check_max_err(const std::vector<TensorRef<T>>& params, F&& build, T h = T(1e-5)) {
    for (const auto& p : params)
        require(p->requires_grad, "grad_check: parameter does not track gradients");

    // analytic pass (clearing any gradients left over from earlier passes)
    for (const auto& p : params) {
        p->ensure_grad();
        std::fill(p->grad.begin(), p->grad.end(), T(0));
    }
    {
        Tape<T> tape;
        auto loss = build(tape);
        require(loss->size() == 1, "grad_check: loss must be scalar");
        tape.backward(loss);
    }
    std::vector<std::vector<T>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) {
        p->ensure_grad();
        analytic.push_back(p->grad);
    }

    auto eval = [&]() -> T {
        Tape<T> tape;
        auto loss = build(tape);
        return loss->value[0];
    };

    T worst = 0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        for (int64_t i = 0; i < p->size(); ++i) {
            const T saved = p->value[i];
            p->value[i] = saved + h;
            T fp = eval();
            p->value[i] = saved - h;
            T fm = eval();
            p->value[i] = saved;
            T numeric = (fp - fm) / (2 * h);
            T a = analytic[pi][i];
            T rel = std::abs(a - numeric) /
                    std::max({std::abs(a), std::abs(numeric), T(1e-6)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

template <typename T, typename F>
bool grad_check(const std::vector<TensorRef<T>>& params, F&& build, T h = T(1e-5),
                T tol = T(1e-4)) {
    return grad_check_max_err(params, std::forward<F>(build), h) <= tol;
}

} // namespace irid
