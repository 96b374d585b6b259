#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "irid/core/error.hpp"
#include "irid/math/rng.hpp"

namespace irid {

using Shape = std::vector<int>;

inline int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

// Storage node shared by the tape: value plus an optionally-materialized
// gradient buffer of the same shape.
template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;

    int64_t size() const { return static_cast<int64_t>(value.size()); }
    int dim(int i) const { return shape[i < 0 ? shape.size() + i : i]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

template <typename T>
using TensorRef = std::shared_ptr<TensorNode<T>>;

template <typename T>
TensorRef<T> make_tensor(Shape shape, bool requires_grad = false) {
    auto t = std::make_shared<TensorNode<T>>();
    t->value.assign(numel(shape), T(0));
    t->shape = std::move(shape);
    t->requires_grad = requires_grad;
    return t;
}

template <typename T>
TensorRef<T> make_tensor(Shape shape, std::vector<T> data, bool requires_grad = false) {
    require(numel(shape) == static_cast<int64_t>(data.size()),
            "tensor: data length " + std::to_string(data.size()) + " does not match shape " +
                shape_str(shape));
    auto t = std::make_shared<TensorNode<T>>();
    t->shape = std::move(shape);
    t->value = std::move(data);
    t->requires_grad = requires_grad;
    return t;
}

template <typename T>
TensorRef<T> full_like_shape(const Shape& shape, T fill, bool requires_grad = false) {
    auto t = make_tensor<T>(shape, requires_grad);
    std::fill(t->value.begin(), t->value.end(), fill);
    return t;
}

template <typename T>
TensorRef<T> scalar_tensor(T v, bool requires_grad = false) {
    return make_tensor<T>(Shape{1}, std::vector<T>{v}, requires_grad);
}

template <typename T>
TensorRef<T> randn_tensor(Shape shape, Pcg32& rng, T stddev = T(1), bool requires_grad = false) {
    auto t = make_tensor<T>(std::move(shape), requires_grad);
    for (T& v : t->value) v = static_cast<T>(rng.next_gaussian_double()) * stddev;
    return t;
}

// Row-major strides.
inline std::vector<int64_t> strides_of(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
    return st;
}

} // namespace irid
