#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "irid/tensor/blas.hpp"
#include "irid/tensor/tensor.hpp"

namespace irid {

// Reverse-mode tape: ops append backward closures in execution order;
// backward() seeds the scalar loss gradient and replays them once, in
// reverse. Single-threaded by contract.
template <typename T>
class Tape {
  public:
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    void backward(const TensorRef<T>& loss) {
        require(loss->size() == 1, "backward: loss must be scalar, got " + shape_str(loss->shape));
        loss->ensure_grad();
        loss->grad[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

  private:
    std::vector<std::function<void()>> nodes_;
};

// Thread-local switch: while disabled, ops produce plain values (no tape
// closures, outputs never require grad). Used by inference to keep
// intermediate activations from accumulating on the tape.
class GradMode {
  public:
    static bool& enabled() {
        static thread_local bool on = true;
        return on;
    }
};

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(GradMode::enabled()) { GradMode::enabled() = false; }
    ~NoGradGuard() { GradMode::enabled() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace tensor_detail {

template <typename T>
bool wants_grad(const TensorRef<T>& t) {
    return GradMode::enabled() && t->requires_grad;
}

template <typename T, typename... Rest>
bool wants_grad(const TensorRef<T>& t, const Rest&... rest) {
    return GradMode::enabled() && (t->requires_grad || wants_grad(rest...));
}

// Spatial geometry of one conv direction (used forward by conv2d and in
// reverse by tconv2d).
struct ConvGeom {
    int h = 0, w = 0;       // image size the columns gather from
    int oh = 0, ow = 0;     // number of gather positions
    int k = 1, stride = 1;
    int pad_t = 0, pad_l = 0;
};

inline ConvGeom same_pad_geom(int h, int w, int k, int stride) {
    ConvGeom g;
    g.h = h;
    g.w = w;
    g.k = k;
    g.stride = stride;
    g.oh = (h + stride - 1) / stride;
    g.ow = (w + stride - 1) / stride;
    g.pad_t = std::max((g.oh - 1) * stride + k - h, 0) / 2;
    g.pad_l = std::max((g.ow - 1) * stride + k - w, 0) / 2;
    return g;
}

// src: (c, h, w) -> dst: (c*k*k, oh*ow)
template <typename T>
void im2col(const T* src, int c, const ConvGeom& g, T* dst) {
    const int ohw = g.oh * g.ow;
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < g.k; ++ky)
            for (int kx = 0; kx < g.k; ++kx) {
                T* row = dst + ((static_cast<int64_t>(ci) * g.k + ky) * g.k + kx) * ohw;
                for (int oy = 0; oy < g.oh; ++oy) {
                    int iy = oy * g.stride + ky - g.pad_t;
                    const T* src_row = src + (static_cast<int64_t>(ci) * g.h + iy) * g.w;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        int ix = ox * g.stride + kx - g.pad_l;
                        bool in = iy >= 0 && iy < g.h && ix >= 0 && ix < g.w;
                        row[oy * g.ow + ox] = in ? src_row[ix] : T(0);
                    }
                }
            }
}

// adjoint of im2col: scatter-add columns back into (c, h, w)
template <typename T>
void col2im(const T* cols, int c, const ConvGeom& g, T* dst) {
    const int ohw = g.oh * g.ow;
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < g.k; ++ky)
            for (int kx = 0; kx < g.k; ++kx) {
                const T* row = cols + ((static_cast<int64_t>(ci) * g.k + ky) * g.k + kx) * ohw;
                for (int oy = 0; oy < g.oh; ++oy) {
                    int iy = oy * g.stride + ky - g.pad_t;
                    if (iy < 0 || iy >= g.h) continue;
                    T* dst_row = dst + (static_cast<int64_t>(ci) * g.h + iy) * g.w;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        int ix = ox * g.stride + kx - g.pad_l;
                        if (ix >= 0 && ix < g.w) dst_row[ix] += row[oy * g.ow + ox];
                    }
                }
            }
}

} // namespace tensor_detail

// ---------------------------------------------------------------- elementwise

template <typename T>
TensorRef<T> add(Tape<T>& tape, const TensorRef<T>& a, const TensorRef<T>& b) {
    require(a->shape == b->shape,
            "add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = make_tensor<T>(a->shape, tensor_detail::wants_grad(a, b));
    for (int64_t i = 0; i < a->size(); ++i) out->value[i] = a->value[i] + b->value[i];
    if (out->requires_grad)
        tape.record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int64_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int64_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[i];
            }
        });
    return out;
}

template <typename T>
TensorRef<T> sub(Tape<T>& tape, const TensorRef<T>& a, const TensorRef<T>& b) {
    require(a->shape == b->shape,
            "sub: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = make_tensor<T>(a->shape, tensor_detail::wants_grad(a, b));
    for (int64_t i = 0; i < a->size(); ++i) out->value[i] = a->value[i] - b->value[i];
    if (out->requires_grad)
        tape.record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int64_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int64_t i = 0; i < b->size(); ++i) b->grad[i] -= out->grad[i];
            }
        });
    return out;
}

template <typename T>
TensorRef<T> mul(Tape<T>& tape, const TensorRef<T>& a, const TensorRef<T>& b) {
    require(a->shape == b->shape,
            "mul: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = make_tensor<T>(a->shape, tensor_detail::wants_grad(a, b));
    for (int64_t i = 0; i < a->size(); ++i) out->value[i] = a->value[i] * b->value[i];
    if (out->requires_grad)
        tape.record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int64_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * b->value[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int64_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[i] * a->value[i];
            }
        });
    return out;
}

// y = alpha * x + beta (scalar coefficients)
template <typename T>
TensorRef<T> affine(Tape<T>& tape, const TensorRef<T>& x, T alpha, T beta) {
    auto out = make_tensor<T>(x->shape, tensor_detail::wants_grad(x));
    for (int64_t i = 0; i < x->size(); ++i) out->value[i] = alpha * x->value[i] + beta;
    if (out->requires_grad)
        tape.record([x, out, alpha] {
            x->ensure_grad();
            for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += alpha * out->grad[i];
        });
    return out;
}

template <typename T>
TensorRef<T> silu(Tape<T>& tape, const TensorRef<T>& x) {
    auto out = make_tensor<T>(x->shape, tensor_detail::wants_grad(x));
    for (int64_t i = 0; i < x->size(); ++i) {
        T s = T(1) / (T(1) + std::exp(-x->value[i]));
        out->value[i] = x->value[i] * s;
    }
    if (out->requires_grad)
        tape.record([x, out] {
            x->ensure_grad();
            for (int64_t i = 0; i < x->size(); ++i) {
                T s = T(1) / (T(1) + std::exp(-x->value[i]));
                x->grad[i] += out->grad[i] * s * (T(1) + x->value[i] * (T(1) - s));
            }
        });
    return out;
}

template <typename T>
TensorRef<T> relu(Tape<T>& tape, const TensorRef<T>& x) {
    auto out = make_tensor<T>(x->shape, tensor_detail::wants_grad(x));
    for (int64_t i = 0; i < x->size(); ++i) out->value[i] = std::max(x->value[i], T(0));
    if (out->requires_grad)
        tape.record([x, out] {
            x->ensure_grad();
            for (int64_t i = 0; i < x->size(); ++i)
                if (x->value[i] > T(0)) x->grad[i] += out->grad[i];
        });
    return out;
}

template <typename T>
TensorRef<T> sigmoid(Tape<T>& tape, const TensorRef<T>& x) {
    auto out = make_tensor<T>(x->shape, tensor_detail::wants_grad(x));
    for (int64_t i = 0; i < x->size(); ++i)
        out->value[i] = T(1) / (T(1) + std::exp(-x->value[i]));
    if (out->requires_grad)
        tape.record([x, out] {
            x->ensure_grad();
            for (int64_t i = 0; i < x->size(); ++i) {
                T s = out->value[i];
                x->grad[i] += out->grad[i] * s * (T(1) - s);
            }
        });
    return out;
}

// y = log(1 + e^x), evaluated in the overflow-safe branch form
template <typename T>
TensorRef<T> softplus(Tape<T>& tape, const TensorRef<T>& x) {
    auto out = make_tensor<T>(x->shape, tensor_detail::wants_grad(x));
    for (int64_t i = 0; i < x->size(); ++i) {
        T v = x->value[i];
        out->value[i] = v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    }
    if (out->requires_grad)
        tape.record([x, out] {
            x->ensure_grad();
            for (int64_t i = 0; i < x->size(); ++i)
                x->grad[i] += out->grad[i] / (T(1) + std::exp(-x->value[i]));
        });
    return out;
}

// ---------------------------------------------------------------- reductions

template <typename T>
TensorRef<T> sum(Tape<T>& tape, const TensorRef<T>& x) {
    auto out = make_tensor<T>(Shape{1}, tensor_detail::wants_grad(x));
    T acc = 0;
    for (T v : x->value) acc += v;
    out->value[0] = acc;
    if (out->requires_grad)
        tape.record([x, out] {
            x->ensure_grad();
            for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[0];
        });
    return out;
}

template <typename T>
TensorRef<T> mean(Tape<T>& tape, const TensorRef<T>& x) {
    auto out = make_tensor<T>(Shape{1}, tensor_detail::wants_grad(x));
    T acc = 0;
    for (T v : x->value) acc += v;
    T inv = T(1) / static_cast<T>(x->size());
    out->value[0] = acc * inv;
    if (out->requires_grad)
        tape.record([x, out, inv] {
            x->ensure_grad();
            for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[0] * inv;
        });
    return out;
}

// ---------------------------------------------------------------- shape ops

template <typename T>
TensorRef<T> reshape(Tape<T>& tape, const TensorRef<T>& x, Shape shape) {
    require(numel(shape) == x->size(), "reshape: cannot view " + shape_str(x->shape) + " as " +
                                           shape_str(shape) + " (element count differs)");
    auto out = make_tensor<T>(std::move(shape), tensor_detail::wants_grad(x));
    out->value = x->value;
    if (out->requires_grad)
        tape.record([x, out] {
            x->ensure_grad();
            for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
        });
    return out;
}

template <typename T>
TensorRef<T> permute(Tape<T>& tape, const TensorRef<T>& x, const std::vector<int>& axes) {
    const int nd = x->ndim();
    require(static_cast<int>(axes.size()) == nd, "permute: axes rank mismatch for " +
                                                     shape_str(x->shape));
    std::vector<bool> seen(nd, false);
    Shape out_shape(nd);
    for (int j = 0; j < nd; ++j) {
        require(axes[j] >= 0 && axes[j] < nd && !seen[axes[j]], "permute: invalid axes");
        seen[axes[j]] = true;
        out_shape[j] = x->shape[axes[j]];
    }
    auto out = make_tensor<T>(out_shape, tensor_detail::wants_grad(x));
    auto in_strides = strides_of(x->shape);
    auto out_strides = strides_of(out_shape);
    // in_index = sum over j of out_coord[j] * in_strides[axes[j]]
    std::vector<int64_t> map_stride(nd);
    for (int j = 0; j < nd; ++j) map_stride[j] = in_strides[axes[j]];
    const int64_t n = x->size();
    for (int64_t o = 0; o < n; ++o) {
        int64_t rem = o, idx = 0;
        for (int j = 0; j < nd; ++j) {
            int64_t c = rem / out_strides[j];
            rem -= c * out_strides[j];
            idx += c * map_stride[j];
        }
        out->value[o] = x->value[idx];
    }
    if (out->requires_grad)
        tape.record([x, out, out_strides, map_stride, nd, n] {
            x->ensure_grad();
            for (int64_t o = 0; o < n; ++o) {
                int64_t rem = o, idx = 0;
                for (int j = 0; j < nd; ++j) {
                    int64_t c = rem / out_strides[j];
                    rem -= c * out_strides[j];
                    idx += c * map_stride[j];
                }
                x->grad[idx] += out->grad[o];
            }
        });
    return out;
}

template <typename T>
TensorRef<T> broadcast_to(Tape<T>& tape, const TensorRef<T>& x, Shape shape) {
    const int nd = static_cast<int>(shape.size());
    const int xd = x->ndim();
    require(xd <= nd, "broadcast: rank of " + shape_str(x->shape) + " exceeds " + shape_str(shape));
    // align trailing dims; leading dims of x implicitly 1
    std::vector<int64_t> in_strides_full(nd, 0);
    auto in_strides = strides_of(x->shape);
    for (int j = 0; j < xd; ++j) {
        int out_j = nd - xd + j;
        if (x->shape[j] == shape[out_j]) in_strides_full[out_j] = in_strides[j];
        else
            require(x->shape[j] == 1, "broadcast: dim " + std::to_string(j) + " of " +
                                          shape_str(x->shape) + " incompatible with " +
                                          shape_str(shape));
    }
    auto out = make_tensor<T>(shape, tensor_detail::wants_grad(x));
    auto out_strides = strides_of(shape);
    const int64_t n = out->size();
    for (int64_t o = 0; o < n; ++o) {
        int64_t rem = o, idx = 0;
        for (int j = 0; j < nd; ++j) {
            int64_t c = rem / out_strides[j];
            rem -= c * out_strides[j];
            idx += c * in_strides_full[j];
        }
        out->value[o] = x->value[idx];
    }
    if (out->requires_grad)
        tape.record([x, out, out_strides, in_strides_full, nd, n] {
            x->ensure_grad();
            for (int64_t o = 0; o < n; ++o) {
                int64_t rem = o, idx = 0;
                for (int j = 0; j < nd; ++j) {
                    int64_t c = rem / out_strides[j];
                    rem -= c * out_strides[j];
                    idx += c * in_strides_full[j];
                }
                x->grad[idx] += out->grad[o];
            }
        });
    return out;
}

template <typename T>
TensorRef<T> concat(Tape<T>& tape, const std::vector<TensorRef<T>>& xs, int axis) {
    require(!xs.empty(), "concat: no inputs");
    const int nd = xs[0]->ndim();
    require(axis >= 0 && axis < nd, "concat: axis out of range");
    Shape out_shape = xs[0]->shape;
    out_shape[axis] = 0;
    bool any_grad = false;
    for (const auto& x : xs) {
        require(x->ndim() == nd, "concat: rank mismatch");
        for (int j = 0; j < nd; ++j)
            require(j == axis || x->shape[j] == xs[0]->shape[j],
                    "concat: shape mismatch " + shape_str(x->shape) + " vs " +
                        shape_str(xs[0]->shape));
        out_shape[axis] += x->shape[axis];
        any_grad = any_grad || tensor_detail::wants_grad(x);
    }
    auto out = make_tensor<T>(out_shape, any_grad);
    int64_t outer = 1, inner = 1;
    for (int j = 0; j < axis; ++j) outer *= out_shape[j];
    for (int j = axis + 1; j < nd; ++j) inner *= out_shape[j];
    const int64_t out_block = static_cast<int64_t>(out_shape[axis]) * inner;
    int64_t offset = 0;
    for (const auto& x : xs) {
        const int64_t blk = static_cast<int64_t>(x->shape[axis]) * inner;
        for (int64_t r = 0; r < outer; ++r)
            std::copy_n(x->value.data() + r * blk, blk, out->value.data() + r * out_block + offset);
        offset += blk;
    }
    if (any_grad)
        tape.record([xs, out, axis, outer, inner, out_block] {
            int64_t off = 0;
            for (const auto& x : xs) {
                const int64_t blk = static_cast<int64_t>(x->shape[axis]) * inner;
                if (x->requires_grad) {
                    x->ensure_grad();
                    for (int64_t r = 0; r < outer; ++r) {
                        const T* g = out->grad.data() + r * out_block + off;
                        T* dst = x->grad.data() + r * blk;
                        for (int64_t i = 0; i < blk; ++i) dst[i] += g[i];
                    }
                }
                off += blk;
            }
        });
    return out;
}

template <typename T>
TensorRef<T> slice(Tape<T>& tape, const TensorRef<T>& x, int axis, int start, int len) {
    const int nd = x->ndim();
    require(axis >= 0 && axis < nd, "slice: axis out of range");
    require(start >= 0 && len > 0 && start + len <= x->shape[axis],
            "slice: [" + std::to_string(start) + "," + std::to_string(start + len) +
                ") out of bounds for " + shape_str(x->shape));
    Shape out_shape = x->shape;
    out_shape[axis] = len;
    auto out = make_tensor<T>(out_shape, tensor_detail::wants_grad(x));
    int64_t outer = 1, inner = 1;
    for (int j = 0; j < axis; ++j) outer *= x->shape[j];
    for (int j = axis + 1; j < nd; ++j) inner *= x->shape[j];
    const int64_t in_block = static_cast<int64_t>(x->shape[axis]) * inner;
    const int64_t out_block = static_cast<int64_t>(len) * inner;
    for (int64_t r = 0; r < outer; ++r)
        std::copy_n(x->value.data() + r * in_block + start * inner, out_block,
                    out->value.data() + r * out_block);
    if (out->requires_grad)
        tape.record([x, out, outer, inner, in_block, out_block, start] {
            x->ensure_grad();
            for (int64_t r = 0; r < outer; ++r) {
                const T* g = out->grad.data() + r * out_block;
                T* dst = x->grad.data() + r * in_block + start * inner;
                for (int64_t i = 0; i < out_block; ++i) dst[i] += g[i];
            }
        });
    return out;
}

// ---------------------------------------------------------------- softmax

template <typename T>
TensorRef<T> softmax(Tape<T>& tape, const TensorRef<T>& x, int axis) {
    const int nd = x->ndim();
    if (axis < 0) axis += nd;
    require(axis >= 0 && axis < nd, "softmax: axis out of range for " + shape_str(x->shape));
    auto out = make_tensor<T>(x->shape, tensor_detail::wants_grad(x));
    int64_t outer = 1, inner = 1;
    const int len = x->shape[axis];
    for (int j = 0; j < axis; ++j) outer *= x->shape[j];
    for (int j = axis + 1; j < nd; ++j) inner *= x->shape[j];
    for (int64_t r = 0; r < outer; ++r)
        for (int64_t c = 0; c < inner; ++c) {
            const int64_t base = r * len * inner + c;
            T mx = x->value[base];
            for (int i = 1; i < len; ++i) mx = std::max(mx, x->value[base + i * inner]);
            T denom = 0;
            for (int i = 0; i < len; ++i) {
                T e = std::exp(x->value[base + i * inner] - mx);
                out->value[base + i * inner] = e;
                denom += e;
            }
            T inv = T(1) / denom;
            for (int i = 0; i < len; ++i) out->value[base + i * inner] *= inv;
        }
    if (out->requires_grad)
        tape.record([x, out, outer, inner, len] {
            x->ensure_grad();
            for (int64_t r = 0; r < outer; ++r)
                for (int64_t c = 0; c < inner; ++c) {
                    const int64_t base = r * len * inner + c;
                    T dot = 0;
                    for (int i = 0; i < len; ++i)
                        dot += out->value[base + i * inner] * out->grad[base + i * inner];
                    for (int i = 0; i < len; ++i) {
                        const int64_t idx = base + i * inner;
                        x->grad[idx] += out->value[idx] * (out->grad[idx] - dot);
                    }
                }
        });
    return out;
}

// ---------------------------------------------------------------- matmul

// (M,K) x (K,N) -> (M,N)
template <typename T>
TensorRef<T> matmul(Tape<T>& tape, const TensorRef<T>& a, const TensorRef<T>& b) {
    require(a->ndim() == 2 && b->ndim() == 2 && a->shape[1] == b->shape[0],
            "matmul: incompatible " + shape_str(a->shape) + " x " + shape_str(b->shape));
    const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
    auto out = make_tensor<T>(Shape{m, n}, tensor_detail::wants_grad(a, b));
    gemm(false, false, m, n, k, T(1), a->value.data(), k, b->value.data(), n, T(0),
         out->value.data(), n);
    if (out->requires_grad)
        tape.record([a, b, out, m, n, k] {
            if (a->requires_grad) {
                a->ensure_grad();
                // dA += dY * B^T
                gemm(false, true, m, k, n, T(1), out->grad.data(), n, b->value.data(), n, T(1),
                     a->grad.data(), k);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                // dB += A^T * dY
                gemm(true, false, k, n, m, T(1), a->value.data(), k, out->grad.data(), n, T(1),
                     b->grad.data(), n);
            }
        });
    return out;
}

// Batched matmul with transpose flags: a is (B,M,K) or (B,K,M) when trans_a.
template <typename T>
TensorRef<T> bmm(Tape<T>& tape, const TensorRef<T>& a, const TensorRef<T>& b,
                 bool trans_a = false, bool trans_b = false) {
    require(a->ndim() == 3 && b->ndim() == 3 && a->shape[0] == b->shape[0],
            "bmm: incompatible " + shape_str(a->shape) + " x " + shape_str(b->shape));
    const int batch = a->shape[0];
    const int m = trans_a ? a->shape[2] : a->shape[1];
    const int ka = trans_a ? a->shape[1] : a->shape[2];
    const int kb = trans_b ? b->shape[2] : b->shape[1];
    const int n = trans_b ? b->shape[1] : b->shape[2];
    require(ka == kb, "bmm: inner dims differ: " + shape_str(a->shape) + " x " +
                          shape_str(b->shape));
    const int k = ka;
    auto out = make_tensor<T>(Shape{batch, m, n}, tensor_detail::wants_grad(a, b));
    const int lda = a->shape[2], ldb = b->shape[2];
    const int64_t sa = static_cast<int64_t>(a->shape[1]) * a->shape[2];
    const int64_t sb = static_cast<int64_t>(b->shape[1]) * b->shape[2];
    const int64_t so = static_cast<int64_t>(m) * n;
    for (int i = 0; i < batch; ++i)
        gemm(trans_a, trans_b, m, n, k, T(1), a->value.data() + i * sa, lda,
             b->value.data() + i * sb, ldb, T(0), out->value.data() + i * so, n);
    if (out->requires_grad)
        tape.record([a, b, out, trans_a, trans_b, batch, m, n, k, lda, ldb, sa, sb, so] {
            for (int i = 0; i < batch; ++i) {
                const T* ga = a->value.data() + i * sa;
                const T* gb = b->value.data() + i * sb;
                const T* gy = out->grad.data() + i * so;
                if (a->requires_grad) {
                    a->ensure_grad();
                    T* da = a->grad.data() + i * sa;
                    if (!trans_a) {
                        // dOpA = dY * OpB^T, stored directly
                        if (!trans_b) gemm(false, true, m, k, n, T(1), gy, n, gb, ldb, T(1), da, lda);
                        else gemm(false, false, m, k, n, T(1), gy, n, gb, ldb, T(1), da, lda);
                    } else {
                        // dA = (dOpA)^T = OpB * dY^T, stored (k, m)
                        if (!trans_b) gemm(false, true, k, m, n, T(1), gb, ldb, gy, n, T(1), da, lda);
                        else gemm(true, true, k, m, n, T(1), gb, ldb, gy, n, T(1), da, lda);
                    }
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    T* db = b->grad.data() + i * sb;
                    if (!trans_b) {
                        // dOpB = OpA^T * dY, stored (k, n)
                        if (!trans_a) gemm(true, false, k, n, m, T(1), ga, lda, gy, n, T(1), db, ldb);
                        else gemm(false, false, k, n, m, T(1), ga, lda, gy, n, T(1), db, ldb);
                    } else {
                        // dB = (dOpB)^T = dY^T * OpA, stored (n, k)
                        if (!trans_a) gemm(true, false, n, k, m, T(1), gy, n, ga, lda, T(1), db, ldb);
                        else gemm(true, true, n, k, m, T(1), gy, n, ga, lda, T(1), db, ldb);
                    }
                }
            }
        });
    return out;
}

// ------------------------------------------------------- fixed-pattern lookups

// Weighted gather with a fixed tap pattern: out[p, :] = sum_k w[p*k_taps + j] *
// x[idx[p*k_taps + j], :]. The taps (idx, w) are data, not graph nodes — only x
// carries gradient (backward is the scatter-add adjoint). Used for bilinear
// texture lookups whose coordinates are known constants.
template <typename T>
TensorRef<T> gather_weighted(Tape<T>& tape, const TensorRef<T>& x, const std::vector<int>& idx,
                             const std::vector<T>& w, int k_taps) {
    require(x->ndim() == 2, "gather_weighted: x must be 2-D, got " + shape_str(x->shape));
    require(k_taps > 0 && idx.size() == w.size() && idx.size() % k_taps == 0,
            "gather_weighted: idx/w must hold the same whole number of " +
                std::to_string(k_taps) + "-tap rows");
    const int rows = x->shape[0], c = x->shape[1];
    const int p = static_cast<int>(idx.size()) / k_taps;
    for (int i : idx)
        require(i >= 0 && i < rows,
                "gather_weighted: tap index " + std::to_string(i) + " outside 0.." +
                    std::to_string(rows - 1));
    auto out = make_tensor<T>(Shape{p, c}, tensor_detail::wants_grad(x));
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < k_taps; ++j) {
            const T wt = w[static_cast<size_t>(i) * k_taps + j];
            const T* src = x->value.data() + static_cast<int64_t>(idx[i * k_taps + j]) * c;
            T* dst = out->value.data() + static_cast<int64_t>(i) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += wt * src[ch];
        }
    if (out->requires_grad)
        tape.record([x, out, idx, w, k_taps, p, c] {
            x->ensure_grad();
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < k_taps; ++j) {
                    const T wt = w[static_cast<size_t>(i) * k_taps + j];
                    T* dst = x->grad.data() + static_cast<int64_t>(idx[i * k_taps + j]) * c;
                    const T* src = out->grad.data() + static_cast<int64_t>(i) * c;
                    for (int ch = 0; ch < c; ++ch) dst[ch] += wt * src[ch];
                }
        });
    return out;
}

// Per-row 1-D table lookup with linear interpolation: row p of `table` holds
// k_bins samples on a uniform grid; the lookup coordinate is
// y = q[p] * scale + offset, with the same edge clamping as a clamped texture
// fetch (y <= 0 reads bin 0, y >= k_bins-1 reads the last bin). The table is
// data; gradient flows through q with slope (t[y0+1] - t[y0]) * scale on the
// interior and 0 where clamped.
template <typename T>
TensorRef<T> interp_rows(Tape<T>& tape, const std::vector<T>& table, int k_bins,
                         const TensorRef<T>& q, T scale, T offset) {
    require(k_bins > 0 && table.size() % k_bins == 0,
            "interp_rows: table must hold whole rows of " + std::to_string(k_bins) + " bins");
    const int p = static_cast<int>(table.size()) / k_bins;
    require(q->size() == p, "interp_rows: query size " + std::to_string(q->size()) +
                                " does not match " + std::to_string(p) + " table rows");
    auto out = make_tensor<T>(Shape{p, 1}, tensor_detail::wants_grad(q));
    std::vector<T> slope(out->requires_grad ? p : 0);
    for (int i = 0; i < p; ++i) {
        const T* row = table.data() + static_cast<size_t>(i) * k_bins;
        T y = q->value[i] * scale + offset;
        int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, k_bins - 1);
        int y1 = std::min(y0 + 1, k_bins - 1);
        T f = std::clamp(y - static_cast<T>(y0), T(0), T(1));
        out->value[i] = row[y0] + (row[y1] - row[y0]) * f;
        if (out->requires_grad) {
            bool interior = y > T(0) && y < static_cast<T>(k_bins - 1);
            slope[i] = interior ? (row[y1] - row[y0]) * scale : T(0);
        }
    }
    if (out->requires_grad)
        tape.record([q, out, slope = std::move(slope), p] {
            q->ensure_grad();
            for (int i = 0; i < p; ++i) q->grad[i] += out->grad[i] * slope[i];
        });
    return out;
}

// ---------------------------------------------------------------- conv

// x: (B, Cin, H, W), w: (Cout, Cin, k, k), stride 1 or 2, "same" padding.
template <typename T>
TensorRef<T> conv2d(Tape<T>& tape, const TensorRef<T>& x, const TensorRef<T>& w, int stride = 1) {
    require(x->ndim() == 4 && w->ndim() == 4 && x->shape[1] == w->shape[1],
            "conv2d: incompatible input " + shape_str(x->shape) + " and weight " +
                shape_str(w->shape));
    require(w->shape[2] == w->shape[3], "conv2d: kernel must be square, got " +
                                            shape_str(w->shape));
    require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
    const int bsz = x->shape[0], cin = x->shape[1], h = x->shape[2], wd = x->shape[3];
    const int cout = w->shape[0], k = w->shape[2];
    auto g = tensor_detail::same_pad_geom(h, wd, k, stride);
    const int64_t ckk = static_cast<int64_t>(cin) * k * k;
    const int64_t ohw = static_cast<int64_t>(g.oh) * g.ow;
    auto out = make_tensor<T>(Shape{bsz, cout, g.oh, g.ow}, tensor_detail::wants_grad(x, w));
    {
        std::vector<T> col(ckk * ohw);
        for (int i = 0; i < bsz; ++i) {
            tensor_detail::im2col(x->value.data() + i * cin * static_cast<int64_t>(h) * wd, cin, g,
                                  col.data());
            gemm(false, false, cout, static_cast<int>(ohw), static_cast<int>(ckk), T(1),
                 w->value.data(), static_cast<int>(ckk), col.data(), static_cast<int>(ohw), T(0),
                 out->value.data() + i * cout * ohw, static_cast<int>(ohw));
        }
    }
    if (out->requires_grad)
        tape.record([x, w, out, g, bsz, cin, cout, h, wd, k, ckk, ohw] {
            std::vector<T> col(ckk * ohw);
            std::vector<T> dcol(x->requires_grad ? ckk * ohw : 0);
            if (x->requires_grad) x->ensure_grad();
            if (w->requires_grad) w->ensure_grad();
            for (int i = 0; i < bsz; ++i) {
                const T* gy = out->grad.data() + i * cout * ohw;
                if (w->requires_grad) {
                    tensor_detail::im2col(x->value.data() + i * cin * static_cast<int64_t>(h) * wd,
                                          cin, g, col.data());
                    // dW += dY * col^T
                    gemm(false, true, cout, static_cast<int>(ckk), static_cast<int>(ohw), T(1), gy,
                         static_cast<int>(ohw), col.data(), static_cast<int>(ohw), T(1),
                         w->grad.data(), static_cast<int>(ckk));
                }
                if (x->requires_grad) {
                    // dcol = W^T * dY, then scatter back
                    gemm(true, false, static_cast<int>(ckk), static_cast<int>(ohw), cout, T(1),
                         w->value.data(), static_cast<int>(ckk), gy, static_cast<int>(ohw), T(0),
                         dcol.data(), static_cast<int>(ohw));
                    tensor_detail::col2im(dcol.data(), cin, g,
                                          x->grad.data() + i * cin * static_cast<int64_t>(h) * wd);
                }
            }
        });
    return out;
}

// Transposed conv: x (B, Cin, H, W), w (Cin, Cout, k, k);
// output (B, Cout, s*(H-1)+k-2p, ...). The forward pass is the adjoint of a
// conv2d that maps the output size back to the input size.
template <typename T>
TensorRef<T> tconv2d(Tape<T>& tape, const TensorRef<T>& x, const TensorRef<T>& w, int stride,
                     int pad) {
    require(x->ndim() == 4 && w->ndim() == 4 && x->shape[1] == w->shape[0],
            "tconv2d: incompatible input " + shape_str(x->shape) + " and weight " +
                shape_str(w->shape));
    require(w->shape[2] == w->shape[3], "tconv2d: kernel must be square");
    const int bsz = x->shape[0], cin = x->shape[1], h = x->shape[2], wd = x->shape[3];
    const int cout = w->shape[1], k = w->shape[2];
    const int oh = stride * (h - 1) + k - 2 * pad;
    const int ow = stride * (wd - 1) + k - 2 * pad;
    require(oh > 0 && ow > 0, "tconv2d: non-positive output size");
    // reverse-direction geometry: gather from (oh, ow) at h*wd positions
    tensor_detail::ConvGeom g;
    g.h = oh;
    g.w = ow;
    g.oh = h;
    g.ow = wd;
    g.k = k;
    g.stride = stride;
    g.pad_t = pad;
    g.pad_l = pad;
    const int64_t ckk = static_cast<int64_t>(cout) * k * k;
    const int64_t hw = static_cast<int64_t>(h) * wd;
    const int64_t out_hw = static_cast<int64_t>(oh) * ow;
    auto out = make_tensor<T>(Shape{bsz, cout, oh, ow}, tensor_detail::wants_grad(x, w));
    {
        std::vector<T> rows(ckk * hw);
        for (int i = 0; i < bsz; ++i) {
            // rows = W^T x_b : (cout*k*k, h*w)
            gemm(true, false, static_cast<int>(ckk), static_cast<int>(hw), cin, T(1),
                 w->value.data(), static_cast<int>(ckk), x->value.data() + i * cin * hw,
                 static_cast<int>(hw), T(0), rows.data(), static_cast<int>(hw));
            tensor_detail::col2im(rows.data(), cout, g, out->value.data() + i * cout * out_hw);
        }
    }
    if (out->requires_grad)
        tape.record([x, w, out, g, bsz, cin, cout, ckk, hw, out_hw] {
            std::vector<T> dcol(ckk * hw);
            if (x->requires_grad) x->ensure_grad();
            if (w->requires_grad) w->ensure_grad();
            for (int i = 0; i < bsz; ++i) {
                tensor_detail::im2col(out->grad.data() + i * cout * out_hw, cout, g, dcol.data());
                if (x->requires_grad)
                    // dX += W * dcol : (cin, h*w)
                    gemm(false, false, cin, static_cast<int>(hw), static_cast<int>(ckk), T(1),
                         w->value.data(), static_cast<int>(ckk), dcol.data(), static_cast<int>(hw),
                         T(1), x->grad.data() + i * cin * hw, static_cast<int>(hw));
                if (w->requires_grad)
                    // dW += X * dcol^T : (cin, cout*k*k)
                    gemm(false, true, cin, static_cast<int>(ckk), static_cast<int>(hw), T(1),
                         x->value.data() + i * cin * hw, static_cast<int>(hw), dcol.data(),
                         static_cast<int>(hw), T(1), w->grad.data(), static_cast<int>(ckk));
            }
        });
    return out;
}

// ---------------------------------------------------------------- group norm

// x: (B, C, H, W); gamma/beta: (C). Normalizes over each of `groups` channel
// groups jointly with the spatial dims.
template <typename T>
TensorRef<T> group_norm(Tape<T>& tape, const TensorRef<T>& x, const TensorRef<T>& gamma,
                        const TensorRef<T>& beta, int groups, T eps = T(1e-5)) {
    require(x->ndim() == 4, "group_norm: input must be (B,C,H,W), got " + shape_str(x->shape));
    const int bsz = x->shape[0], c = x->shape[1], h = x->shape[2], wd = x->shape[3];
    require(groups >= 1 && c % groups == 0, "group_norm: channels " + std::to_string(c) +
                                                " not divisible by groups " +
                                                std::to_string(groups));
    require(gamma->shape == Shape{c} && beta->shape == Shape{c},
            "group_norm: gamma/beta must be (C)");
    const int cg = c / groups;
    const int64_t hw = static_cast<int64_t>(h) * wd;
    const int64_t gsz = cg * hw;
    auto out = make_tensor<T>(x->shape, tensor_detail::wants_grad(x, gamma, beta));
    // saved normalized activations and per-group inverse stddev for backward
    auto y_hat = std::make_shared<std::vector<T>>(x->value.size());
    auto inv_sd = std::make_shared<std::vector<T>>(static_cast<size_t>(bsz) * groups);
    for (int b = 0; b < bsz; ++b)
        for (int gi = 0; gi < groups; ++gi) {
            const int64_t base = (static_cast<int64_t>(b) * c + gi * cg) * hw;
            T mu = 0;
            for (int64_t i = 0; i < gsz; ++i) mu += x->value[base + i];
            mu /= static_cast<T>(gsz);
            T var = 0;
            for (int64_t i = 0; i < gsz; ++i) {
                T d = x->value[base + i] - mu;
                var += d * d;
            }
            var /= static_cast<T>(gsz);
            T inv = T(1) / std::sqrt(var + eps);
            (*inv_sd)[b * groups + gi] = inv;
            for (int64_t i = 0; i < gsz; ++i) {
                T yh = (x->value[base + i] - mu) * inv;
                (*y_hat)[base + i] = yh;
                int ch = gi * cg + static_cast<int>(i / hw);
                out->value[base + i] = gamma->value[ch] * yh + beta->value[ch];
            }
        }
    if (out->requires_grad)
        tape.record([x, gamma, beta, out, y_hat, inv_sd, bsz, c, groups, cg, hw, gsz] {
            if (x->requires_grad) x->ensure_grad();
            if (gamma->requires_grad) gamma->ensure_grad();
            if (beta->requires_grad) beta->ensure_grad();
            for (int b = 0; b < bsz; ++b)
                for (int gi = 0; gi < groups; ++gi) {
                    const int64_t base = (static_cast<int64_t>(b) * c + gi * cg) * hw;
                    // dL/dy_hat = dout * gamma; need its group mean and the
                    // group mean of dy_hat .* y_hat
                    T s1 = 0, s2 = 0;
                    for (int64_t i = 0; i < gsz; ++i) {
                        int ch = gi * cg + static_cast<int>(i / hw);
                        T dyh = out->grad[base + i] * gamma->value[ch];
                        s1 += dyh;
                        s2 += dyh * (*y_hat)[base + i];
                    }
                    s1 /= static_cast<T>(gsz);
                    s2 /= static_cast<T>(gsz);
                    T inv = (*inv_sd)[b * groups + gi];
                    for (int64_t i = 0; i < gsz; ++i) {
                        int ch = gi * cg + static_cast<int>(i / hw);
                        T dyh = out->grad[base + i] * gamma->value[ch];
                        if (x->requires_grad)
                            x->grad[base + i] += inv * (dyh - s1 - (*y_hat)[base + i] * s2);
                        if (gamma->requires_grad)
                            gamma->grad[ch] += out->grad[base + i] * (*y_hat)[base + i];
                        if (beta->requires_grad) beta->grad[ch] += out->grad[base + i];
                    }
                }
        });
    return out;
}

} // namespace irid
