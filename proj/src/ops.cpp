#include "fat/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fat/kernels.hpp"

namespace fat {
namespace {

template <typename T>
bool tracking(std::initializer_list<const Tensor<T>*> inputs) {
    if (active_tape<T>() == nullptr) return false;
    for (const auto* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

template <typename T>
void record(std::function<void()> fn) {
    active_tape<T>()->record(std::move(fn));
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
    const std::size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (std::size_t i = 0; i < r; ++i) {
        const std::int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const std::int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        out[i] = da == 1 ? db : da;
    }
    return out;
}

// Strides of `s` expressed in the rank of `out`, zero on broadcast axes.
std::vector<std::int64_t> broadcast_strides(const Shape& s, const Shape& out) {
    std::vector<std::int64_t> st(out.size(), 0);
    std::int64_t acc = 1;
    for (std::size_t i = s.size(); i-- > 0;) {
        const std::size_t o = i + (out.size() - s.size());
        st[o] = s[i] == 1 ? 0 : acc;
        acc *= s[i];
    }
    return st;
}

// Calls f(out_index, offset_a, offset_b) over `out` in row-major order.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& sa,
                        const std::vector<std::int64_t>& sb, F&& f) {
    const std::size_t r = out.size();
    const std::int64_t total = numel(out);
    if (total == 0) return;
    if (r == 0) {
        f(0, 0, 0);
        return;
    }
    const std::int64_t inner = out[r - 1];
    const std::int64_t ia_step = sa[r - 1], ib_step = sb[r - 1];
    std::vector<std::int64_t> idx(r, 0);
    std::int64_t ia = 0, ib = 0;
    for (std::int64_t base = 0; base < total; base += inner) {
        for (std::int64_t j = 0; j < inner; ++j) f(base + j, ia + j * ia_step, ib + j * ib_step);
        for (std::size_t d = r - 1; d-- > 0;) {
            if (++idx[d] < out[d]) {
                ia += sa[d];
                ib += sb[d];
                break;
            }
            ia -= sa[d] * (out[d] - 1);
            ib -= sb[d] * (out[d] - 1);
            idx[d] = 0;
        }
    }
}

enum class BinaryKind { kAdd, kSub, kMul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind) {
    const bool track = tracking<T>({&a, &b});
    const auto& ad = a.node()->data;
    const auto& bd = b.node()->data;
    auto apply = [kind](T x, T y) {
        switch (kind) {
            case BinaryKind::kAdd: return x + y;
            case BinaryKind::kSub: return x - y;
            default: return x * y;
        }
    };
    Shape out_shape;
    std::vector<T> out;
    const bool same = a.shape() == b.shape();
    std::vector<std::int64_t> sa, sb;
    if (same) {
        out_shape = a.shape();
        out.resize(ad.size());
        for (std::size_t i = 0; i < ad.size(); ++i) out[i] = apply(ad[i], bd[i]);
    } else {
        out_shape = broadcast_shapes(a.shape(), b.shape());
        sa = broadcast_strides(a.shape(), out_shape);
        sb = broadcast_strides(b.shape(), out_shape);
        out.resize(static_cast<std::size_t>(numel(out_shape)));
        for_each_broadcast(out_shape, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
            out[i] = apply(ad[ia], bd[ib]);
        });
    }
    Tensor<T> result(out_shape, std::move(out), track);
    if (track) {
        record<T>([on = result.node(), an = a.node(), bn = b.node(), kind, same, sa, sb] {
            if (on->grad.empty()) return;
            const auto& g = on->grad;
            const bool ga = an->requires_grad, gb = bn->requires_grad;
            if (ga) an->ensure_grad();
            if (gb) bn->ensure_grad();
            auto body = [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
                switch (kind) {
                    case BinaryKind::kAdd:
                        if (ga) an->grad[ia] += g[i];
                        if (gb) bn->grad[ib] += g[i];
                        break;
                    case BinaryKind::kSub:
                        if (ga) an->grad[ia] += g[i];
                        if (gb) bn->grad[ib] -= g[i];
                        break;
                    case BinaryKind::kMul:
                        if (ga) an->grad[ia] += g[i] * bn->data[ib];
                        if (gb) bn->grad[ib] += g[i] * an->data[ia];
                        break;
                }
            };
            if (same) {
                for (std::size_t i = 0; i < g.size(); ++i) body(i, i, i);
            } else {
                for_each_broadcast(on->shape, sa, sb, body);
            }
        });
    }
    return result;
}

enum class UnaryKind { kSin, kCos, kRelu, kSigmoid, kGelu };

template <typename T>
T unary_value(UnaryKind kind, T x) {
    switch (kind) {
        case UnaryKind::kSin: return std::sin(x);
        case UnaryKind::kCos: return std::cos(x);
        case UnaryKind::kRelu: return x > T(0) ? x : T(0);
        case UnaryKind::kSigmoid: return T(1) / (T(1) + std::exp(-x));
        case UnaryKind::kGelu: return T(0.5) * x * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2)));
    }
    return x;
}

// Derivative from input x and output y.
template <typename T>
T unary_derivative(UnaryKind kind, T x, T y) {
    switch (kind) {
        case UnaryKind::kSin: return std::cos(x);
        case UnaryKind::kCos: return -std::sin(x);
        case UnaryKind::kRelu: return x > T(0) ? T(1) : T(0);
        case UnaryKind::kSigmoid: return y * (T(1) - y);
        case UnaryKind::kGelu: {
            const T cdf = T(0.5) * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2)));
            const T pdf = std::exp(T(-0.5) * x * x) * T(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
            return cdf + x * pdf;
        }
    }
    return T(0);
}

template <typename T>
Tensor<T> unary(const Tensor<T>& x, UnaryKind kind) {
    const bool track = tracking<T>({&x});
    const auto& xd = x.node()->data;
    std::vector<T> out(xd.size());
    for (std::size_t i = 0; i < xd.size(); ++i) out[i] = unary_value(kind, xd[i]);
    Tensor<T> result(x.shape(), std::move(out), track);
    if (track) {
        record<T>([on = result.node(), xn = x.node(), kind] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                xn->grad[i] += on->grad[i] * unary_derivative(kind, xn->data[i], on->data[i]);
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> matmul_impl(const Tensor<T>& a, const Tensor<T>& b, bool trans_b) {
    if (a.rank() < 2 || b.rank() < 2) {
        throw ShapeError("matmul needs rank >= 2, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::int64_t m = a.dim(-2), k = a.dim(-1);
    const std::int64_t kb = trans_b ? b.dim(-1) : b.dim(-2);
    const std::int64_t n = trans_b ? b.dim(-2) : b.dim(-1);
    if (k != kb) {
        throw ShapeError("matmul inner dimensions differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + (trans_b ? "^T" : ""));
    }
    const bool track = tracking<T>({&a, &b});
    const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
    const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
    const T* ap = a.node()->data.data();
    const T* bp = b.node()->data.data();

    if (b_batch.empty()) {
        // Fold a's batch axes into rows: one GEMM.
        const std::int64_t rows = numel(a_batch) * m;
        Shape out_shape = a_batch;
        out_shape.push_back(m);
        out_shape.push_back(n);
        std::vector<T> out(static_cast<std::size_t>(rows * n));
        kernels::gemm<T>({false, trans_b, rows, n, k, false}, ap, bp, out.data());
        Tensor<T> result(std::move(out_shape), std::move(out), track);
        if (track) {
            record<T>([on = result.node(), an = a.node(), bn = b.node(), rows, n, k, trans_b] {
                if (on->grad.empty()) return;
                const T* g = on->grad.data();
                if (an->requires_grad) {
                    an->ensure_grad();
                    kernels::gemm<T>({false, !trans_b, rows, k, n, true}, g, bn->data.data(),
                                     an->grad.data());
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    if (!trans_b) {
                        kernels::gemm<T>({true, false, k, n, rows, true}, an->data.data(), g,
                                         bn->grad.data());
                    } else {
                        kernels::gemm<T>({true, false, n, k, rows, true}, g, an->data.data(),
                                         bn->grad.data());
                    }
                }
            });
        }
        return result;
    }

    const Shape batch = broadcast_shapes(a_batch, b_batch);
    const auto sa = broadcast_strides(a_batch, batch);
    const auto sb = broadcast_strides(b_batch, batch);
    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
    const std::int64_t a_mat = m * k, b_mat = k * n, c_mat = m * n;
    for_each_broadcast(batch, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
        kernels::gemm<T>({false, trans_b, m, n, k, false}, ap + ia * a_mat, bp + ib * b_mat,
                         out.data() + i * c_mat);
    });
    Tensor<T> result(std::move(out_shape), std::move(out), track);
    if (track) {
        record<T>([on = result.node(), an = a.node(), bn = b.node(), batch, sa, sb, m, n, k, trans_b] {
            if (on->grad.empty()) return;
            const bool ga = an->requires_grad, gb = bn->requires_grad;
            if (ga) an->ensure_grad();
            if (gb) bn->ensure_grad();
            const std::int64_t a_mat = m * k, b_mat = k * n, c_mat = m * n;
            for_each_broadcast(batch, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
                const T* g = on->grad.data() + i * c_mat;
                const T* av = an->data.data() + ia * a_mat;
                const T* bv = bn->data.data() + ib * b_mat;
                if (ga) {
                    kernels::gemm<T>({false, !trans_b, m, k, n, true}, g, bv, an->grad.data() + ia * a_mat);
                }
                if (gb) {
                    if (!trans_b) {
                        kernels::gemm<T>({true, false, k, n, m, true}, av, g, bn->grad.data() + ib * b_mat);
                    } else {
                        kernels::gemm<T>({true, false, n, k, m, true}, g, av, bn->grad.data() + ib * b_mat);
                    }
                }
            });
        });
    }
    return result;
}

int normalize_axis(int axis, std::size_t rank) {
    const int r = static_cast<int>(rank);
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("axis " + std::to_string(axis) + " out of range");
    return axis;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    return matmul_impl(a, b, false);
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    return matmul_impl(a, b, true);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return binary(a, b, BinaryKind::kAdd);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return binary(a, b, BinaryKind::kSub);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return binary(a, b, BinaryKind::kMul);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    const bool track = tracking<T>({&x});
    std::vector<T> out(x.node()->data);
    for (auto& v : out) v *= factor;
    Tensor<T> result(x.shape(), std::move(out), track);
    if (track) {
        record<T>([on = result.node(), xn = x.node(), factor] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i] * factor;
        });
    }
    return result;
}

template <typename T>
Tensor<T> sin(const Tensor<T>& x) {
    return unary(x, UnaryKind::kSin);
}
template <typename T>
Tensor<T> cos(const Tensor<T>& x) {
    return unary(x, UnaryKind::kCos);
}
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return unary(x, UnaryKind::kRelu);
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return unary(x, UnaryKind::kSigmoid);
}
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    return unary(x, UnaryKind::kGelu);
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    if (parts.size() == 1) return parts.front();
    const auto& ref = parts.front().shape();
    axis = normalize_axis(axis, ref.size());
    std::int64_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != ref.size()) throw ShapeError("concat rank mismatch");
        for (std::size_t d = 0; d < ref.size(); ++d) {
            if (static_cast<int>(d) != axis && p.shape()[d] != ref[d]) {
                throw ShapeError("concat shape mismatch: " + shape_str(p.shape()) + " vs " + shape_str(ref));
            }
        }
        total += p.shape()[static_cast<std::size_t>(axis)];
    }
    Shape out_shape = ref;
    out_shape[static_cast<std::size_t>(axis)] = total;
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= ref[static_cast<std::size_t>(d)];
    for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < ref.size(); ++d) inner *= ref[d];

    bool track = false;
    for (const auto& p : parts) track = track || tracking<T>({&p});
    std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
    std::vector<std::int64_t> widths;
    std::int64_t offset = 0;
    for (const auto& p : parts) {
        const std::int64_t w = p.shape()[static_cast<std::size_t>(axis)] * inner;
        const auto& pd = p.node()->data;
        for (std::int64_t o = 0; o < outer; ++o) {
            std::copy_n(pd.begin() + o * w, w, out.begin() + o * total * inner + offset);
        }
        widths.push_back(w);
        offset += w;
    }
    Tensor<T> result(std::move(out_shape), std::move(out), track);
    if (track) {
        std::vector<std::shared_ptr<TensorNode<T>>> nodes;
        for (const auto& p : parts) nodes.push_back(p.node());
        record<T>([on = result.node(), nodes, widths, outer, row = total * inner] {
            if (on->grad.empty()) return;
            std::int64_t off = 0;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                auto& pn = *nodes[i];
                const std::int64_t w = widths[i];
                if (pn.requires_grad) {
                    pn.ensure_grad();
                    for (std::int64_t o = 0; o < outer; ++o) {
                        const T* src = on->grad.data() + o * row + off;
                        T* dst = pn.grad.data() + o * w;
                        for (std::int64_t j = 0; j < w; ++j) dst[j] += src[j];
                    }
                }
                off += w;
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length) {
    axis = normalize_axis(axis, x.rank());
    const auto& s = x.shape();
    const std::int64_t len_axis = s[static_cast<std::size_t>(axis)];
    if (start < 0 || length < 0 || start + length > len_axis) {
        throw ShapeError("slice [" + std::to_string(start) + ", +" + std::to_string(length) +
                         ") out of range for " + shape_str(s));
    }
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s[static_cast<std::size_t>(d)];
    for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < s.size(); ++d) inner *= s[d];
    Shape out_shape = s;
    out_shape[static_cast<std::size_t>(axis)] = length;
    const bool track = tracking<T>({&x});
    std::vector<T> out(static_cast<std::size_t>(outer * length * inner));
    const auto& xd = x.node()->data;
    const std::int64_t row = len_axis * inner, w = length * inner, off = start * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
        std::copy_n(xd.begin() + o * row + off, w, out.begin() + o * w);
    }
    Tensor<T> result(std::move(out_shape), std::move(out), track);
    if (track) {
        record<T>([on = result.node(), xn = x.node(), outer, row, w, off] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (std::int64_t o = 0; o < outer; ++o) {
                const T* src = on->grad.data() + o * w;
                T* dst = xn->grad.data() + o * row + off;
                for (std::int64_t j = 0; j < w; ++j) dst[j] += src[j];
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw ShapeError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
    }
    const bool track = tracking<T>({&x});
    Tensor<T> result(std::move(shape), x.node()->data, track);
    if (track) {
        record<T>([on = result.node(), xn = x.node()] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        });
    }
    return result;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& order) {
    const auto& s = x.shape();
    if (order.size() != s.size()) throw ShapeError("permute order has wrong length");
    std::vector<bool> seen(s.size(), false);
    std::vector<std::int64_t> in_strides(s.size(), 1);
    for (std::size_t d = s.size(); d-- > 1;) in_strides[d - 1] = in_strides[d] * s[d];
    Shape out_shape(s.size());
    std::vector<std::int64_t> strides(s.size());
    for (std::size_t d = 0; d < order.size(); ++d) {
        const int src = order[d];
        if (src < 0 || src >= static_cast<int>(s.size()) || seen[static_cast<std::size_t>(src)]) {
            throw ShapeError("permute order is not a permutation");
        }
        seen[static_cast<std::size_t>(src)] = true;
        out_shape[d] = s[static_cast<std::size_t>(src)];
        strides[d] = in_strides[static_cast<std::size_t>(src)];
    }
    // Precomputed source offsets make forward and backward a plain gather/scatter.
    std::vector<std::int64_t> src_offset(static_cast<std::size_t>(x.numel()));
    const std::vector<std::int64_t> zero(s.size(), 0);
    for_each_broadcast(out_shape, strides, zero,
                       [&](std::int64_t i, std::int64_t ia, std::int64_t) { src_offset[i] = ia; });
    const bool track = tracking<T>({&x});
    const auto& xd = x.node()->data;
    std::vector<T> out(xd.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[src_offset[i]];
    Tensor<T> result(std::move(out_shape), std::move(out), track);
    if (track) {
        record<T>([on = result.node(), xn = x.node(), src_offset = std::move(src_offset)] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[src_offset[i]] += on->grad[i];
        });
    }
    return result;
}

template <typename T>
Tensor<T> gather_last(const Tensor<T>& x, std::span<const std::int64_t> index) {
    if (x.rank() == 0) throw ShapeError("gather_last on a scalar");
    const std::int64_t width = x.dim(-1);
    for (auto i : index) {
        if (i < 0 || i >= width) throw ShapeError("gather_last index out of range");
    }
    const std::int64_t rows = width == 0 ? 0 : x.numel() / width;
    const std::int64_t out_w = static_cast<std::int64_t>(index.size());
    Shape out_shape = x.shape();
    out_shape.back() = out_w;
    const bool track = tracking<T>({&x});
    const auto& xd = x.node()->data;
    std::vector<T> out(static_cast<std::size_t>(rows * out_w));
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t j = 0; j < out_w; ++j) out[r * out_w + j] = xd[r * width + index[j]];
    }
    Tensor<T> result(std::move(out_shape), std::move(out), track);
    if (track) {
        std::vector<std::int64_t> idx(index.begin(), index.end());
        record<T>([on = result.node(), xn = x.node(), idx = std::move(idx), rows, width, out_w] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (std::int64_t r = 0; r < rows; ++r) {
                for (std::int64_t j = 0; j < out_w; ++j) xn->grad[r * width + idx[j]] += on->grad[r * out_w + j];
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, int axis) {
    axis = normalize_axis(axis, x.rank());
    const auto& s = x.shape();
    const std::int64_t len = s[static_cast<std::size_t>(axis)];
    if (len == 0) throw ShapeError("mean over an empty axis");
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s[static_cast<std::size_t>(d)];
    for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < s.size(); ++d) inner *= s[d];
    Shape out_shape = s;
    out_shape.erase(out_shape.begin() + axis);
    const bool track = tracking<T>({&x});
    const auto& xd = x.node()->data;
    std::vector<T> out(static_cast<std::size_t>(outer * inner), T(0));
    const T inv = T(1) / static_cast<T>(len);
    for (std::int64_t o = 0; o < outer; ++o) {
        T* dst = out.data() + o * inner;
        for (std::int64_t l = 0; l < len; ++l) {
            const T* src = xd.data() + (o * len + l) * inner;
            for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
        for (std::int64_t i = 0; i < inner; ++i) dst[i] *= inv;
    }
    Tensor<T> result(std::move(out_shape), std::move(out), track);
    if (track) {
        record<T>([on = result.node(), xn = x.node(), outer, len, inner, inv] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (std::int64_t o = 0; o < outer; ++o) {
                const T* g = on->grad.data() + o * inner;
                for (std::int64_t l = 0; l < len; ++l) {
                    T* dst = xn->grad.data() + (o * len + l) * inner;
                    for (std::int64_t i = 0; i < inner; ++i) dst[i] += g[i] * inv;
                }
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    const bool track = tracking<T>({&x});
    T s = 0;
    for (auto v : x.data()) s += v;
    Tensor<T> result = Tensor<T>::scalar(s, track);
    if (track) {
        record<T>([on = result.node(), xn = x.node()] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (auto& g : xn->grad) g += on->grad[0];
        });
    }
    return result;
}

template <typename T>
void check_finite(const Tensor<T>& x, const char* what) {
    for (auto v : x.data()) {
        if (!std::isfinite(v)) throw NumericalError(std::string("non-finite value in ") + what);
    }
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    if (x.rank() == 0) throw ShapeError("softmax_rows on a scalar");
    for (auto v : x.data()) {
        if (std::isnan(v)) throw NumericalError("NaN input to softmax");
    }
    const std::int64_t cols = x.dim(-1);
    const std::int64_t rows = cols == 0 ? 0 : x.numel() / cols;
    const bool track = tracking<T>({&x});
    std::vector<T> out(static_cast<std::size_t>(x.numel()));
    kernels::softmax_rows<T>(x.node()->data.data(), out.data(), rows, cols);
    Tensor<T> result(x.shape(), std::move(out), track);
    if (track) {
        record<T>([on = result.node(), xn = x.node(), rows, cols] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (std::int64_t r = 0; r < rows; ++r) {
                const T* y = on->data.data() + r * cols;
                const T* g = on->grad.data() + r * cols;
                T dot = 0;
                for (std::int64_t j = 0; j < cols; ++j) dot += g[j] * y[j];
                T* dx = xn->grad.data() + r * cols;
                for (std::int64_t j = 0; j < cols; ++j) dx[j] += y[j] * (g[j] - dot);
            }
        });
    }
    return result;
}

namespace {

// Row-wise log-softmax into `out`; returns softmax probabilities for backward.
template <typename T>
std::vector<T> log_softmax(const std::vector<T>& x, std::int64_t rows, std::int64_t cols, std::vector<T>& lsm) {
    std::vector<T> probs(x.size());
    lsm.resize(x.size());
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = x.data() + r * cols;
        T mx = xr[0];
        for (std::int64_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        T s = 0;
        for (std::int64_t j = 0; j < cols; ++j) s += std::exp(xr[j] - mx);
        const T lse = std::log(s);
        for (std::int64_t j = 0; j < cols; ++j) {
            lsm[r * cols + j] = xr[j] - mx - lse;
            probs[r * cols + j] = std::exp(lsm[r * cols + j]);
        }
    }
    return probs;
}

template <typename T>
void check_logits(const Tensor<T>& logits) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy expects [B, K] logits");
    if (logits.dim(1) < 2) throw ShapeError("cross_entropy needs at least two classes");
    check_finite(logits, "logits");
}

}  // namespace

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> targets) {
    check_logits(logits);
    const std::int64_t rows = logits.dim(0), cols = logits.dim(1);
    if (static_cast<std::int64_t>(targets.size()) != rows) throw ShapeError("target count != batch size");
    for (auto t : targets) {
        if (t < 0 || t >= cols) throw std::invalid_argument("class index out of range: " + std::to_string(t));
    }
    std::vector<T> lsm;
    auto probs = log_softmax(logits.node()->data, rows, cols, lsm);
    T total = 0;
    for (std::int64_t r = 0; r < rows; ++r) total += -lsm[r * cols + targets[r]];
    const bool track = tracking<T>({&logits});
    Tensor<T> result = Tensor<T>::scalar(total / static_cast<T>(rows), track);
    if (track) {
        std::vector<std::int32_t> tg(targets.begin(), targets.end());
        record<T>([on = result.node(), ln = logits.node(), probs = std::move(probs), tg = std::move(tg), rows, cols] {
            if (on->grad.empty()) return;
            ln->ensure_grad();
            const T g = on->grad[0] / static_cast<T>(rows);
            for (std::int64_t r = 0; r < rows; ++r) {
                for (std::int64_t j = 0; j < cols; ++j) {
                    const T onehot = j == tg[r] ? T(1) : T(0);
                    ln->grad[r * cols + j] += g * (probs[r * cols + j] - onehot);
                }
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> cross_entropy_soft(const Tensor<T>& logits, const Tensor<T>& probs_target) {
    check_logits(logits);
    if (probs_target.shape() != logits.shape()) throw ShapeError("soft labels must match logits shape");
    const std::int64_t rows = logits.dim(0), cols = logits.dim(1);
    const auto& p = probs_target.node()->data;
    std::vector<T> lsm;
    auto probs = log_softmax(logits.node()->data, rows, cols, lsm);
    T total = 0;
    for (std::int64_t r = 0; r < rows; ++r) {
        T s = 0;
        for (std::int64_t j = 0; j < cols; ++j) s += p[r * cols + j] * lsm[r * cols + j];
        total += -s;
    }
    const bool track = tracking<T>({&logits});
    Tensor<T> result = Tensor<T>::scalar(total / static_cast<T>(rows), track);
    if (track) {
        record<T>([on = result.node(), ln = logits.node(), pn = probs_target.node(), probs = std::move(probs), rows,
                   cols] {
            if (on->grad.empty()) return;
            ln->ensure_grad();
            const T g = on->grad[0] / static_cast<T>(rows);
            for (std::int64_t r = 0; r < rows; ++r) {
                T mass = 0;
                for (std::int64_t j = 0; j < cols; ++j) mass += pn->data[r * cols + j];
                for (std::int64_t j = 0; j < cols; ++j) {
                    ln->grad[r * cols + j] += g * (probs[r * cols + j] * mass - pn->data[r * cols + j]);
                }
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout probability must be in [0, 1)");
    if (p == 0.0) return x;
    const bool track = tracking<T>({&x});
    const T keep_scale = T(1) / static_cast<T>(1.0 - p);
    std::vector<T> mask(static_cast<std::size_t>(x.numel()));
    for (auto& m : mask) m = rng.uniform() >= p ? keep_scale : T(0);
    std::vector<T> out(mask.size());
    const auto& xd = x.node()->data;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * mask[i];
    Tensor<T> result(x.shape(), std::move(out), track);
    if (track) {
        record<T>([on = result.node(), xn = x.node(), mask = std::move(mask)] {
            if (on->grad.empty()) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < mask.size(); ++i) xn->grad[i] += on->grad[i] * mask[i];
        });
    }
    return result;
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, std::span<T> running_mean,
                     std::span<T> running_var, bool training, const NormOptions& opt) {
    if (x.rank() < 2) throw ShapeError("batch_norm expects at least [B, d]");
    const std::int64_t d = x.dim(-1);
    if (gamma.numel() != d || beta.numel() != d || static_cast<std::int64_t>(running_mean.size()) != d ||
        static_cast<std::int64_t>(running_var.size()) != d) {
        throw ShapeError("batch_norm parameter width mismatch");
    }
    if (training && x.dim(0) < 2) throw std::invalid_argument("batch_norm in train mode needs batch size >= 2");
    const std::int64_t rows = x.numel() / d;
    const auto& xd = x.node()->data;
    const auto& gd = gamma.node()->data;
    const auto& bd = beta.node()->data;
    const T eps = static_cast<T>(opt.eps);
    std::vector<T> mean(static_cast<std::size_t>(d), T(0)), invstd(static_cast<std::size_t>(d));
    if (training) {
        std::vector<T> var(static_cast<std::size_t>(d), T(0));
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < d; ++j) mean[j] += xd[r * d + j];
        for (auto& m : mean) m /= static_cast<T>(rows);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < d; ++j) {
                const T c = xd[r * d + j] - mean[j];
                var[j] += c * c;
            }
        const T mom = static_cast<T>(opt.momentum);
        for (std::int64_t j = 0; j < d; ++j) {
            const T biased = var[j] / static_cast<T>(rows);
            const T unbiased = rows > 1 ? var[j] / static_cast<T>(rows - 1) : biased;
            invstd[j] = T(1) / std::sqrt(biased + eps);
            running_mean[j] = (T(1) - mom) * running_mean[j] + mom * mean[j];
            running_var[j] = (T(1) - mom) * running_var[j] + mom * unbiased;
        }
    } else {
        for (std::int64_t j = 0; j < d; ++j) {
            mean[j] = running_mean[j];
            invstd[j] = T(1) / std::sqrt(running_var[j] + eps);
        }
    }
    std::vector<T> xhat(xd.size()), out(xd.size());
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < d; ++j) {
            const std::int64_t i = r * d + j;
            xhat[i] = (xd[i] - mean[j]) * invstd[j];
            out[i] = gd[j] * xhat[i] + bd[j];
        }
    const bool track = tracking<T>({&x, &gamma, &beta});
    Tensor<T> result(x.shape(), std::move(out), track);
    if (track) {
        record<T>([on = result.node(), xn = x.node(), gn = gamma.node(), bn = beta.node(), xhat = std::move(xhat),
                   invstd = std::move(invstd), rows, d, training] {
            if (on->grad.empty()) return;
            const auto& g = on->grad;
            if (gn->requires_grad || bn->requires_grad) {
                gn->ensure_grad();
                bn->ensure_grad();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < d; ++j) {
                        gn->grad[j] += g[r * d + j] * xhat[r * d + j];
                        bn->grad[j] += g[r * d + j];
                    }
            }
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            if (!training) {
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < d; ++j) xn->grad[r * d + j] += g[r * d + j] * gn->data[j] * invstd[j];
                return;
            }
            std::vector<T> sum_dy(static_cast<std::size_t>(d), T(0)), sum_dy_xhat(static_cast<std::size_t>(d), T(0));
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < d; ++j) {
                    const T dxhat = g[r * d + j] * gn->data[j];
                    sum_dy[j] += dxhat;
                    sum_dy_xhat[j] += dxhat * xhat[r * d + j];
                }
            const T n = static_cast<T>(rows);
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < d; ++j) {
                    const T dxhat = g[r * d + j] * gn->data[j];
                    xn->grad[r * d + j] +=
                        invstd[j] / n * (n * dxhat - sum_dy[j] - xhat[r * d + j] * sum_dy_xhat[j]);
                }
        });
    }
    return result;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps_d) {
    if (x.rank() < 1) throw ShapeError("layer_norm on a scalar");
    const std::int64_t d = x.dim(-1);
    if (gamma.numel() != d || beta.numel() != d) throw ShapeError("layer_norm parameter width mismatch");
    const std::int64_t rows = x.numel() / d;
    const auto& xd = x.node()->data;
    const auto& gd = gamma.node()->data;
    const auto& bd = beta.node()->data;
    const T eps = static_cast<T>(eps_d);
    std::vector<T> xhat(xd.size()), out(xd.size()), invstd(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = xd.data() + r * d;
        T mean = 0;
        for (std::int64_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<T>(d);
        T var = 0;
        for (std::int64_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<T>(d);
        invstd[r] = T(1) / std::sqrt(var + eps);
        for (std::int64_t j = 0; j < d; ++j) {
            xhat[r * d + j] = (xr[j] - mean) * invstd[r];
            out[r * d + j] = gd[j] * xhat[r * d + j] + bd[j];
        }
    }
    const bool track = tracking<T>({&x, &gamma, &beta});
    Tensor<T> result(x.shape(), std::move(out), track);
    if (track) {
        record<T>([on = result.node(), xn = x.node(), gn = gamma.node(), bn = beta.node(), xhat = std::move(xhat),
                   invstd = std::move(invstd), rows, d] {
            if (on->grad.empty()) return;
            const auto& g = on->grad;
            if (gn->requires_grad || bn->requires_grad) {
                gn->ensure_grad();
                bn->ensure_grad();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < d; ++j) {
                        gn->grad[j] += g[r * d + j] * xhat[r * d + j];
                        bn->grad[j] += g[r * d + j];
                    }
            }
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const T n = static_cast<T>(d);
            for (std::int64_t r = 0; r < rows; ++r) {
                T s1 = 0, s2 = 0;
                for (std::int64_t j = 0; j < d; ++j) {
                    const T dxhat = g[r * d + j] * gn->data[j];
                    s1 += dxhat;
                    s2 += dxhat * xhat[r * d + j];
                }
                for (std::int64_t j = 0; j < d; ++j) {
                    const T dxhat = g[r * d + j] * gn->data[j];
                    xn->grad[r * d + j] += invstd[r] / n * (n * dxhat - s1 - xhat[r * d + j] * s2);
                }
            }
        });
    }
    return result;
}

#define FAT_INSTANTIATE(T)                                                                                      \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                              \
    template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                                           \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                 \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                 \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                 \
    template Tensor<T> scale(const Tensor<T>&, T);                                                              \
    template Tensor<T> sin(const Tensor<T>&);                                                                   \
    template Tensor<T> cos(const Tensor<T>&);                                                                   \
    template Tensor<T> relu(const Tensor<T>&);                                                                  \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                               \
    template Tensor<T> gelu(const Tensor<T>&);                                                                  \
    template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                              \
    template Tensor<T> slice(const Tensor<T>&, int, std::int64_t, std::int64_t);                                \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                                        \
    template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);                                      \
    template Tensor<T> gather_last(const Tensor<T>&, std::span<const std::int64_t>);                            \
    template Tensor<T> mean_axis(const Tensor<T>&, int);                                                        \
    template Tensor<T> sum(const Tensor<T>&);                                                                   \
    template Tensor<T> softmax_rows(const Tensor<T>&);                                                          \
    template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::int32_t>);                          \
    template Tensor<T> cross_entropy_soft(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> dropout(const Tensor<T>&, double, Rng&);                                                 \
    template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::span<T>,           \
                                  std::span<T>, bool, const NormOptions&);                                      \
    template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);                \
    template void check_finite(const Tensor<T>&, const char*);

FAT_INSTANTIATE(float)
FAT_INSTANTIATE(double)
#undef FAT_INSTANTIATE

}  // namespace fat
