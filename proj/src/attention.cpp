#include "fat/attention.hpp"

#include <cmath>
#include <numeric>

namespace fat {

HeadPartition HeadPartition::from_ratio(std::int64_t embed_dim, int heads, double p_ratio) {
    if (heads < 1) throw std::invalid_argument("need at least one head");
    if (embed_dim % heads != 0) throw std::invalid_argument("embed_dim must be divisible by heads");
    const double scaled = p_ratio * heads;
    const double rounded = std::round(scaled);
    if (p_ratio < 0.0 || std::abs(scaled - rounded) > 1e-9 || rounded > heads) {
        throw std::invalid_argument("p_ratio * heads must be an integer in [0, heads]");
    }
    HeadPartition part;
    part.heads = heads;
    part.periodic_heads = static_cast<int>(rounded);
    part.head_dim = embed_dim / heads;
    if (part.periodic_heads > 0 && part.head_dim % 2 != 0) {
        throw std::invalid_argument("periodic heads need an even head width");
    }
    return part;
}

std::vector<std::int64_t> HeadPartition::head_major_index() const {
    std::vector<std::int64_t> index;
    index.reserve(static_cast<std::size_t>(embed_dim()));
    const std::int64_t half = head_dim / 2;
    const std::int64_t sin_base = periodic_dims() / 2;
    for (int h = 0; h < periodic_heads; ++h) {
        for (std::int64_t t = 0; t < half; ++t) index.push_back(h * half + t);
        for (std::int64_t t = 0; t < half; ++t) index.push_back(sin_base + h * half + t);
    }
    for (std::int64_t c = periodic_dims(); c < embed_dim(); ++c) index.push_back(c);
    return index;
}

std::vector<std::int64_t> HeadPartition::layout_index() const {
    const auto fwd = head_major_index();
    std::vector<std::int64_t> inv(fwd.size());
    for (std::size_t j = 0; j < fwd.size(); ++j) inv[static_cast<std::size_t>(fwd[j])] = static_cast<std::int64_t>(j);
    return inv;
}

namespace {

template <typename T>
void check_embedded(const Tensor<T>& x, std::int64_t embed_dim) {
    if (x.rank() != 3 || x.dim(2) != embed_dim) {
        throw ShapeError("expected [B, C, " + std::to_string(embed_dim) + "], got " + shape_str(x.shape()));
    }
}

// [B, C, E] in head-major column order -> [B, h, C, d]
template <typename T>
Tensor<T> to_heads(const Tensor<T>& x, int heads, std::int64_t head_dim) {
    auto r = reshape(x, {x.dim(0), x.dim(1), heads, head_dim});
    return permute(r, {0, 2, 1, 3});
}

// [B, h, C, d] -> [B, C, h*d]
template <typename T>
Tensor<T> from_heads(const Tensor<T>& x) {
    auto p = permute(x, {0, 2, 1, 3});
    return reshape(p, {p.dim(0), p.dim(1), p.dim(2) * p.dim(3)});
}

template <typename T>
Tensor<T> attend(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const Tensor<T>* adjacency,
                 const Linear<T>& gate, const ForwardContext& ctx, double dropout_p, Tensor<T>* trace) {
    auto attn = softmax_rows(gated_scores(q, k, adjacency, gate));
    if (trace) *trace = attn.detach();
    if (ctx.training() && dropout_p > 0.0) attn = dropout(attn, dropout_p, *ctx.rng);
    return matmul(attn, v);
}

}  // namespace

template <typename T>
HeadSplit<T> split_heads(const Tensor<T>& x, const HeadPartition& part) {
    check_embedded(x, part.embed_dim());
    Tensor<T> ordered = x;
    if (part.periodic_heads > 0) {
        const auto index = part.head_major_index();
        ordered = gather_last(x, std::span<const std::int64_t>(index));
    }
    auto all = to_heads(ordered, part.heads, part.head_dim);
    HeadSplit<T> split;
    if (part.periodic_heads == 0) {
        split.aperiodic = all;
    } else if (part.aperiodic_heads() == 0) {
        split.periodic = all;
    } else {
        split.periodic = slice(all, 1, 0, part.periodic_heads);
        split.aperiodic = slice(all, 1, part.periodic_heads, part.aperiodic_heads());
    }
    return split;
}

template <typename T>
Tensor<T> merge_heads(const HeadSplit<T>& heads, const HeadPartition& part) {
    std::vector<Tensor<T>> parts;
    if (part.periodic_heads > 0) {
        if (!heads.periodic.defined() || heads.periodic.dim(1) != part.periodic_heads) {
            throw ShapeError("periodic head count does not match partition");
        }
        parts.push_back(heads.periodic);
    }
    if (part.aperiodic_heads() > 0) {
        if (!heads.aperiodic.defined() || heads.aperiodic.dim(1) != part.aperiodic_heads()) {
            throw ShapeError("aperiodic head count does not match partition");
        }
        parts.push_back(heads.aperiodic);
    }
    auto merged = from_heads(concat(parts, 1));
    if (part.periodic_heads == 0) return merged;
    const auto index = part.layout_index();
    return gather_last(merged, std::span<const std::int64_t>(index));
}

template <typename T>
AdjacencyPair<T> AdjacencyPair<T>::create(std::int64_t channels) {
    return {Tensor<T>::zeros({channels, channels}, true), Tensor<T>::zeros({channels, channels}, true)};
}

template <typename T>
void AdjacencyPair<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    if (!enabled()) return;
    out.push_back({prefix + ".periodic", periodic});
    out.push_back({prefix + ".aperiodic", aperiodic});
}

template <typename T>
Tensor<T> gated_scores(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>* adjacency, const Linear<T>& gate) {
    const auto d = q.dim(-1);
    auto scores = scale(matmul_nt(q, k), static_cast<T>(1.0 / std::sqrt(static_cast<double>(d))));
    if (adjacency == nullptr) return scores;
    const auto c = q.dim(-2);
    if (adjacency->rank() != 2 || adjacency->dim(0) != c || adjacency->dim(1) != c) {
        throw ShapeError("adjacency must be (" + std::to_string(c) + ", " + std::to_string(c) + "), got " +
                         shape_str(adjacency->shape()));
    }
    auto g = sigmoid(gate.forward(q));  // [.., C, 1]
    return add(scores, mul(g, *adjacency));
}

template <typename T>
FaaParams<T> FaaParams<T>::create(std::int64_t embed_dim, const HeadPartition& part, Activation aperiodic_activation,
                                  Rng& rng) {
    if (part.embed_dim() != embed_dim) throw std::invalid_argument("partition does not cover embed_dim");
    FaaParams p;
    p.partition = part;
    const auto n_per = part.periodic_dims();
    p.q = {FalParams<T>::create(embed_dim, embed_dim, n_per, rng), aperiodic_activation};
    p.k = {FalParams<T>::create(embed_dim, embed_dim, n_per, rng), aperiodic_activation};
    p.v = {FalParams<T>::create(embed_dim, embed_dim, n_per, rng), aperiodic_activation};
    p.gate_p = Linear<T>::create(part.head_dim, 1, true, rng);
    p.gate_a = Linear<T>::create(part.head_dim, 1, true, rng);
    p.w_out = Linear<T>::create(embed_dim, embed_dim, true, rng);
    return p;
}

template <typename T>
void FaaParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    q.base.collect(out, prefix + ".q");
    k.base.collect(out, prefix + ".k");
    v.base.collect(out, prefix + ".v");
    gate_p.collect(out, prefix + ".gate_p");
    gate_a.collect(out, prefix + ".gate_a");
    w_out.collect(out, prefix + ".w_out");
}

template <typename T>
Tensor<T> faa_forward(const Tensor<T>& x, const FaaParams<T>& p, const AdjacencyPair<T>* adjacency,
                      const ForwardContext& ctx, AttentionTrace<T>* trace) {
    const auto& part = p.partition;
    check_embedded(x, part.embed_dim());
    if (adjacency != nullptr && !adjacency->enabled()) adjacency = nullptr;
    const auto qs = split_heads(fan_forward(x, p.q), part);
    const auto ks = split_heads(fan_forward(x, p.k), part);
    const auto vs = split_heads(fan_forward(x, p.v), part);
    HeadSplit<T> out;
    if (part.periodic_heads > 0) {
        out.periodic = attend(qs.periodic, ks.periodic, vs.periodic, adjacency ? &adjacency->periodic : nullptr,
                              p.gate_p, ctx, p.dropout, trace ? &trace->periodic : nullptr);
    }
    if (part.aperiodic_heads() > 0) {
        out.aperiodic = attend(qs.aperiodic, ks.aperiodic, vs.aperiodic, adjacency ? &adjacency->aperiodic : nullptr,
                               p.gate_a, ctx, p.dropout, trace ? &trace->aperiodic : nullptr);
    }
    return p.w_out.forward(merge_heads(out, part));
}

template <typename T>
void MhsaParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    q.collect(out, prefix + ".q");
    k.collect(out, prefix + ".k");
    v.collect(out, prefix + ".v");
    w_out.collect(out, prefix + ".w_out");
}

template <typename T>
Tensor<T> mhsa_forward(const Tensor<T>& x, const MhsaParams<T>& p, const ForwardContext& ctx,
                       AttentionTrace<T>* trace) {
    const auto e = p.q.out_features();
    check_embedded(x, e);
    if (e % p.heads != 0) throw ShapeError("embed_dim must be divisible by heads");
    const auto d = e / p.heads;
    const auto q = to_heads(p.q.forward(x), p.heads, d);
    const auto k = to_heads(p.k.forward(x), p.heads, d);
    const auto v = to_heads(p.v.forward(x), p.heads, d);
    const Linear<T> no_gate;
    const auto o = attend(q, k, v, static_cast<const Tensor<T>*>(nullptr), no_gate, ctx, p.dropout,
                          trace ? &trace->aperiodic : nullptr);
    return p.w_out.forward(from_heads(o));
}

template <typename T>
MhsaParams<T> mhsa_from_faa(const FaaParams<T>& p) {
    if (p.partition.periodic_heads != 0) throw std::invalid_argument("FAA layer has periodic heads");
    for (const auto* proj : {&p.q, &p.k, &p.v}) {
        if (proj->activation != Activation::kIdentity) {
            throw std::invalid_argument("FAA projector is not affine");
        }
    }
    auto copy_linear = [](const FalParams<T>& f) {
        Linear<T> l;
        l.weight = f.w_n.detach();
        l.weight.set_requires_grad(true);
        l.bias = f.b_n.detach();
        l.bias.set_requires_grad(true);
        return l;
    };
    MhsaParams<T> m;
    m.heads = p.partition.heads;
    m.q = copy_linear(p.q.base);
    m.k = copy_linear(p.k.base);
    m.v = copy_linear(p.v.base);
    m.w_out.weight = p.w_out.weight.detach();
    m.w_out.weight.set_requires_grad(true);
    m.w_out.bias = p.w_out.bias.detach();
    m.w_out.bias.set_requires_grad(true);
    m.dropout = p.dropout;
    return m;
}

#define FAT_INSTANTIATE(T)                                                                                          \
    template HeadSplit<T> split_heads(const Tensor<T>&, const HeadPartition&);                                      \
    template Tensor<T> merge_heads(const HeadSplit<T>&, const HeadPartition&);                                      \
    template struct AdjacencyPair<T>;                                                                               \
    template Tensor<T> gated_scores(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, const Linear<T>&);        \
    template struct FaaParams<T>;                                                                                   \
    template Tensor<T> faa_forward(const Tensor<T>&, const FaaParams<T>&, const AdjacencyPair<T>*,                  \
                                   const ForwardContext&, AttentionTrace<T>*);                                      \
    template struct MhsaParams<T>;                                                                                  \
    template Tensor<T> mhsa_forward(const Tensor<T>&, const MhsaParams<T>&, const ForwardContext&,                  \
                                    AttentionTrace<T>*);                                                            \
    template MhsaParams<T> mhsa_from_faa(const FaaParams<T>&);

FAT_INSTANTIATE(float)
FAT_INSTANTIATE(double)
#undef FAT_INSTANTIATE

}  // namespace fat
