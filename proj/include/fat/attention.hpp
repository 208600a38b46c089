#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fat/layers.hpp"

namespace fat {

/// Division of the h attention heads into periodic heads (fed by the
/// cos/sin outputs of the projector) and aperiodic heads.
struct HeadPartition {
    int heads = 1;
    int periodic_heads = 0;
    std::int64_t head_dim = 0;

    /// Throws std::invalid_argument unless E % h == 0, p_ratio * h is an
    /// integer in [0, h] and the periodic head width is even.
    static HeadPartition from_ratio(std::int64_t embed_dim, int heads, double p_ratio);

    int aperiodic_heads() const { return heads - periodic_heads; }
    std::int64_t embed_dim() const { return heads * head_dim; }
    std::int64_t periodic_dims() const { return periodic_heads * head_dim; }

    /// Column order that takes the projector layout [cos | sin | aperiodic]
    /// to head-major order. Periodic head i owns cos and sin columns
    /// [i*d/2, (i+1)*d/2) of their blocks; aperiodic heads tile the rest.
    std::vector<std::int64_t> head_major_index() const;
    /// Inverse of head_major_index().
    std::vector<std::int64_t> layout_index() const;
};

/// Per-component head tensors, [B, heads_of_component, C, d_head]. A
/// component without heads is left undefined.
template <typename T>
struct HeadSplit {
    Tensor<T> periodic;
    Tensor<T> aperiodic;
};

template <typename T>
HeadSplit<T> split_heads(const Tensor<T>& x, const HeadPartition& part);
template <typename T>
Tensor<T> merge_heads(const HeadSplit<T>& heads, const HeadPartition& part);

/// Learned C x C score biases, one per component. A model owns exactly one
/// pair and every layer reads it.
template <typename T>
struct AdjacencyPair {
    Tensor<T> periodic;
    Tensor<T> aperiodic;

    static AdjacencyPair create(std::int64_t channels);
    bool enabled() const { return periodic.defined(); }
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

/// QK^T / sqrt(d) + sigmoid(gate(Q)) * A, the gate giving one scalar per
/// query row. `adjacency == nullptr` drops the gated term.
template <typename T>
Tensor<T> gated_scores(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>* adjacency, const Linear<T>& gate);

template <typename T>
struct FaaParams {
    HeadPartition partition;
    FanParams<T> q, k, v;  // identity activation = FAL
    Linear<T> gate_p;      // d_head -> 1
    Linear<T> gate_a;      // d_head -> 1
    Linear<T> w_out;       // E -> E
    double dropout = 0.0;  // on attention weights, training only

    static FaaParams create(std::int64_t embed_dim, const HeadPartition& part, Activation aperiodic_activation,
                            Rng& rng);
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

/// Post-softmax attention maps captured during a forward pass.
template <typename T>
struct AttentionTrace {
    Tensor<T> periodic;   // [B, periodic_heads, C, C]
    Tensor<T> aperiodic;  // [B, aperiodic_heads, C, C]
};

/// Multi-head Fourier adjacency attention, x [B, C, E] -> [B, C, E].
/// Pass `adjacency == nullptr` to run without the additive adjacency term.
template <typename T>
Tensor<T> faa_forward(const Tensor<T>& x, const FaaParams<T>& p, const AdjacencyPair<T>* adjacency,
                      const ForwardContext& ctx, AttentionTrace<T>* trace = nullptr);

template <typename T>
struct MhsaParams {
    int heads = 1;
    Linear<T> q, k, v, w_out;
    double dropout = 0.0;
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

/// Standard multi-head scaled dot-product attention.
template <typename T>
Tensor<T> mhsa_forward(const Tensor<T>& x, const MhsaParams<T>& p, const ForwardContext& ctx,
                       AttentionTrace<T>* trace = nullptr);

/// Linear QKV/output weights equivalent to an FAA layer with no periodic
/// heads. Throws if the layer has periodic heads or a non-identity activation.
template <typename T>
MhsaParams<T> mhsa_from_faa(const FaaParams<T>& p);

}  // namespace fat
