#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fat/attention.hpp"
#include "fat/layers.hpp"

namespace fat {

enum class QkvLayer { kFal, kFan, kLinear };

std::string to_string(QkvLayer layer);
QkvLayer qkv_layer_from_string(const std::string& name);

/// Architecture hyperparameters; together with `seed` they fully determine
/// the initial parameters.
struct FatConfig {
    std::int64_t embed_dim = 256;
    int heads = 8;
    int depth = 6;
    double p_ratio = 0.25;
    bool use_adjacency = true;
    std::int64_t channels = 62;
    std::int64_t bands = 5;
    int n_classes = 3;
    int ffn_mult = 4;
    double dropout = 0.1;
    QkvLayer qkv_layer = QkvLayer::kFal;
    bool positional = true;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on an inadmissible combination.
    void validate() const;
    HeadPartition partition() const { return HeadPartition::from_ratio(embed_dim, heads, p_ratio); }
};

void to_json(nlohmann::json& j, const FatConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, FatConfig& c);

template <typename T>
struct TransformerBlock {
    LayerNorm<T> norm1;
    FaaParams<T> attention;
    LayerNorm<T> norm2;
    Linear<T> ffn1;  // E -> ffn_mult * E
    Linear<T> ffn2;  // ffn_mult * E -> E
};

/// Embedding -> positional -> depth x [x + FAA(LN(x)); x + FFN(LN(x))]
/// -> mean over channels -> linear classifier. One adjacency pair is owned
/// here and handed to every block.
template <typename T>
struct FatModel {
    FatConfig config;
    EmbeddingParams<T> embedding;
    PositionalEmbedding<T> positional;
    std::vector<TransformerBlock<T>> blocks;
    AdjacencyPair<T> adjacency;
    Linear<T> classifier;

    /// All learnable tensors in declaration order.
    ParamList<T> parameters() const;
    /// BatchNorm running statistics in declaration order.
    std::vector<std::span<T>> buffers();
    std::vector<std::span<const T>> buffers() const;
};

/// Deterministic initialization from cfg.seed.
template <typename T>
FatModel<T> build_model(const FatConfig& cfg);
template <typename T>
FatModel<T> build_model(const FatConfig& cfg, Rng& rng);

/// input [B, C, F] -> logits [B, n_classes]
template <typename T>
Tensor<T> fat_forward(FatModel<T>& model, const Tensor<T>& input, const ForwardContext& ctx);

template <typename T>
std::int64_t count_params(const FatModel<T>& model);

template <typename T>
struct ReferenceBlock {
    LayerNorm<T> norm1;
    MhsaParams<T> attention;
    LayerNorm<T> norm2;
    Linear<T> ffn1;
    Linear<T> ffn2;
};

/// Plain transformer with linear QKV and standard multi-head attention,
/// the same topology as FatModel otherwise.
template <typename T>
struct ReferenceTransformer {
    EmbeddingParams<T> embedding;
    PositionalEmbedding<T> positional;
    std::vector<ReferenceBlock<T>> blocks;
    Linear<T> classifier;
    double dropout = 0.0;
};

/// Copies the weights of a FAT with no periodic heads into a reference
/// transformer. Throws if the model has periodic heads.
template <typename T>
ReferenceTransformer<T> reference_from(const FatModel<T>& model);

template <typename T>
Tensor<T> reference_forward(ReferenceTransformer<T>& model, const Tensor<T>& input, const ForwardContext& ctx);

}  // namespace fat
