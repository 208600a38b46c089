#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fat/ops.hpp"
#include "fat/rng.hpp"
#include "fat/tensor.hpp"

namespace fat {

enum class Mode { kTrain, kEval };

/// Mode plus the dropout stream for one forward pass.
struct ForwardContext {
    Mode mode = Mode::kEval;
    Rng* rng = nullptr;
    bool training() const { return mode == Mode::kTrain; }
};

template <typename T>
struct Param {
    std::string name;
    Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<Param<T>>;

/// Xavier-uniform [fan_in, fan_out] matrix, limit sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_uniform(std::int64_t fan_in, std::int64_t fan_out, Rng& rng);

/// y = x W + b with W stored [in, out].
template <typename T>
struct Linear {
    Tensor<T> weight;
    Tensor<T> bias;  // undefined for a bias-free layer

    static Linear create(std::int64_t in, std::int64_t out, bool with_bias, Rng& rng);
    std::int64_t in_features() const { return weight.dim(0); }
    std::int64_t out_features() const { return weight.dim(1); }
    Tensor<T> forward(const Tensor<T>& x) const;
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

enum class Activation { kIdentity, kGelu, kRelu };

/// Fourier analytic linear projection:
///   [cos(x W_p) | sin(x W_p) | x W_n + B_n]
/// W_p is [d_in, n_per/2] and bias-free; the aperiodic branch is affine.
/// With n_per == 0 the layer is exactly the affine map (W_n, B_n).
template <typename T>
struct FalParams {
    std::int64_t d_in = 0;
    std::int64_t d_out = 0;
    std::int64_t n_per = 0;  // even, total periodic outputs (cos half + sin half)
    Tensor<T> w_p;           // [d_in, n_per/2], undefined when n_per == 0
    Tensor<T> w_n;           // [d_in, d_out - n_per], undefined when n_per == d_out
    Tensor<T> b_n;           // [d_out - n_per]

    static FalParams create(std::int64_t d_in, std::int64_t d_out, std::int64_t n_per, Rng& rng);
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
Tensor<T> fal_forward(const Tensor<T>& x, const FalParams<T>& p);

/// FAN-style projection: the same layout with an activation on the
/// aperiodic branch. Identity activation reduces to fal_forward.
template <typename T>
struct FanParams {
    FalParams<T> base;
    Activation activation = Activation::kGelu;
};

template <typename T>
Tensor<T> fan_forward(const Tensor<T>& x, const FanParams<T>& p);

template <typename T>
struct BatchNorm {
    Tensor<T> gamma;
    Tensor<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    NormOptions options;

    static BatchNorm create(std::int64_t width);
    Tensor<T> forward(const Tensor<T>& x, Mode mode);
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct LayerNorm {
    Tensor<T> gamma;
    Tensor<T> beta;

    static LayerNorm create(std::int64_t width);
    Tensor<T> forward(const Tensor<T>& x) const { return layer_norm(x, gamma, beta); }
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

/// Token embedding: ReLU(BN(f2(ReLU(BN(f1(input)))))), f1: F -> E/2,
/// f2: E/2 -> E. BN statistics are taken over the flattened batch x
/// channel token axis.
template <typename T>
struct EmbeddingParams {
    Linear<T> f1;
    BatchNorm<T> bn1;
    Linear<T> f2;
    BatchNorm<T> bn2;

    static EmbeddingParams create(std::int64_t bands, std::int64_t embed_dim, Rng& rng);
    std::int64_t bands() const { return f1.in_features(); }
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

/// input [B, C, F] -> [B, C, E]
template <typename T>
Tensor<T> embed_forward(const Tensor<T>& input, EmbeddingParams<T>& p, Mode mode);

/// Learnable additive [C, E] table, zero-initialized. Disabled tables are
/// not parameters and leave the input untouched.
template <typename T>
struct PositionalEmbedding {
    Tensor<T> table;
    bool enabled = true;

    static PositionalEmbedding create(std::int64_t channels, std::int64_t embed_dim, bool enabled);
    Tensor<T> apply(const Tensor<T>& x) const { return enabled ? add(x, table) : x; }
    void collect(ParamList<T>& out, const std::string& prefix) const;
};

}  // namespace fat
