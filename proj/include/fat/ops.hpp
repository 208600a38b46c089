#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fat/rng.hpp"
#include "fat/tensor.hpp"

// Differentiable primitives. Every op records a backward closure on the
// thread's active tape when a tape is active and any input requires grad.
// Binary elementwise ops broadcast numpy-style (aligned from the right).
namespace fat {

// [.., m, k] x [.., k, n] -> [.., m, n]; batch dims broadcast.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// a x b^T: [.., m, k] x [.., n, k] -> [.., m, n].
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> sin(const Tensor<T>& x);
template <typename T>
Tensor<T> cos(const Tensor<T>& x);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
/// Exact (erf) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length);
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& order);
/// out[.., j] = x[.., index[j]]
template <typename T>
Tensor<T> gather_last(const Tensor<T>& x, std::span<const std::int64_t> index);

/// Mean over one axis; the axis is removed.
template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, int axis);
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// Softmax over the last axis (max-subtracted). Throws NumericalError on NaN.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

/// Mean over rows of -log softmax(logits)[target].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> targets);
/// Mean over rows of -sum_k p_k log softmax(logits)_k; `probs` is not differentiated.
template <typename T>
Tensor<T> cross_entropy_soft(const Tensor<T>& logits, const Tensor<T>& probs);

/// Inverted dropout; identity when p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng);

struct NormOptions {
    double eps = 1e-5;
    double momentum = 0.1;
};

/// Batch normalization over all leading axes, per feature (last axis).
/// In training mode the running statistics are updated in place:
/// running = (1 - momentum) * running + momentum * batch_stat, with the
/// unbiased variance for running_var. Train mode needs x.dim(0) >= 2.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     std::span<T> running_mean, std::span<T> running_var, bool training,
                     const NormOptions& opt = {});

/// Layer normalization over the last axis.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = 1e-5);

/// Throws NumericalError naming `what` if any entry is NaN/Inf.
template <typename T>
void check_finite(const Tensor<T>& x, const char* what);

}  // namespace fat
