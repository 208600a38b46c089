#pragma once

#include <cstdint>

// Dense inner loops behind the tensor ops. Each kernel has a serial
// reference and an OpenMP version that splits work over output rows only,
// so every output element sees the same sequence of floating point
// operations and both versions agree bitwise.
namespace fat::kernels {

/// C[m,n] = (accumulate ? C : 0) + op(A)[m,k] * op(B)[k,n], where op
/// transposes when the flag is set. Row-major storage; A is [m,k] or [k,m],
/// B is [k,n] or [n,k].
struct GemmArgs {
    bool trans_a = false;
    bool trans_b = false;
    std::int64_t m = 0, n = 0, k = 0;
    bool accumulate = false;
};

namespace serial {
template <typename T>
void gemm(const GemmArgs& g, const T* a, const T* b, T* c);
template <typename T>
void softmax_rows(const T* x, T* y, std::int64_t rows, std::int64_t cols);
}  // namespace serial

namespace parallel {
template <typename T>
void gemm(const GemmArgs& g, const T* a, const T* b, T* c);
template <typename T>
void softmax_rows(const T* x, T* y, std::int64_t rows, std::int64_t cols);
}  // namespace parallel

/// Dispatches to the OpenMP version for large problems when not already
/// inside a parallel region (fold-level parallelism takes precedence).
template <typename T>
void gemm(const GemmArgs& g, const T* a, const T* b, T* c);
template <typename T>
void softmax_rows(const T* x, T* y, std::int64_t rows, std::int64_t cols);

void set_parallel_enabled(bool enabled);
bool parallel_enabled();

}  // namespace fat::kernels
