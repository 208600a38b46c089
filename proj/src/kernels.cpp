#include "fat/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>

namespace fat::kernels {
namespace {

std::atomic<bool> g_parallel{true};
constexpr std::int64_t kGemmParallelWork = 1 << 16;
constexpr std::int64_t kSoftmaxParallelWork = 1 << 14;

// Rows [r0, r1) of C. Per element the products are summed in ascending k.
template <typename T>
void gemm_rows(const GemmArgs& g, const T* a, const T* b, T* c, std::int64_t r0, std::int64_t r1) {
    const std::int64_t m = g.m, n = g.n, k = g.k;
    if (!g.accumulate) std::fill(c + r0 * n, c + r1 * n, T(0));
    if (!g.trans_a && !g.trans_b) {
        for (std::int64_t i = r0; i < r1; ++i) {
            T* ci = c + i * n;
            const T* ai = a + i * k;
            for (std::int64_t p = 0; p < k; ++p) {
                const T av = ai[p];
                const T* bp = b + p * n;
                for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    } else if (!g.trans_a && g.trans_b) {
        for (std::int64_t i = r0; i < r1; ++i) {
            const T* ai = a + i * k;
            T* ci = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) {
                const T* bj = b + j * k;
                T s = ci[j];
                for (std::int64_t p = 0; p < k; ++p) s += ai[p] * bj[p];
                ci[j] = s;
            }
        }
    } else if (g.trans_a && !g.trans_b) {
        for (std::int64_t p = 0; p < k; ++p) {
            const T* ap = a + p * m;
            const T* bp = b + p * n;
            for (std::int64_t i = r0; i < r1; ++i) {
                const T av = ap[i];
                T* ci = c + i * n;
                for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    } else {
        for (std::int64_t i = r0; i < r1; ++i) {
            T* ci = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) {
                const T* bj = b + j * k;
                T s = ci[j];
                for (std::int64_t p = 0; p < k; ++p) s += a[p * m + i] * bj[p];
                ci[j] = s;
            }
        }
    }
}

template <typename T>
void softmax_row_range(const T* x, T* y, std::int64_t r0, std::int64_t r1, std::int64_t cols) {
    for (std::int64_t r = r0; r < r1; ++r) {
        const T* xr = x + r * cols;
        T* yr = y + r * cols;
        T mx = xr[0];
        for (std::int64_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        T sum = 0;
        for (std::int64_t j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const T inv = T(1) / sum;
        for (std::int64_t j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

bool use_parallel(std::int64_t work, std::int64_t threshold) {
    return g_parallel.load(std::memory_order_relaxed) && work >= threshold && !omp_in_parallel() &&
           omp_get_max_threads() > 1;
}

}  // namespace

namespace serial {
template <typename T>
void gemm(const GemmArgs& g, const T* a, const T* b, T* c) {
    gemm_rows(g, a, b, c, 0, g.m);
}
template <typename T>
void softmax_rows(const T* x, T* y, std::int64_t rows, std::int64_t cols) {
    softmax_row_range(x, y, 0, rows, cols);
}
}  // namespace serial

namespace parallel {
template <typename T>
void gemm(const GemmArgs& g, const T* a, const T* b, T* c) {
    const std::int64_t m = g.m;
#pragma omp parallel
    {
        const std::int64_t nt = omp_get_num_threads();
        const std::int64_t t = omp_get_thread_num();
        const std::int64_t chunk = (m + nt - 1) / nt;
        const std::int64_t r0 = std::min(m, t * chunk);
        const std::int64_t r1 = std::min(m, r0 + chunk);
        if (r0 < r1) gemm_rows(g, a, b, c, r0, r1);
    }
}
template <typename T>
void softmax_rows(const T* x, T* y, std::int64_t rows, std::int64_t cols) {
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) softmax_row_range(x, y, r, r + 1, cols);
}
}  // namespace parallel

template <typename T>
void gemm(const GemmArgs& g, const T* a, const T* b, T* c) {
    if (g.m == 0 || g.n == 0) return;
    if (use_parallel(g.m * g.n * g.k, kGemmParallelWork) && g.m > 1) {
        parallel::gemm(g, a, b, c);
    } else {
        serial::gemm(g, a, b, c);
    }
}

template <typename T>
void softmax_rows(const T* x, T* y, std::int64_t rows, std::int64_t cols) {
    if (rows == 0 || cols == 0) return;
    if (use_parallel(rows * cols, kSoftmaxParallelWork)) {
        parallel::softmax_rows(x, y, rows, cols);
    } else {
        serial::softmax_rows(x, y, rows, cols);
    }
}

void set_parallel_enabled(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

#define FAT_INSTANTIATE(T)                                                           \
    template void serial::gemm<T>(const GemmArgs&, const T*, const T*, T*);          \
    template void parallel::gemm<T>(const GemmArgs&, const T*, const T*, T*);        \
    template void gemm<T>(const GemmArgs&, const T*, const T*, T*);                  \
    template void serial::softmax_rows<T>(const T*, T*, std::int64_t, std::int64_t);   \
    template void parallel::softmax_rows<T>(const T*, T*, std::int64_t, std::int64_t); \
    template void softmax_rows<T>(const T*, T*, std::int64_t, std::int64_t);

FAT_INSTANTIATE(float)
FAT_INSTANTIATE(double)
#undef FAT_INSTANTIATE

}  // namespace fat::kernels
