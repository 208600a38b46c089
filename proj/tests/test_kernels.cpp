#include <gtest/gtest.h>

#include <omp.h>

#include <cstring>

#include "fat/kernels.hpp"
#include "fat/rng.hpp"

namespace fat::kernels {
namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, Rng& rng) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.normal());
    return v;
}

template <typename T>
void expect_bitwise(const std::vector<T>& a, const std::vector<T>& b) {
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(T)), 0);
}

template <typename T>
void check_gemm(Rng& rng) {
    for (bool ta : {false, true}) {
        for (bool tb : {false, true}) {
            for (bool acc : {false, true}) {
                GemmArgs g{ta, tb, 67, 45, 38, acc};
                auto a = random_vec<T>(static_cast<std::size_t>(g.m * g.k), rng);
                auto b = random_vec<T>(static_cast<std::size_t>(g.k * g.n), rng);
                auto c0 = random_vec<T>(static_cast<std::size_t>(g.m * g.n), rng);
                auto c1 = c0;
                const auto init = c0;
                serial::gemm(g, a.data(), b.data(), c0.data());
                parallel::gemm(g, a.data(), b.data(), c1.data());
                expect_bitwise(c0, c1);
                // spot-check against the definition
                const auto at = [&](std::int64_t i, std::int64_t p) { return ta ? a[p * g.m + i] : a[i * g.k + p]; };
                const auto bt = [&](std::int64_t p, std::int64_t j) { return tb ? b[j * g.k + p] : b[p * g.n + j]; };
                double s = 0;
                for (std::int64_t p = 0; p < g.k; ++p) s += static_cast<double>(at(5, p)) * bt(p, 7);
                EXPECT_NEAR(c0[5 * g.n + 7] - (acc ? init[5 * g.n + 7] : 0), s, 1e-3);
            }
        }
    }
}

TEST(Kernels, SerialAndParallelGemmAgreeBitwise) {
    Rng rng(1);
    check_gemm<float>(rng);
    check_gemm<double>(rng);
}

TEST(Kernels, SerialAndParallelSoftmaxAgreeBitwise) {
    Rng rng(2);
    auto x = random_vec<double>(301 * 17, rng);
    std::vector<double> y0(x.size()), y1(x.size());
    serial::softmax_rows(x.data(), y0.data(), 301, 17);
    parallel::softmax_rows(x.data(), y1.data(), 301, 17);
    expect_bitwise(y0, y1);
    auto xf = random_vec<float>(129 * 33, rng);
    std::vector<float> z0(xf.size()), z1(xf.size());
    serial::softmax_rows(xf.data(), z0.data(), 129, 33);
    parallel::softmax_rows(xf.data(), z1.data(), 129, 33);
    expect_bitwise(z0, z1);
}

TEST(Kernels, DispatchMatchesSerialWithParallelismToggled) {
    Rng rng(3);
    GemmArgs g{false, true, 300, 260, 90, false};
    auto a = random_vec<float>(static_cast<std::size_t>(g.m * g.k), rng);
    auto b = random_vec<float>(static_cast<std::size_t>(g.k * g.n), rng);
    std::vector<float> ref(static_cast<std::size_t>(g.m * g.n)), on(ref.size()), off(ref.size());
    serial::gemm(g, a.data(), b.data(), ref.data());
    set_parallel_enabled(true);
    gemm(g, a.data(), b.data(), on.data());
    set_parallel_enabled(false);
    gemm(g, a.data(), b.data(), off.data());
    set_parallel_enabled(true);
    expect_bitwise(ref, on);
    expect_bitwise(ref, off);
}

}  // namespace
}  // namespace fat::kernels
