#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace fat {

struct Band {
    double lo;  // Hz, inclusive
    double hi;  // Hz, exclusive
};

inline constexpr std::array<Band, 5> kBandEdges = {{{1, 4}, {4, 8}, {8, 14}, {14, 31}, {31, 50}}};
inline constexpr double kVarianceFloor = 1e-12;

/// 0.5 * ln(2 pi e var), var floored at kVarianceFloor.
double differential_entropy(double variance);

/// Band-limited variance of one window per canonical band: Hann-windowed
/// periodogram scaled so that the one-sided bins sum to the signal
/// variance, summed over the band's bins.
std::array<double, 5> band_variances(std::span<const double> window, double sample_rate);

/// signal [C, T] row-major -> DE features [n_windows, C, 5] over
/// non-overlapping windows of round(window_seconds * sample_rate) samples.
std::vector<double> compute_de(std::span<const double> signal, std::int64_t channels, double sample_rate,
                               double window_seconds);

}  // namespace fat
