#pragma once

#include <span>
#include <vector>

#include "json.hpp"

#include "fat/rng.hpp"

namespace fat {

struct AugmentConfig {
    bool band_scale = true;
    double band_scale_lo = 0.9;
    double band_scale_hi = 1.1;
    bool sine = true;
    double sine_freq = 2.0;
    double sine_amp = 0.05;
    bool mixup = true;
    double mixup_alpha = 0.2;

    void validate() const;
};

void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);

struct BandScaleDraw {
    int band = -1;  // -1 when disabled
    double factor = 1.0;
};

/// x [C, F] in place: one uniformly chosen band scaled by
/// u ~ U(lo, hi) on every channel.
BandScaleDraw band_scale_augment(std::span<float> x, int channels, int bands, Rng& rng, const AugmentConfig& cfg);

/// x [C, F] in place: x[c, f] += amp * sin(2 pi freq f / F + phi_c),
/// phi_c ~ U[0, 2 pi) drawn per channel.
void sine_perturb(std::span<float> x, int channels, int bands, Rng& rng, const AugmentConfig& cfg);

struct Mixed {
    std::vector<float> sample;
    std::vector<float> label;  // soft
    double lambda = 1.0;
};

/// lambda a + (1 - lambda) b with the matching soft label.
Mixed mix_with(std::span<const float> a, std::span<const float> ya, std::span<const float> b,
               std::span<const float> yb, double lambda);
/// lambda ~ Beta(alpha, alpha). Throws std::invalid_argument for alpha <= 0.
Mixed mixup(std::span<const float> a, std::span<const float> ya, std::span<const float> b, std::span<const float> yb,
            Rng& rng, double alpha);

}  // namespace fat
