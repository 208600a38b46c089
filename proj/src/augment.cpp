#include "fat/augment.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fat {

void AugmentConfig::validate() const {
    if (!(band_scale_lo > 0.0) || !(band_scale_hi >= band_scale_lo) || !std::isfinite(band_scale_hi)) {
        throw std::invalid_argument("band scale range must be positive with lo <= hi");
    }
    if (!std::isfinite(sine_freq) || !std::isfinite(sine_amp)) throw std::invalid_argument("sine parameters must be finite");
    if (mixup && !(mixup_alpha > 0.0)) throw std::invalid_argument("mixup_alpha must be > 0");
}

void to_json(nlohmann::json& j, const AugmentConfig& c) {
    j = nlohmann::json{{"band_scale", c.band_scale}, {"band_scale_lo", c.band_scale_lo},
                       {"band_scale_hi", c.band_scale_hi}, {"sine", c.sine},
                       {"sine_freq", c.sine_freq},   {"sine_amp", c.sine_amp},
                       {"mixup", c.mixup},           {"mixup_alpha", c.mixup_alpha}};
}

void from_json(const nlohmann::json& j, AugmentConfig& c) {
    nlohmann::json defaults = c;
    for (const auto& [key, _] : j.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("unknown augment key '" + key + "'");
    }
    c.band_scale = j.value("band_scale", c.band_scale);
    c.band_scale_lo = j.value("band_scale_lo", c.band_scale_lo);
    c.band_scale_hi = j.value("band_scale_hi", c.band_scale_hi);
    c.sine = j.value("sine", c.sine);
    c.sine_freq = j.value("sine_freq", c.sine_freq);
    c.sine_amp = j.value("sine_amp", c.sine_amp);
    c.mixup = j.value("mixup", c.mixup);
    c.mixup_alpha = j.value("mixup_alpha", c.mixup_alpha);
}

BandScaleDraw band_scale_augment(std::span<float> x, int channels, int bands, Rng& rng, const AugmentConfig& cfg) {
    if (!cfg.band_scale) return {};
    BandScaleDraw d;
    d.band = static_cast<int>(rng.below(static_cast<std::uint64_t>(bands)));
    d.factor = rng.uniform(cfg.band_scale_lo, cfg.band_scale_hi);
    for (int c = 0; c < channels; ++c) {
        auto& v = x[static_cast<std::size_t>(c * bands + d.band)];
        v = static_cast<float>(v * d.factor);
    }
    return d;
}

void sine_perturb(std::span<float> x, int channels, int bands, Rng& rng, const AugmentConfig& cfg) {
    if (!cfg.sine) return;
    const double two_pi = 2.0 * std::numbers::pi;
    for (int c = 0; c < channels; ++c) {
        const double phi = two_pi * rng.uniform();
        for (int f = 0; f < bands; ++f) {
            const double t = static_cast<double>(f) / bands;
            auto& v = x[static_cast<std::size_t>(c * bands + f)];
            v = static_cast<float>(v + cfg.sine_amp * std::sin(two_pi * cfg.sine_freq * t + phi));
        }
    }
}

Mixed mix_with(std::span<const float> a, std::span<const float> ya, std::span<const float> b,
               std::span<const float> yb, double lambda) {
    if (a.size() != b.size() || ya.size() != yb.size()) throw std::invalid_argument("mixup operands differ in shape");
    Mixed m;
    m.lambda = lambda;
    m.sample.resize(a.size());
    m.label.resize(ya.size());
    const double mu = 1.0 - lambda;
    for (std::size_t i = 0; i < a.size(); ++i) m.sample[i] = static_cast<float>(lambda * a[i] + mu * b[i]);
    for (std::size_t i = 0; i < ya.size(); ++i) m.label[i] = static_cast<float>(lambda * ya[i] + mu * yb[i]);
    return m;
}

Mixed mixup(std::span<const float> a, std::span<const float> ya, std::span<const float> b, std::span<const float> yb,
            Rng& rng, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("mixup alpha must be > 0");
    return mix_with(a, ya, b, yb, rng.beta(alpha, alpha));
}

}  // namespace fat
