#include "fat/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "fat/features.hpp"

namespace fat {

namespace {

int band_index(const std::string& name) {
    const auto& names = canonical_bands();
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::invalid_argument("unknown band '" + name + "'");
    return static_cast<int>(it - names.begin());
}

void add_oscillator(std::vector<double>& sig, std::int64_t offset, std::int64_t len, double amp, double freq,
                    double phase, double sample_rate) {
    const double w = 2.0 * std::numbers::pi * freq / sample_rate;
    for (std::int64_t t = 0; t < len; ++t) sig[offset + t] += amp * std::sin(w * static_cast<double>(t) + phase);
}

}  // namespace

void SyntheticSpec::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("synthetic spec: " + msg); };
    if (n_subjects < 1 || trials_per_subject < 1 || windows_per_trial < 1) fail("counts must be positive");
    if (channels < 2) fail("channels must be >= 2");
    if (n_classes < 2) fail("n_classes must be >= 2");
    if (sample_rate <= 2.0 * kBandEdges.back().hi) fail("sample_rate must exceed 100 Hz");
    if (window_seconds * sample_rate < 2.0) fail("window too short");
    if (static_cast<int>(class_signatures.size()) != n_classes) fail("need one signature per class");
    for (const auto& sig : class_signatures) {
        if (sig.empty()) fail("empty class signature");
        for (const auto& b : sig) band_index(b);
    }
    std::set<std::pair<int, int>> seen;
    for (auto [i, j] : coupling_edges) {
        if (i < 0 || j < 0 || i >= channels || j >= channels) fail("coupling edge references an invalid channel");
        if (i == j) fail("coupling edge must join two distinct channels");
        if (!seen.insert({std::min(i, j), std::max(i, j)}).second) fail("duplicate coupling edge");
    }
    for (double v : {source_amplitude, amplitude_spread, signature_gain, background_scale, subject_shift_scale,
                     noise_scale}) {
        if (!std::isfinite(v) || v < 0.0) fail("scales must be finite and nonnegative");
    }
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = nlohmann::json{{"n_subjects", s.n_subjects},
                       {"trials_per_subject", s.trials_per_subject},
                       {"windows_per_trial", s.windows_per_trial},
                       {"channels", s.channels},
                       {"sample_rate", s.sample_rate},
                       {"window_seconds", s.window_seconds},
                       {"n_classes", s.n_classes},
                       {"class_signatures", s.class_signatures},
                       {"coupling_edges", s.coupling_edges},
                       {"source_amplitude", s.source_amplitude},
                       {"amplitude_spread", s.amplitude_spread},
                       {"signature_gain", s.signature_gain},
                       {"background_scale", s.background_scale},
                       {"subject_shift_scale", s.subject_shift_scale},
                       {"noise_scale", s.noise_scale}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    nlohmann::json defaults = s;
    for (const auto& [key, _] : j.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("unknown synthetic spec key '" + key + "'");
    }
    s.n_subjects = j.value("n_subjects", s.n_subjects);
    s.trials_per_subject = j.value("trials_per_subject", s.trials_per_subject);
    s.windows_per_trial = j.value("windows_per_trial", s.windows_per_trial);
    s.channels = j.value("channels", s.channels);
    s.sample_rate = j.value("sample_rate", s.sample_rate);
    s.window_seconds = j.value("window_seconds", s.window_seconds);
    s.n_classes = j.value("n_classes", s.n_classes);
    s.class_signatures = j.value("class_signatures", s.class_signatures);
    s.coupling_edges = j.value("coupling_edges", s.coupling_edges);
    s.source_amplitude = j.value("source_amplitude", s.source_amplitude);
    s.amplitude_spread = j.value("amplitude_spread", s.amplitude_spread);
    s.signature_gain = j.value("signature_gain", s.signature_gain);
    s.background_scale = j.value("background_scale", s.background_scale);
    s.subject_shift_scale = j.value("subject_shift_scale", s.subject_shift_scale);
    s.noise_scale = j.value("noise_scale", s.noise_scale);
}

void to_json(nlohmann::json& j, const GroundTruth& g) {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [a, b] : g.coupling_edges) edges.push_back({a, b});
    j = nlohmann::json{{"coupling_edges", edges}, {"class_signatures", g.class_signatures}};
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, Rng& rng) {
    spec.validate();
    const auto len = static_cast<std::int64_t>(std::llround(spec.window_seconds * spec.sample_rate));
    const auto trial_len = len * spec.windows_per_trial;
    const auto C = spec.channels;

    std::vector<std::vector<bool>> shared(static_cast<std::size_t>(spec.n_classes), std::vector<bool>(5, false));
    for (int k = 0; k < spec.n_classes; ++k) {
        for (const auto& b : spec.class_signatures[k]) shared[k][band_index(b)] = true;
    }

    // subject gains first so that they do not depend on the trial count
    std::vector<std::array<double, 5>> gains(static_cast<std::size_t>(spec.n_subjects));
    for (auto& g : gains) {
        for (auto& v : g) v = std::exp(spec.subject_shift_scale * rng.normal());
    }

    SyntheticData out;
    out.truth = {spec.coupling_edges, spec.class_signatures};
    auto& ds = out.dataset;
    ds.n_channels = C;
    ds.n_bands = 5;
    ds.n_classes = spec.n_classes;
    ds.band_names = canonical_bands();
    for (int c = 0; c < C; ++c) ds.channel_names.push_back("ch" + std::to_string(c));

    auto draw_freq = [&](int b) {
        // half a bin of margin keeps the main lobe inside the band
        const double margin = 0.5 / spec.window_seconds;
        return rng.uniform(kBandEdges[b].lo + margin, kBandEdges[b].hi - margin);
    };
    auto draw_amp = [&]() { return spec.source_amplitude * std::exp(spec.amplitude_spread * rng.normal()); };
    const double two_pi = 2.0 * std::numbers::pi;

    for (int s = 0; s < spec.n_subjects; ++s) {
        for (int trial = 0; trial < spec.trials_per_subject; ++trial) {
            const int label = trial % spec.n_classes;
            std::vector<double> sig(static_cast<std::size_t>(C * trial_len), 0.0);
            for (int w = 0; w < spec.windows_per_trial; ++w) {
                const auto off = w * len;
                for (auto [i, j] : spec.coupling_edges) {
                    for (int b = 0; b < 5; ++b) {
                        const double g = gains[s][b];
                        if (shared[label][b]) {
                            const double amp = spec.signature_gain * g * draw_amp();
                            const double f = draw_freq(b);
                            const double ph = two_pi * rng.uniform();
                            add_oscillator(sig, i * trial_len + off, len, amp, f, ph, spec.sample_rate);
                            add_oscillator(sig, j * trial_len + off, len, amp, f, ph, spec.sample_rate);
                        } else {
                            for (int ch : {i, j}) {
                                const double amp = spec.background_scale * g * draw_amp();
                                const double f = draw_freq(b);
                                const double ph = two_pi * rng.uniform();
                                add_oscillator(sig, ch * trial_len + off, len, amp, f, ph, spec.sample_rate);
                            }
                        }
                    }
                }
            }
            if (spec.noise_scale > 0.0) {
                // AR(1) plus white, normalized to unit variance before scaling
                const double rho = 0.9;
                const double ar_scale = std::sqrt(1.0 - rho * rho);
                for (int c = 0; c < C; ++c) {
                    double state = rng.normal();
                    for (std::int64_t t = 0; t < trial_len; ++t) {
                        state = rho * state + ar_scale * rng.normal();
                        sig[c * trial_len + t] += spec.noise_scale * std::sqrt(0.5) * (state + rng.normal());
                    }
                }
            }
            const auto de = compute_de(sig, C, spec.sample_rate, spec.window_seconds);
            for (int w = 0; w < spec.windows_per_trial; ++w) {
                for (std::int64_t k = 0; k < C * 5; ++k) {
                    ds.samples.push_back(static_cast<float>(de[w * C * 5 + k]));
                }
                ds.labels.push_back(label);
                ds.subjects.push_back(s);
                ds.sessions.push_back(0);
                ds.trials.push_back(trial);
            }
            out.raw.push_back(std::move(sig));
        }
    }
    ds.n_samples = static_cast<std::int64_t>(ds.labels.size());
    ds.validate();
    return out;
}

}  // namespace fat
