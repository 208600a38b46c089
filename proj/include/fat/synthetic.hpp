#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fat/dataset.hpp"
#include "fat/rng.hpp"

namespace fat {

using Edge = std::pair<int, int>;

/// Synthetic EEG: every coupling edge carries a latent oscillator per band.
/// In a trial of class k the oscillators in k's signature bands are shared
/// by both endpoints of every edge (same amplitude, frequency and phase),
/// scaled by signature_gain; all other oscillators are drawn independently
/// per endpoint with amplitude background_scale. Amplitudes are log-normal
/// per window; subjects apply a log-normal gain per band; channels add
/// pink-like noise.
struct SyntheticSpec {
    int n_subjects = 5;
    int trials_per_subject = 15;
    int windows_per_trial = 4;
    int channels = 16;
    double sample_rate = 200.0;
    double window_seconds = 1.0;
    int n_classes = 3;
    std::vector<std::vector<std::string>> class_signatures = {{"theta"}, {"alpha"}, {"beta"}};
    std::vector<Edge> coupling_edges = {{0, 5},  {1, 5},  {5, 10}, {10, 15}, {1, 11}, {6, 11},  {6, 13}, {8, 13},
                                        {3, 8},  {3, 12}, {7, 12}, {2, 7},   {2, 14}, {9, 14},  {4, 9}};
    double source_amplitude = 1.0;
    double amplitude_spread = 1.5;
    double signature_gain = 4.0;
    double background_scale = 1.0;
    double subject_shift_scale = 0.45;
    double noise_scale = 0.1;

    /// Throws std::invalid_argument.
    void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
/// Missing keys keep defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, SyntheticSpec& s);

struct GroundTruth {
    std::vector<Edge> coupling_edges;
    std::vector<std::vector<std::string>> class_signatures;
};

void to_json(nlohmann::json& j, const GroundTruth& g);

struct SyntheticData {
    /// One [C, windows_per_trial * window_len] block per trial, trial-major
    /// in the same order as the dataset's samples.
    std::vector<std::vector<double>> raw;
    FeatureDataset dataset;
    GroundTruth truth;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec, Rng& rng);

}  // namespace fat
