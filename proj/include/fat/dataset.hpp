#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fat {

inline constexpr char kDatasetFormat[] = "FATDATA1";

/// Canonical DE band names in feature order.
const std::vector<std::string>& canonical_bands();

/// DE feature samples [N, C, F] with per-sample labels and provenance.
/// `trials` numbers the recording trials within each (subject, session)
/// chronologically; several samples may share a trial.
struct FeatureDataset {
    std::int64_t n_samples = 0;
    std::int64_t n_channels = 0;
    std::int64_t n_bands = 0;
    int n_classes = 0;
    std::vector<float> samples;
    std::vector<std::int32_t> labels;
    std::vector<std::int32_t> subjects;
    std::vector<std::int32_t> sessions;
    std::vector<std::int32_t> trials;
    std::vector<std::string> band_names;
    std::vector<std::string> channel_names;

    std::int64_t sample_size() const { return n_channels * n_bands; }
    const float* sample(std::int64_t i) const { return samples.data() + i * sample_size(); }
    /// Sorted distinct subject ids.
    std::vector<std::int32_t> subject_ids() const;
    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;
    bool operator==(const FeatureDataset&) const = default;
};

/// Keeps the named bands, in the order given. Throws on an empty subset,
/// an unknown name or a repeated name.
FeatureDataset select_bands(const FeatureDataset& ds, const std::vector<std::string>& bands);

/// Rows `indices` of ds, in that order.
FeatureDataset subset(const FeatureDataset& ds, const std::vector<std::int64_t>& indices);

// Directory layout: manifest.json, data.bin (LE float32 [N, C, F]),
// labels.bin, subjects.bin, sessions.bin, trials.bin (LE int32 [N]).
void save_dataset(const FeatureDataset& ds, const std::filesystem::path& dir);
/// Throws FormatError on a bad manifest, size mismatch or non-finite data.
FeatureDataset load_dataset(const std::filesystem::path& dir);

}  // namespace fat
