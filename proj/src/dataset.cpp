#include "fat/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "fat/binary_io.hpp"
#include "fat/error.hpp"

namespace fat {

const std::vector<std::string>& canonical_bands() {
    static const std::vector<std::string> names = {"delta", "theta", "alpha", "beta", "gamma"};
    return names;
}

std::vector<std::int32_t> FeatureDataset::subject_ids() const {
    std::set<std::int32_t> ids(subjects.begin(), subjects.end());
    return {ids.begin(), ids.end()};
}

void FeatureDataset::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("dataset: " + msg); };
    if (n_samples < 0 || n_channels < 1 || n_bands < 1) fail("dimensions must be positive");
    if (n_classes < 2) fail("n_classes must be >= 2");
    if (static_cast<std::int64_t>(samples.size()) != n_samples * n_channels * n_bands) {
        fail("samples has " + std::to_string(samples.size()) + " values, expected N*C*F = " +
             std::to_string(n_samples * n_channels * n_bands));
    }
    for (const auto* arr : {&labels, &subjects, &sessions, &trials}) {
        if (static_cast<std::int64_t>(arr->size()) != n_samples) fail("index arrays must have length N");
    }
    if (static_cast<std::int64_t>(band_names.size()) != n_bands) fail("band_names must have F entries");
    if (static_cast<std::int64_t>(channel_names.size()) != n_channels) fail("channel_names must have C entries");
    for (auto l : labels) {
        if (l < 0 || l >= n_classes) fail("label " + std::to_string(l) + " outside [0, n_classes)");
    }
    for (auto v : samples) {
        if (!std::isfinite(v)) fail("samples contain NaN/Inf");
    }
}

FeatureDataset select_bands(const FeatureDataset& ds, const std::vector<std::string>& bands) {
    if (bands.empty()) throw std::invalid_argument("band subset must be nonempty");
    std::vector<std::int64_t> cols;
    for (const auto& name : bands) {
        auto it = std::find(ds.band_names.begin(), ds.band_names.end(), name);
        if (it == ds.band_names.end()) throw std::invalid_argument("unknown band '" + name + "'");
        const auto col = it - ds.band_names.begin();
        if (std::find(cols.begin(), cols.end(), col) != cols.end()) {
            throw std::invalid_argument("band '" + name + "' selected twice");
        }
        cols.push_back(col);
    }
    FeatureDataset out = ds;
    out.n_bands = static_cast<std::int64_t>(cols.size());
    out.band_names = bands;
    out.samples.resize(static_cast<std::size_t>(ds.n_samples * ds.n_channels * out.n_bands));
    for (std::int64_t r = 0; r < ds.n_samples * ds.n_channels; ++r) {
        for (std::size_t f = 0; f < cols.size(); ++f) {
            out.samples[r * out.n_bands + f] = ds.samples[r * ds.n_bands + cols[f]];
        }
    }
    return out;
}

FeatureDataset subset(const FeatureDataset& ds, const std::vector<std::int64_t>& indices) {
    FeatureDataset out = ds;
    out.n_samples = static_cast<std::int64_t>(indices.size());
    out.samples.clear();
    out.labels.clear();
    out.subjects.clear();
    out.sessions.clear();
    out.trials.clear();
    for (auto i : indices) {
        if (i < 0 || i >= ds.n_samples) throw std::out_of_range("subset index out of range");
        out.samples.insert(out.samples.end(), ds.sample(i), ds.sample(i) + ds.sample_size());
        out.labels.push_back(ds.labels[i]);
        out.subjects.push_back(ds.subjects[i]);
        out.sessions.push_back(ds.sessions[i]);
        out.trials.push_back(ds.trials[i]);
    }
    return out;
}

namespace {

template <typename V>
void write_array(const std::filesystem::path& path, const std::vector<V>& values) {
    io::Bytes bytes;
    bytes.reserve(values.size() * sizeof(V));
    for (auto v : values) io::put_le(bytes, v);
    io::write_file(path, bytes);
}

template <typename V>
std::vector<V> read_array(const std::filesystem::path& path, std::int64_t expected) {
    const auto bytes = io::read_file(path);
    if (static_cast<std::int64_t>(bytes.size()) != expected * static_cast<std::int64_t>(sizeof(V))) {
        throw FormatError(path.filename().string() + " holds " + std::to_string(bytes.size()) + " bytes, manifest implies " +
                          std::to_string(expected * static_cast<std::int64_t>(sizeof(V))));
    }
    std::vector<V> out(static_cast<std::size_t>(expected));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = io::get_le<V>(bytes, i * sizeof(V));
    return out;
}

}  // namespace

void save_dataset(const FeatureDataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = {{"format", kDatasetFormat},
                               {"n_samples", ds.n_samples},
                               {"n_channels", ds.n_channels},
                               {"n_bands", ds.n_bands},
                               {"n_classes", ds.n_classes},
                               {"band_names", ds.band_names},
                               {"channel_names", ds.channel_names},
                               {"subject_ids", ds.subject_ids()}};
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    write_array(dir / "data.bin", ds.samples);
    write_array(dir / "labels.bin", ds.labels);
    write_array(dir / "subjects.bin", ds.subjects);
    write_array(dir / "sessions.bin", ds.sessions);
    write_array(dir / "trials.bin", ds.trials);
}

FeatureDataset load_dataset(const std::filesystem::path& dir) {
    const auto text = io::read_file(dir / "manifest.json");
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest.json is not valid JSON: ") + e.what());
    }
    if (!m.is_object() || m.value("format", std::string{}) != kDatasetFormat) {
        throw FormatError("manifest.json: bad or missing format magic (expected \"" + std::string(kDatasetFormat) +
                          "\")");
    }
    FeatureDataset ds;
    try {
        ds.n_samples = m.at("n_samples").get<std::int64_t>();
        ds.n_channels = m.at("n_channels").get<std::int64_t>();
        ds.n_bands = m.at("n_bands").get<std::int64_t>();
        ds.n_classes = m.at("n_classes").get<int>();
        ds.band_names = m.at("band_names").get<std::vector<std::string>>();
        ds.channel_names = m.at("channel_names").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest.json: ") + e.what());
    }
    if (ds.n_samples < 0 || ds.n_channels < 1 || ds.n_bands < 1) throw FormatError("manifest.json: bad dimensions");
    ds.samples = read_array<float>(dir / "data.bin", ds.n_samples * ds.n_channels * ds.n_bands);
    ds.labels = read_array<std::int32_t>(dir / "labels.bin", ds.n_samples);
    ds.subjects = read_array<std::int32_t>(dir / "subjects.bin", ds.n_samples);
    ds.sessions = read_array<std::int32_t>(dir / "sessions.bin", ds.n_samples);
    if (std::filesystem::exists(dir / "trials.bin")) {
        ds.trials = read_array<std::int32_t>(dir / "trials.bin", ds.n_samples);
    } else {
        ds.trials.resize(static_cast<std::size_t>(ds.n_samples));
        for (std::int64_t i = 0; i < ds.n_samples; ++i) ds.trials[i] = static_cast<std::int32_t>(i);
    }
    try {
        ds.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    if (m.contains("subject_ids") && m.at("subject_ids") != nlohmann::json(ds.subject_ids())) {
        throw FormatError("manifest.json: subject_ids disagree with subjects.bin");
    }
    return ds;
}

}  // namespace fat
