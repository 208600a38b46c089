#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "json.hpp"

#include "fat/binary_io.hpp"
#include "fat/dataset.hpp"
#include "fat/error.hpp"
#include "fat/rng.hpp"
#include "temp_dir.hpp"

namespace fat {
namespace {

FeatureDataset make_dataset(std::uint64_t seed) {
    Rng rng(seed);
    FeatureDataset ds;
    ds.n_samples = 7;
    ds.n_channels = 3;
    ds.n_bands = 5;
    ds.n_classes = 3;
    ds.band_names = canonical_bands();
    ds.channel_names = {"a", "b", "c"};
    for (int i = 0; i < 7 * 3 * 5; ++i) ds.samples.push_back(static_cast<float>(rng.normal()));
    for (int i = 0; i < 7; ++i) {
        ds.labels.push_back(i % 3);
        ds.subjects.push_back(i < 4 ? 2 : 9);
        ds.sessions.push_back(0);
        ds.trials.push_back(i / 2);
    }
    return ds;
}

TEST(Dataset, CanonicalBands) {
    EXPECT_EQ(canonical_bands(), (std::vector<std::string>{"delta", "theta", "alpha", "beta", "gamma"}));
}

TEST(Dataset, SaveLoadIsBitwiseRoundTrip) {
    fat::testing::TempDir dir;
    auto ds = make_dataset(1);
    // denormals and signed zero survive
    ds.samples[0] = -0.0f;
    ds.samples[1] = std::numeric_limits<float>::denorm_min();
    save_dataset(ds, dir / "a");
    auto back = load_dataset(dir / "a");
    EXPECT_TRUE(back == ds);
    EXPECT_TRUE(std::signbit(back.samples[0]));
    save_dataset(back, dir / "b");
    for (const char* f : {"manifest.json", "data.bin", "labels.bin", "subjects.bin", "sessions.bin", "trials.bin"}) {
        EXPECT_EQ(io::read_file(dir / "a" / f), io::read_file(dir / "b" / f)) << f;
    }
    EXPECT_EQ(io::read_file(dir / "a" / "data.bin").size(), 7u * 15u * 4u);
}

TEST(Dataset, LittleEndianLayout) {
    fat::testing::TempDir dir;
    auto ds = make_dataset(2);
    ds.samples[0] = 1.0f;  // 0x3f800000
    ds.labels[0] = 2;
    save_dataset(ds, dir.path());
    auto data = io::read_file(dir / "data.bin");
    EXPECT_EQ(data[0], 0x00);
    EXPECT_EQ(data[3], 0x3f);
    EXPECT_EQ(data[2], 0x80);
    auto labels = io::read_file(dir / "labels.bin");
    EXPECT_EQ(labels[0], 2);
    EXPECT_EQ(labels[1], 0);
}

void rewrite_manifest(const std::filesystem::path& dir, const std::function<void(nlohmann::json&)>& edit) {
    auto bytes = io::read_file(dir / "manifest.json");
    auto m = nlohmann::json::parse(bytes.begin(), bytes.end());
    edit(m);
    io::write_text(dir / "manifest.json", m.dump(2));
}

TEST(Dataset, CorruptInputsAreFormatErrors) {
    fat::testing::TempDir dir;
    auto ds = make_dataset(3);
    save_dataset(ds, dir.path());
    rewrite_manifest(dir.path(), [](nlohmann::json& m) { m["format"] = "FATDATA0"; });
    EXPECT_THROW(load_dataset(dir.path()), FormatError);

    save_dataset(ds, dir.path());
    rewrite_manifest(dir.path(), [](nlohmann::json& m) { m.erase("format"); });
    EXPECT_THROW(load_dataset(dir.path()), FormatError);

    save_dataset(ds, dir.path());
    rewrite_manifest(dir.path(), [](nlohmann::json& m) { m["n_samples"] = 8; });
    EXPECT_THROW(load_dataset(dir.path()), FormatError);

    save_dataset(ds, dir.path());
    rewrite_manifest(dir.path(), [](nlohmann::json& m) { m["subject_ids"] = {2}; });
    EXPECT_THROW(load_dataset(dir.path()), FormatError);

    save_dataset(ds, dir.path());
    io::write_text(dir / "manifest.json", "{not json");
    EXPECT_THROW(load_dataset(dir.path()), FormatError);

    save_dataset(ds, dir.path());
    auto data = io::read_file(dir / "data.bin");
    data.pop_back();
    io::write_file(dir / "data.bin", data);
    EXPECT_THROW(load_dataset(dir.path()), FormatError);

    save_dataset(ds, dir.path());
    auto labels = io::read_file(dir / "labels.bin");
    labels[0] = 7;
    io::write_file(dir / "labels.bin", labels);
    EXPECT_THROW(load_dataset(dir.path()), FormatError);

    save_dataset(ds, dir.path());
    data = io::read_file(dir / "data.bin");
    data[2] = 0xc0;
    data[3] = 0x7f;  // NaN
    io::write_file(dir / "data.bin", data);
    EXPECT_THROW(load_dataset(dir.path()), FormatError);
}

TEST(Dataset, MissingTrialsDefaultToSampleIndex) {
    fat::testing::TempDir dir;
    save_dataset(make_dataset(4), dir.path());
    std::filesystem::remove(dir / "trials.bin");
    auto back = load_dataset(dir.path());
    for (std::int64_t i = 0; i < back.n_samples; ++i) EXPECT_EQ(back.trials[i], i);
}

TEST(Dataset, ValidateCatchesInconsistency) {
    auto ds = make_dataset(5);
    EXPECT_NO_THROW(ds.validate());
    auto bad = ds;
    bad.labels[0] = -1;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = ds;
    bad.samples.pop_back();
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = ds;
    bad.channel_names.pop_back();
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = ds;
    bad.trials.push_back(0);
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    EXPECT_EQ(ds.subject_ids(), (std::vector<std::int32_t>{2, 9}));
}

TEST(Dataset, SelectBandsReordersColumns) {
    auto ds = make_dataset(6);
    auto sel = select_bands(ds, {"gamma", "theta"});
    EXPECT_EQ(sel.n_bands, 2);
    EXPECT_EQ(sel.band_names, (std::vector<std::string>{"gamma", "theta"}));
    for (std::int64_t i = 0; i < ds.n_samples; ++i) {
        for (std::int64_t c = 0; c < ds.n_channels; ++c) {
            EXPECT_EQ(sel.sample(i)[c * 2 + 0], ds.sample(i)[c * 5 + 4]);
            EXPECT_EQ(sel.sample(i)[c * 2 + 1], ds.sample(i)[c * 5 + 1]);
        }
    }
    EXPECT_EQ(sel.labels, ds.labels);
    EXPECT_THROW(select_bands(ds, {}), std::invalid_argument);
    EXPECT_THROW(select_bands(ds, {"mu"}), std::invalid_argument);
    EXPECT_THROW(select_bands(ds, {"beta", "beta"}), std::invalid_argument);
}

TEST(Dataset, SubsetKeepsRowsInOrder) {
    auto ds = make_dataset(7);
    auto s = subset(ds, {5, 0, 5});
    EXPECT_EQ(s.n_samples, 3);
    EXPECT_EQ(s.labels, (std::vector<std::int32_t>{ds.labels[5], ds.labels[0], ds.labels[5]}));
    EXPECT_EQ(s.subjects, (std::vector<std::int32_t>{9, 2, 9}));
    for (int k = 0; k < 15; ++k) EXPECT_EQ(s.sample(1)[k], ds.sample(0)[k]);
    EXPECT_THROW(subset(ds, {7}), std::out_of_range);
}

}  // namespace
}  // namespace fat
