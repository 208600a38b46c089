#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "fat/synthetic.hpp"

namespace fat {
namespace {

double correlation(const std::vector<double>& sig, std::int64_t len, int a, int b) {
    double ma = 0, mb = 0;
    for (std::int64_t t = 0; t < len; ++t) {
        ma += sig[a * len + t];
        mb += sig[b * len + t];
    }
    ma /= static_cast<double>(len);
    mb /= static_cast<double>(len);
    double sab = 0, saa = 0, sbb = 0;
    for (std::int64_t t = 0; t < len; ++t) {
        const double x = sig[a * len + t] - ma, y = sig[b * len + t] - mb;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    return sab / std::sqrt(saa * sbb);
}

TEST(Synthetic, ShapesLabelsAndProvenance) {
    SyntheticSpec spec;
    spec.n_subjects = 2;
    spec.trials_per_subject = 4;
    spec.windows_per_trial = 3;
    Rng rng(1);
    auto data = generate_synthetic(spec, rng);
    const auto& ds = data.dataset;
    EXPECT_EQ(ds.n_samples, 2 * 4 * 3);
    EXPECT_EQ(ds.n_channels, 16);
    EXPECT_EQ(ds.n_bands, 5);
    EXPECT_EQ(ds.band_names, canonical_bands());
    EXPECT_EQ(ds.channel_names[15], "ch15");
    ASSERT_EQ(data.raw.size(), 8u);
    EXPECT_EQ(data.raw[0].size(), 16u * 3u * 200u);
    for (std::int64_t i = 0; i < ds.n_samples; ++i) {
        const auto trial = (i / 3) % 4;
        EXPECT_EQ(ds.trials[i], trial);
        EXPECT_EQ(ds.labels[i], trial % 3);
        EXPECT_EQ(ds.subjects[i], i / 12);
        EXPECT_EQ(ds.sessions[i], 0);
    }
    EXPECT_EQ(data.truth.coupling_edges, spec.coupling_edges);
    nlohmann::json truth = data.truth;
    EXPECT_EQ(truth["coupling_edges"][0], nlohmann::json::array({spec.coupling_edges[0].first,
                                                                  spec.coupling_edges[0].second}));
}

TEST(Synthetic, DefaultGroundTruthHasFifteenDistinctEdges) {
    SyntheticSpec spec;
    std::set<std::pair<int, int>> edges;
    for (auto [i, j] : spec.coupling_edges) edges.insert({std::min(i, j), std::max(i, j)});
    EXPECT_EQ(edges.size(), 15u);
    EXPECT_EQ(spec.channels, 16);
    EXPECT_EQ(spec.n_subjects, 5);
    EXPECT_EQ(spec.n_classes, 3);
}

TEST(Synthetic, ReproducibleBitwise) {
    SyntheticSpec spec;
    spec.n_subjects = 2;
    spec.trials_per_subject = 3;
    Rng a(7), b(7), c(8);
    auto x = generate_synthetic(spec, a);
    auto y = generate_synthetic(spec, b);
    auto z = generate_synthetic(spec, c);
    EXPECT_TRUE(x.dataset == y.dataset);
    EXPECT_EQ(x.raw, y.raw);
    EXPECT_FALSE(x.dataset.samples == z.dataset.samples);
}

TEST(Synthetic, ZeroNoiseDeConcentratesInSignatureBand) {
    SyntheticSpec spec;
    spec.n_subjects = 1;
    spec.trials_per_subject = 4;
    spec.n_classes = 2;
    spec.class_signatures = {{"alpha"}, {"gamma"}};
    spec.background_scale = 0.0;
    spec.noise_scale = 0.0;
    spec.subject_shift_scale = 0.0;
    Rng rng(2);
    auto ds = generate_synthetic(spec, rng).dataset;
    for (std::int64_t i = 0; i < ds.n_samples; ++i) {
        const int want = ds.labels[i] == 0 ? 2 : 4;
        for (std::int64_t c = 0; c < ds.n_channels; ++c) {
            const float* row = ds.sample(i) + c * 5;
            const int best = static_cast<int>(std::max_element(row, row + 5) - row);
            EXPECT_EQ(best, want) << "sample " << i << " channel " << c;
        }
    }
}

TEST(Synthetic, CoupledPairsCorrelateMoreThanUncoupled) {
    // one trial is dominated by its own oscillators; average over many
    SyntheticSpec spec;
    spec.n_subjects = 1;
    spec.trials_per_subject = 40;
    spec.noise_scale = 0.0;
    Rng rng(3);
    auto data = generate_synthetic(spec, rng);
    const auto len = static_cast<std::int64_t>(data.raw[0].size() / spec.channels);
    std::set<std::pair<int, int>> coupled;
    for (auto [i, j] : spec.coupling_edges) coupled.insert({std::min(i, j), std::max(i, j)});
    std::vector<double> mean_r(static_cast<std::size_t>(spec.channels * spec.channels), 0.0);
    for (const auto& sig : data.raw) {
        for (int a = 0; a < spec.channels; ++a) {
            for (int b = a + 1; b < spec.channels; ++b) mean_r[a * spec.channels + b] += correlation(sig, len, a, b) / 40.0;
        }
    }
    double min_coupled = 1.0, max_uncoupled = 0.0;
    for (int a = 0; a < spec.channels; ++a) {
        for (int b = a + 1; b < spec.channels; ++b) {
            const double r = mean_r[a * spec.channels + b];
            if (coupled.count({a, b})) {
                min_coupled = std::min(min_coupled, r);
            } else {
                max_uncoupled = std::max(max_uncoupled, std::fabs(r));
            }
        }
    }
    EXPECT_GT(min_coupled, max_uncoupled);
}

TEST(Synthetic, LinearClassifierBeatsChance) {
    // nearest class centroid on DE features, 200 trials, held-out second half of each subject
    SyntheticSpec spec;
    spec.trials_per_subject = 40;
    spec.windows_per_trial = 1;
    Rng rng(4);
    auto ds = generate_synthetic(spec, rng).dataset;
    ASSERT_EQ(ds.n_samples, 200);
    const auto d = ds.sample_size();
    std::vector<std::vector<double>> centroid(3, std::vector<double>(static_cast<std::size_t>(d), 0.0));
    std::vector<int> count(3, 0);
    std::vector<std::int64_t> test;
    for (std::int64_t i = 0; i < ds.n_samples; ++i) {
        if (ds.trials[i] >= 20) {
            test.push_back(i);
            continue;
        }
        ++count[ds.labels[i]];
        for (std::int64_t k = 0; k < d; ++k) centroid[ds.labels[i]][k] += ds.sample(i)[k];
    }
    for (int c = 0; c < 3; ++c) {
        for (auto& v : centroid[c]) v /= count[c];
    }
    int correct = 0;
    for (auto i : test) {
        int best = 0;
        double best_d = 1e300;
        for (int c = 0; c < 3; ++c) {
            double dist = 0;
            for (std::int64_t k = 0; k < d; ++k) dist += std::pow(ds.sample(i)[k] - centroid[c][k], 2);
            if (dist < best_d) {
                best_d = dist;
                best = c;
            }
        }
        correct += best == ds.labels[i];
    }
    EXPECT_GT(static_cast<double>(correct) / test.size(), 0.5);
}

TEST(Synthetic, SpecValidationAndJson) {
    SyntheticSpec spec;
    nlohmann::json j = spec;
    EXPECT_EQ(nlohmann::json(j.get<SyntheticSpec>()), j);
    j["colour"] = "pink";
    EXPECT_THROW(j.get<SyntheticSpec>(), std::invalid_argument);
    auto bad = spec;
    bad.coupling_edges.push_back({3, 16});
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = spec;
    bad.coupling_edges.push_back({5, 0});
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = spec;
    bad.class_signatures[0] = {"mu"};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = spec;
    bad.noise_scale = -1;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace fat
