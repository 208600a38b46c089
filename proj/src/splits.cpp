#include "fat/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fat/rng.hpp"

namespace fat {

namespace {

int parse_positive(const std::string& s, const std::string& text) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || v < 1) throw std::invalid_argument("bad scheme '" + text + "'");
    return v;
}

using TrialKey = std::pair<std::int32_t, std::int32_t>;  // (session, trial)

// subject -> ordered trial key -> sample indices
std::map<std::int32_t, std::map<TrialKey, std::vector<std::int64_t>>> group_trials(const FeatureDataset& ds) {
    std::map<std::int32_t, std::map<TrialKey, std::vector<std::int64_t>>> out;
    for (std::int64_t i = 0; i < ds.n_samples; ++i) out[ds.subjects[i]][{ds.sessions[i], ds.trials[i]}].push_back(i);
    return out;
}

}  // namespace

Scheme Scheme::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    Scheme s;
    if (parts.size() == 1 && parts[0] == "loso") {
        s.kind = Kind::kLoso;
    } else if (parts.size() == 3 && parts[0] == "ratio") {
        s.kind = Kind::kTrialRatio;
        s.a = parse_positive(parts[1], text);
        s.b = parse_positive(parts[2], text);
    } else if (parts.size() == 2 && parts[0] == "kfold") {
        s.kind = Kind::kKFold;
        s.a = parse_positive(parts[1], text);
        if (s.a < 2) throw std::invalid_argument("kfold needs k >= 2");
    } else {
        throw std::invalid_argument("unknown scheme '" + text + "' (expected loso, ratio:a:b or kfold:k)");
    }
    return s;
}

std::string Scheme::to_string() const {
    switch (kind) {
        case Kind::kLoso: return "loso";
        case Kind::kTrialRatio: return "ratio:" + std::to_string(a) + ":" + std::to_string(b);
        case Kind::kKFold: return "kfold:" + std::to_string(a);
    }
    return "loso";
}

SplitPlan make_splits(const FeatureDataset& ds, const Scheme& scheme, std::uint64_t seed) {
    if (ds.n_samples == 0) throw std::invalid_argument("cannot split an empty dataset");
    SplitPlan plan{scheme, {}};
    const auto grouped = group_trials(ds);

    if (scheme.kind == Scheme::Kind::kLoso) {
        if (grouped.size() < 2) throw std::invalid_argument("LOSO needs at least two subjects");
        for (const auto& [subject, _] : grouped) {
            Fold f;
            f.held_out_subject = subject;
            for (std::int64_t i = 0; i < ds.n_samples; ++i) (ds.subjects[i] == subject ? f.test : f.train).push_back(i);
            plan.folds.push_back(std::move(f));
        }
        return plan;
    }

    if (scheme.kind == Scheme::Kind::kTrialRatio) {
        Fold f;
        for (const auto& [subject, trials] : grouped) {
            const auto n = static_cast<std::int64_t>(trials.size());
            const auto n_train =
                static_cast<std::int64_t>(std::llround(static_cast<double>(n) * scheme.a / (scheme.a + scheme.b)));
            if (n_train < 1 || n_train >= n) {
                throw std::invalid_argument("subject " + std::to_string(subject) + " has " + std::to_string(n) +
                                            " trials, too few for ratio " + std::to_string(scheme.a) + ":" +
                                            std::to_string(scheme.b));
            }
            std::int64_t t = 0;
            for (const auto& [key, idx] : trials) {
                auto& dst = t++ < n_train ? f.train : f.test;
                dst.insert(dst.end(), idx.begin(), idx.end());
            }
        }
        std::sort(f.train.begin(), f.train.end());
        std::sort(f.test.begin(), f.test.end());
        plan.folds.push_back(std::move(f));
        return plan;
    }

    const int k = scheme.a;
    plan.folds.resize(static_cast<std::size_t>(k));
    Rng rng(seed);
    for (const auto& [subject, trials] : grouped) {
        if (static_cast<int>(trials.size()) < k) {
            throw std::invalid_argument("subject " + std::to_string(subject) + " has fewer trials than folds");
        }
        std::vector<const std::vector<std::int64_t>*> order;
        for (const auto& [key, idx] : trials) order.push_back(&idx);
        rng.shuffle(order.begin(), order.end());
        for (std::size_t t = 0; t < order.size(); ++t) {
            const auto fold = static_cast<int>(t % static_cast<std::size_t>(k));
            for (int g = 0; g < k; ++g) {
                auto& dst = g == fold ? plan.folds[g].test : plan.folds[g].train;
                dst.insert(dst.end(), order[t]->begin(), order[t]->end());
            }
        }
    }
    for (auto& f : plan.folds) {
        std::sort(f.train.begin(), f.train.end());
        std::sort(f.test.begin(), f.test.end());
    }
    return plan;
}

}  // namespace fat
