#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fat/dataset.hpp"

namespace fat {

struct Scheme {
    enum class Kind { kTrialRatio, kKFold, kLoso };
    Kind kind = Kind::kLoso;
    int a = 0;  // trial_ratio train part, or k
    int b = 0;  // trial_ratio test part

    /// "loso", "ratio:a:b" or "kfold:k". Throws std::invalid_argument.
    static Scheme parse(const std::string& text);
    std::string to_string() const;
};

struct Fold {
    std::vector<std::int64_t> train;
    std::vector<std::int64_t> test;
    std::int32_t held_out_subject = -1;  // LOSO only
};

struct SplitPlan {
    Scheme scheme;
    std::vector<Fold> folds;
};

/// Trial-ratio and k-fold split the trials of every subject (trials are keyed
/// by session and trial number); LOSO holds out one subject per fold. The
/// seed only affects k-fold trial assignment. Throws std::invalid_argument
/// when the dataset cannot support the scheme.
SplitPlan make_splits(const FeatureDataset& ds, const Scheme& scheme, std::uint64_t seed);

}  // namespace fat
