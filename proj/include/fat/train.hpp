#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fat/augment.hpp"
#include "fat/dataset.hpp"
#include "fat/model.hpp"
#include "fat/splits.hpp"

namespace fat {

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    int epochs = 200;
    int batch_size = 32;
    AugmentConfig augment;
    std::uint64_t seed = 0;
    /// Test accuracy is recorded every eval_every epochs and after the last
    /// one; 0 records it only after the last epoch.
    int eval_every = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    std::optional<double> test_accuracy;
};

struct FoldResult {
    int fold = 0;
    std::int32_t held_out_subject = -1;
    std::int64_t n_train = 0;
    std::int64_t n_test = 0;
    std::vector<EpochRecord> epochs;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    /// FNV-1a over the initial parameter bytes.
    std::uint64_t init_checksum = 0;
};

struct RunMetrics {
    std::string scheme;
    std::vector<FoldResult> folds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // population std over fold accuracies

    std::vector<double> fold_accuracies() const;
};

/// Population mean and standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// argmax accuracy of logits [N, K] against labels.
double accuracy_from_logits(std::span<const float> logits, int n_classes, std::span<const std::int32_t> labels);

/// Eval-mode logits [indices.size(), K]. Throws on an empty index set.
std::vector<float> predict(FatModel<float>& model, const FeatureDataset& ds, const std::vector<std::int64_t>& indices);
double evaluate(FatModel<float>& model, const FeatureDataset& ds, const std::vector<std::int64_t>& indices);

std::uint64_t parameter_checksum(const FatModel<float>& model);

/// Trains `model` in place on `train` with shuffled minibatches, per-sample
/// band scaling and sine perturbation, then Mixup, Adam updates. `test`
/// may be empty. Throws DivergenceError on a non-finite loss.
FoldResult train(FatModel<float>& model, const FeatureDataset& ds, const std::vector<std::int64_t>& train_idx,
                 const std::vector<std::int64_t>& test_idx, const TrainConfig& cfg, Rng& rng);

/// Model config with channels/bands/classes taken from the dataset.
FatConfig fit_to_dataset(FatConfig cfg, const FeatureDataset& ds);

struct RunOptions {
    /// Worker cap for parallel folds; 0 uses all available threads.
    int jobs = 0;
    /// Receives each fold's trained model (called from the worker thread).
    std::function<void(int fold, const FatModel<float>&)> on_model;
};

/// Fresh model per fold (initialized from model_cfg.seed), training stream
/// Rng::derive(train_cfg.seed, fold). Folds may run concurrently.
RunMetrics run_scheme(const FeatureDataset& ds, const Scheme& scheme, const FatConfig& model_cfg,
                      const TrainConfig& train_cfg, const RunOptions& options = {});

nlohmann::json epoch_record_json(const FoldResult& fold, const EpochRecord& e);
nlohmann::json fold_record_json(const FoldResult& fold);
nlohmann::json summary_record_json(const RunMetrics& m);
/// One line per (fold, epoch), then one per fold, then the summary.
void write_metrics_jsonl(std::ostream& out, const RunMetrics& m);

}  // namespace fat
