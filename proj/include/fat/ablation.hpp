#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fat/train.hpp"

namespace fat {

struct AblationCell {
    std::string label;
    std::optional<double> p_ratio;
    std::optional<bool> use_adjacency;
    std::vector<std::string> bands;  // empty keeps every band
};

struct AblationGrid {
    std::string name;
    std::vector<AblationCell> cells;
};

/// "pratio", "ada" or "bands". Throws std::invalid_argument otherwise.
AblationGrid named_grid(const std::string& name);

struct AblationRow {
    AblationCell cell;
    FatConfig model;
    std::vector<std::string> bands;
    RunMetrics metrics;
};

/// One run_scheme per cell, cells applied on top of the base configs.
std::vector<AblationRow> run_ablation(const FeatureDataset& ds, const AblationGrid& grid, const Scheme& scheme,
                                      const FatConfig& base_model, const TrainConfig& train_cfg,
                                      const RunOptions& options = {});

/// Header plus one row per cell:
/// grid,cell,p_ratio,use_adjacency,bands,n_folds,mean_accuracy,std_accuracy,fold_accuracies
std::string ablation_csv(const std::string& grid_name, const std::vector<AblationRow>& rows);

}  // namespace fat
