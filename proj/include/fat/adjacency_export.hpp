#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fat/model.hpp"

namespace fat {

struct AdjacencyEdge {
    int i = 0;
    int j = 0;
    double weight = 0.0;
};

/// The k off-diagonal entries of a C x C row-major matrix with the largest
/// |weight|, descending; ties keep row-major order. Throws
/// std::invalid_argument when k > C^2 - C or k < 0.
std::vector<AdjacencyEdge> topk_offdiagonal(std::span<const float> matrix, std::int64_t channels, std::int64_t k);

struct AdjacencyExport {
    std::vector<AdjacencyEdge> periodic;
    std::vector<AdjacencyEdge> aperiodic;
};

/// Throws std::invalid_argument if the model has no adjacency.
AdjacencyExport export_adjacency_topk(const FatModel<float>& model, std::int64_t k = 15);

/// component,i,j,channel_name_i,channel_name_j,weight; periodic rows first.
/// Channel names default to the indices when `names` is empty.
std::string adjacency_csv(const AdjacencyExport& e, const std::vector<std::string>& names);

}  // namespace fat
