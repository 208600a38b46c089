#include "fat/adjacency_export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace fat {

std::vector<AdjacencyEdge> topk_offdiagonal(std::span<const float> matrix, std::int64_t channels, std::int64_t k) {
    if (static_cast<std::int64_t>(matrix.size()) != channels * channels) {
        throw std::invalid_argument("adjacency matrix is not C x C");
    }
    if (k < 0 || k > channels * channels - channels) {
        throw std::invalid_argument("k must be in [0, C^2 - C] = [0, " + std::to_string(channels * channels - channels) +
                                    "]");
    }
    std::vector<AdjacencyEdge> all;
    for (std::int64_t i = 0; i < channels; ++i) {
        for (std::int64_t j = 0; j < channels; ++j) {
            if (i != j) all.push_back({static_cast<int>(i), static_cast<int>(j), matrix[i * channels + j]});
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const AdjacencyEdge& a, const AdjacencyEdge& b) {
        return std::fabs(a.weight) > std::fabs(b.weight);
    });
    all.resize(static_cast<std::size_t>(k));
    return all;
}

AdjacencyExport export_adjacency_topk(const FatModel<float>& model, std::int64_t k) {
    if (!model.adjacency.enabled()) throw std::invalid_argument("model has no adjacency matrices");
    const auto C = model.config.channels;
    return {topk_offdiagonal(model.adjacency.periodic.data(), C, k),
            topk_offdiagonal(model.adjacency.aperiodic.data(), C, k)};
}

std::string adjacency_csv(const AdjacencyExport& e, const std::vector<std::string>& names) {
    auto name = [&](int c) { return names.empty() ? std::to_string(c) : names.at(static_cast<std::size_t>(c)); };
    std::string out = "component,i,j,channel_name_i,channel_name_j,weight\n";
    char buf[64];
    for (const auto* part : {&e.periodic, &e.aperiodic}) {
        const char* comp = part == &e.periodic ? "periodic" : "aperiodic";
        for (const auto& edge : *part) {
            std::snprintf(buf, sizeof buf, "%.9g", edge.weight);
            out += std::string(comp) + ',' + std::to_string(edge.i) + ',' + std::to_string(edge.j) + ',' +
                   name(edge.i) + ',' + name(edge.j) + ',' + buf + '\n';
        }
    }
    return out;
}

}  // namespace fat
