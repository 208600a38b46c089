#pragma once

#include <string>
#include <vector>

#include "fat/gradcheck.hpp"
#include "fat/model.hpp"

namespace fat {

inline constexpr double kGradcheckTolerance = 1e-4;

struct ComponentCheck {
    std::string name;
    GradcheckResult result;
    bool passed = false;
};

/// Small double-precision model used by the gradient suite:
/// C=4, F=5, E=16, h=2 (one periodic head), depth 2, no dropout.
FatConfig toy_gradcheck_config();

/// Checks FAL, FAN, embedding, FAA (with adjacency) and the full model
/// plus cross-entropy against central differences. Dropout is forced to 0.
std::vector<ComponentCheck> run_gradcheck_suite(const FatConfig& cfg, const GradcheckOptions& options = {});

}  // namespace fat
