#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fat/tensor.hpp"

namespace fat {

struct GradcheckOptions {
    /// Central differences use h = step_scale * max(1, |x|).
    double step_scale = 1e-5;
    /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
    double denominator_floor = 1e-5;
    /// Multiplies the reverse-mode gradient before comparison. Anything other
    /// than 1 is a negative control that the check must catch.
    double corrupt_scale = 1.0;
};

struct GradcheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t entries_checked = 0;
    /// "input[i][j]" of the worst entry.
    std::string worst_entry;
};

/// Compares the reverse-mode gradient of the scalar function `f` with
/// respect to every entry of `inputs` against central finite differences.
/// `f` must be a pure function of the input tensors' current values.
/// Throws NumericalError on non-finite values.
GradcheckResult gradcheck(const std::function<Tensor<double>()>& f, const std::vector<Tensor<double>>& inputs,
                          const GradcheckOptions& options = {});

}  // namespace fat
