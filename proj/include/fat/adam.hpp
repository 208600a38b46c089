#pragma once

#include <cstdint>
#include <vector>

#include "fat/tensor.hpp"

namespace fat {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// L2-coupled: weight_decay * theta is added to the gradient before the
    /// moment updates (classic Adam, not AdamW).
    double weight_decay = 0.0;
};

/// Adam with bias correction. Holds per-parameter first/second moments; a
/// parameter without a gradient is treated as having a zero gradient.
template <typename T>
class Adam {
   public:
    Adam(std::vector<Tensor<T>> params, AdamOptions options);

    void step();
    void zero_grad();
    std::int64_t steps() const { return step_; }
    const AdamOptions& options() const { return options_; }

   private:
    std::vector<Tensor<T>> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamOptions options_;
    std::int64_t step_ = 0;
};

}  // namespace fat
