#include "fat/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace fat {

GradcheckResult gradcheck(const std::function<Tensor<double>()>& f, const std::vector<Tensor<double>>& inputs,
                          const GradcheckOptions& options) {
    for (auto input : inputs) {
        input.set_requires_grad(true);
        input.zero_grad();
    }
    {
        Tape<double> tape;
        TapeScope<double> scope(tape);
        const auto loss = f();
        if (!std::isfinite(loss.item())) throw NumericalError("gradcheck: non-finite function value");
        tape.backward(loss);
    }

    auto evaluate = [&] {
        TapeScope<double> suspend(nullptr);
        const double v = f().item();
        if (!std::isfinite(v)) throw NumericalError("gradcheck: non-finite function value");
        return v;
    };

    GradcheckResult result;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        auto input = inputs[t];
        const auto analytic = input.grad();
        auto x = input.mutable_data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double x0 = x[i];
            const double h = options.step_scale * std::max(1.0, std::abs(x0));
            x[i] = x0 + h;
            const double fp = evaluate();
            x[i] = x0 - h;
            const double fm = evaluate();
            x[i] = x0;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = (analytic.empty() ? 0.0 : analytic[i]) * options.corrupt_scale;
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
            result.max_abs_error = std::max(result.max_abs_error, abs_err);
            if (rel > result.max_rel_error || result.entries_checked == 0) {
                result.max_rel_error = rel;
                result.worst_entry = "input[" + std::to_string(t) + "][" + std::to_string(i) + "]";
            }
            ++result.entries_checked;
        }
    }
    return result;
}

}  // namespace fat
