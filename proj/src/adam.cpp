#include "fat/adam.hpp"

#include <cmath>

namespace fat {

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
    for (const auto& p : params_) {
        m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    }
}

template <typename T>
void Adam<T>::step() {
    ++step_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        auto theta = p.mutable_data();
        const bool has_grad = p.has_grad();
        auto grad = p.grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = (has_grad ? static_cast<double>(grad[i]) : 0.0) +
                             options_.weight_decay * static_cast<double>(theta[i]);
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            theta[i] = static_cast<T>(static_cast<double>(theta[i]) - options_.lr * mhat / (std::sqrt(vhat) + options_.eps));
        }
    }
}

template <typename T>
void Adam<T>::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace fat
