#include "fat/layers.hpp"

#include <cmath>

namespace fat {

template <typename T>
Tensor<T> xavier_uniform(std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<T> w(static_cast<std::size_t>(fan_in * fan_out));
    for (auto& v : w) v = static_cast<T>(rng.uniform(-limit, limit));
    return Tensor<T>({fan_in, fan_out}, std::move(w), true);
}

template <typename T>
Linear<T> Linear<T>::create(std::int64_t in, std::int64_t out, bool with_bias, Rng& rng) {
    Linear l;
    l.weight = xavier_uniform<T>(in, out, rng);
    if (with_bias) l.bias = Tensor<T>::zeros({out}, true);
    return l;
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
    if (x.rank() == 0 || x.dim(-1) != in_features()) {
        throw ShapeError("linear expects last axis " + std::to_string(in_features()) + ", got " + shape_str(x.shape()));
    }
    auto y = matmul(x, weight);
    return bias.defined() ? add(y, bias) : y;
}

template <typename T>
void Linear<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

template <typename T>
FalParams<T> FalParams<T>::create(std::int64_t d_in, std::int64_t d_out, std::int64_t n_per, Rng& rng) {
    if (n_per < 0 || n_per % 2 != 0 || n_per > d_out) {
        throw std::invalid_argument("FAL periodic width must be even and within [0, d_out]");
    }
    FalParams p;
    p.d_in = d_in;
    p.d_out = d_out;
    p.n_per = n_per;
    if (n_per > 0) p.w_p = xavier_uniform<T>(d_in, n_per / 2, rng);
    if (d_out > n_per) {
        p.w_n = xavier_uniform<T>(d_in, d_out - n_per, rng);
        p.b_n = Tensor<T>::zeros({d_out - n_per}, true);
    }
    return p;
}

template <typename T>
void FalParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    if (w_p.defined()) out.push_back({prefix + ".w_p", w_p});
    if (w_n.defined()) {
        out.push_back({prefix + ".w_n", w_n});
        out.push_back({prefix + ".b_n", b_n});
    }
}

namespace {

template <typename T>
std::vector<Tensor<T>> fourier_parts(const Tensor<T>& x, const FalParams<T>& p) {
    if (x.rank() == 0 || x.dim(-1) != p.d_in) {
        throw ShapeError("FAL expects last axis " + std::to_string(p.d_in) + ", got " + shape_str(x.shape()));
    }
    std::vector<Tensor<T>> parts;
    if (p.n_per > 0) {
        auto z = matmul(x, p.w_p);
        parts.push_back(cos(z));
        parts.push_back(sin(z));
    }
    return parts;
}

template <typename T>
Tensor<T> apply_activation(const Tensor<T>& x, Activation act) {
    switch (act) {
        case Activation::kGelu: return gelu(x);
        case Activation::kRelu: return relu(x);
        case Activation::kIdentity: break;
    }
    return x;
}

}  // namespace

template <typename T>
Tensor<T> fal_forward(const Tensor<T>& x, const FalParams<T>& p) {
    auto parts = fourier_parts(x, p);
    if (p.d_out > p.n_per) parts.push_back(add(matmul(x, p.w_n), p.b_n));
    return concat(parts, -1);
}

template <typename T>
Tensor<T> fan_forward(const Tensor<T>& x, const FanParams<T>& p) {
    if (p.activation == Activation::kIdentity) return fal_forward(x, p.base);
    auto parts = fourier_parts(x, p.base);
    if (p.base.d_out > p.base.n_per) {
        parts.push_back(apply_activation(add(matmul(x, p.base.w_n), p.base.b_n), p.activation));
    }
    return concat(parts, -1);
}

template <typename T>
BatchNorm<T> BatchNorm<T>::create(std::int64_t width) {
    BatchNorm bn;
    bn.gamma = Tensor<T>::full({width}, T(1), true);
    bn.beta = Tensor<T>::zeros({width}, true);
    bn.running_mean.assign(static_cast<std::size_t>(width), T(0));
    bn.running_var.assign(static_cast<std::size_t>(width), T(1));
    return bn;
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode) {
    return batch_norm(x, gamma, beta, std::span<T>(running_mean), std::span<T>(running_var), mode == Mode::kTrain,
                      options);
}

template <typename T>
void BatchNorm<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

template <typename T>
LayerNorm<T> LayerNorm<T>::create(std::int64_t width) {
    return {Tensor<T>::full({width}, T(1), true), Tensor<T>::zeros({width}, true)};
}

template <typename T>
void LayerNorm<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

template <typename T>
EmbeddingParams<T> EmbeddingParams<T>::create(std::int64_t bands, std::int64_t embed_dim, Rng& rng) {
    if (embed_dim % 2 != 0) throw std::invalid_argument("embedding width must be even");
    EmbeddingParams p;
    p.f1 = Linear<T>::create(bands, embed_dim / 2, true, rng);
    p.bn1 = BatchNorm<T>::create(embed_dim / 2);
    p.f2 = Linear<T>::create(embed_dim / 2, embed_dim, true, rng);
    p.bn2 = BatchNorm<T>::create(embed_dim);
    return p;
}

template <typename T>
void EmbeddingParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    f1.collect(out, prefix + ".f1");
    bn1.collect(out, prefix + ".bn1");
    f2.collect(out, prefix + ".f2");
    bn2.collect(out, prefix + ".bn2");
}

template <typename T>
Tensor<T> embed_forward(const Tensor<T>& input, EmbeddingParams<T>& p, Mode mode) {
    if (input.rank() != 3) throw ShapeError("embedding expects [B, C, F], got " + shape_str(input.shape()));
    if (input.dim(2) != p.bands()) {
        throw ShapeError("band count " + std::to_string(input.dim(2)) + " does not match configured " +
                         std::to_string(p.bands()));
    }
    auto h = relu(p.bn1.forward(p.f1.forward(input), mode));
    return relu(p.bn2.forward(p.f2.forward(h), mode));
}

template <typename T>
PositionalEmbedding<T> PositionalEmbedding<T>::create(std::int64_t channels, std::int64_t embed_dim, bool enabled) {
    PositionalEmbedding pe;
    pe.enabled = enabled;
    pe.table = Tensor<T>::zeros({channels, embed_dim}, enabled);
    return pe;
}

template <typename T>
void PositionalEmbedding<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    if (enabled) out.push_back({prefix + ".table", table});
}

#define FAT_INSTANTIATE(T)                                                                   \
    template Tensor<T> xavier_uniform<T>(std::int64_t, std::int64_t, Rng&);                  \
    template struct Linear<T>;                                                               \
    template struct FalParams<T>;                                                            \
    template struct FanParams<T>;                                                            \
    template struct BatchNorm<T>;                                                            \
    template struct LayerNorm<T>;                                                            \
    template struct EmbeddingParams<T>;                                                      \
    template struct PositionalEmbedding<T>;                                                  \
    template Tensor<T> fal_forward(const Tensor<T>&, const FalParams<T>&);                   \
    template Tensor<T> fan_forward(const Tensor<T>&, const FanParams<T>&);                   \
    template Tensor<T> embed_forward(const Tensor<T>&, EmbeddingParams<T>&, Mode);

FAT_INSTANTIATE(float)
FAT_INSTANTIATE(double)
#undef FAT_INSTANTIATE

}  // namespace fat
