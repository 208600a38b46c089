#include "fat/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

namespace fat {

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(numel(shape)));
    for (auto& x : v) x = scale * rng.normal();
    return Tensor<double>(std::move(shape), std::move(v));
}

// Projects the output on a fixed random direction so every entry of the
// output contributes to the scalar.
Tensor<double> project(const Tensor<double>& out, const Tensor<double>& dir) { return sum(mul(out, dir)); }

std::vector<Tensor<double>> tensors_of(const ParamList<double>& params) {
    std::vector<Tensor<double>> out;
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

void randomize(const ParamList<double>& params, Rng& rng, double scale) {
    for (auto p : params) {
        for (auto& v : p.tensor.mutable_data()) v = scale * rng.normal();
    }
}

ComponentCheck check(const std::string& name, const std::function<Tensor<double>()>& f,
                     const std::vector<Tensor<double>>& inputs, const GradcheckOptions& options) {
    ComponentCheck c{name, gradcheck(f, inputs, options), false};
    c.passed = c.result.max_rel_error < kGradcheckTolerance;
    return c;
}

}  // namespace

FatConfig toy_gradcheck_config() {
    FatConfig cfg;
    cfg.embed_dim = 16;
    cfg.heads = 2;
    cfg.depth = 2;
    cfg.p_ratio = 0.5;
    cfg.use_adjacency = true;
    cfg.channels = 4;
    cfg.bands = 5;
    cfg.n_classes = 3;
    cfg.ffn_mult = 2;
    cfg.dropout = 0.0;
    cfg.seed = 7;
    return cfg;
}

std::vector<ComponentCheck> run_gradcheck_suite(const FatConfig& base, const GradcheckOptions& options) {
    FatConfig cfg = base;
    cfg.dropout = 0.0;
    cfg.validate();
    Rng rng(Rng::mix(cfg.seed, 0x6772616463686bull));
    const std::int64_t B = 2, C = cfg.channels, F = cfg.bands, E = cfg.embed_dim;
    const auto part = cfg.partition();
    std::vector<ComponentCheck> out;

    {
        auto p = FalParams<double>::create(E, E, part.periodic_dims(), rng);
        ParamList<double> params;
        p.collect(params, "fal");
        randomize(params, rng, 0.5);
        auto x = random_tensor({B, C, E}, rng);
        auto dir = random_tensor({B, C, E}, rng, 1.0 / std::sqrt(static_cast<double>(B * C * E)));
        auto inputs = tensors_of(params);
        inputs.push_back(x);
        out.push_back(check("fal", [&] { return project(fal_forward(x, p), dir); }, inputs, options));
    }
    {
        FanParams<double> p{FalParams<double>::create(E, E, part.periodic_dims(), rng), Activation::kGelu};
        ParamList<double> params;
        p.base.collect(params, "fan");
        randomize(params, rng, 0.5);
        auto x = random_tensor({B, C, E}, rng);
        auto dir = random_tensor({B, C, E}, rng, 1.0 / std::sqrt(static_cast<double>(B * C * E)));
        auto inputs = tensors_of(params);
        inputs.push_back(x);
        out.push_back(check("fan", [&] { return project(fan_forward(x, p), dir); }, inputs, options));
    }
    {
        auto p = EmbeddingParams<double>::create(F, E, rng);
        ParamList<double> params;
        p.collect(params, "embedding");
        randomize(params, rng, 0.5);
        auto x = random_tensor({B, C, F}, rng);
        auto dir = random_tensor({B, C, E}, rng, 1.0 / std::sqrt(static_cast<double>(B * C * E)));
        auto inputs = tensors_of(params);
        inputs.push_back(x);
        out.push_back(check("embedding", [&] { return project(embed_forward(x, p, Mode::kTrain), dir); }, inputs,
                            options));
    }
    {
        const auto act = cfg.qkv_layer == QkvLayer::kFan ? Activation::kGelu : Activation::kIdentity;
        auto p = FaaParams<double>::create(E, part, act, rng);
        auto adj = AdjacencyPair<double>::create(C);
        ParamList<double> params;
        p.collect(params, "faa");
        adj.collect(params, "adjacency");
        randomize(params, rng, 0.5);
        auto x = random_tensor({B, C, E}, rng);
        auto dir = random_tensor({B, C, E}, rng, 1.0 / std::sqrt(static_cast<double>(B * C * E)));
        auto inputs = tensors_of(params);
        inputs.push_back(x);
        const ForwardContext ctx{Mode::kEval, nullptr};
        out.push_back(check("faa", [&] { return project(faa_forward(x, p, &adj, ctx), dir); }, inputs, options));
    }
    {
        auto model = build_model<double>(cfg, rng);
        const auto params = model.parameters();
        randomize(params, rng, 0.3);
        auto x = random_tensor({B, C, F}, rng);
        std::vector<std::int32_t> labels;
        for (std::int64_t b = 0; b < B; ++b) labels.push_back(static_cast<std::int32_t>(b % cfg.n_classes));
        auto inputs = tensors_of(params);
        inputs.push_back(x);
        const ForwardContext ctx{Mode::kTrain, nullptr};
        out.push_back(check(
            "fat_loss",
            [&] { return cross_entropy(fat_forward(model, x, ctx), std::span<const std::int32_t>(labels)); }, inputs,
            options));
    }
    return out;
}

}  // namespace fat
