#include "fat/model.hpp"

#include <set>

namespace fat {

std::string to_string(QkvLayer layer) {
    switch (layer) {
        case QkvLayer::kFal: return "fal";
        case QkvLayer::kFan: return "fan";
        case QkvLayer::kLinear: return "linear";
    }
    return "fal";
}

QkvLayer qkv_layer_from_string(const std::string& name) {
    if (name == "fal") return QkvLayer::kFal;
    if (name == "fan") return QkvLayer::kFan;
    if (name == "linear") return QkvLayer::kLinear;
    throw std::invalid_argument("unknown qkv_layer '" + name + "' (expected fal, fan or linear)");
}

void FatConfig::validate() const {
    if (embed_dim <= 0 || embed_dim % 2 != 0) throw std::invalid_argument("embed_dim must be positive and even");
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    if (channels < 1 || bands < 1) throw std::invalid_argument("channels and bands must be positive");
    if (n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
    if (ffn_mult < 1) throw std::invalid_argument("ffn_mult must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
    partition();
    if (qkv_layer == QkvLayer::kLinear && p_ratio != 0.0) {
        throw std::invalid_argument("qkv_layer 'linear' requires p_ratio 0");
    }
}

void to_json(nlohmann::json& j, const FatConfig& c) {
    j = nlohmann::json{{"embed_dim", c.embed_dim}, {"heads", c.heads},
                       {"depth", c.depth},         {"p_ratio", c.p_ratio},
                       {"use_adjacency", c.use_adjacency}, {"channels", c.channels},
                       {"bands", c.bands},         {"n_classes", c.n_classes},
                       {"ffn_mult", c.ffn_mult},   {"dropout", c.dropout},
                       {"qkv_layer", to_string(c.qkv_layer)}, {"positional", c.positional},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, FatConfig& c) {
    static const std::set<std::string> known = {"embed_dim", "heads",    "depth",     "p_ratio",   "use_adjacency",
                                                "channels",  "bands",    "n_classes", "ffn_mult",  "dropout",
                                                "qkv_layer", "positional", "seed"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw std::invalid_argument("unknown model config key '" + key + "'");
    }
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.heads = j.value("heads", c.heads);
    c.depth = j.value("depth", c.depth);
    c.p_ratio = j.value("p_ratio", c.p_ratio);
    c.use_adjacency = j.value("use_adjacency", c.use_adjacency);
    c.channels = j.value("channels", c.channels);
    c.bands = j.value("bands", c.bands);
    c.n_classes = j.value("n_classes", c.n_classes);
    c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
    c.dropout = j.value("dropout", c.dropout);
    if (j.contains("qkv_layer")) c.qkv_layer = qkv_layer_from_string(j.at("qkv_layer").get<std::string>());
    c.positional = j.value("positional", c.positional);
    c.seed = j.value("seed", c.seed);
}

template <typename T>
ParamList<T> FatModel<T>::parameters() const {
    ParamList<T> out;
    embedding.collect(out, "embedding");
    positional.collect(out, "positional");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto prefix = "blocks." + std::to_string(i);
        const auto& b = blocks[i];
        b.norm1.collect(out, prefix + ".norm1");
        b.attention.collect(out, prefix + ".attention");
        b.norm2.collect(out, prefix + ".norm2");
        b.ffn1.collect(out, prefix + ".ffn1");
        b.ffn2.collect(out, prefix + ".ffn2");
    }
    adjacency.collect(out, "adjacency");
    classifier.collect(out, "classifier");
    return out;
}

template <typename T>
std::vector<std::span<T>> FatModel<T>::buffers() {
    return {embedding.bn1.running_mean, embedding.bn1.running_var, embedding.bn2.running_mean,
            embedding.bn2.running_var};
}

template <typename T>
std::vector<std::span<const T>> FatModel<T>::buffers() const {
    return {embedding.bn1.running_mean, embedding.bn1.running_var, embedding.bn2.running_mean,
            embedding.bn2.running_var};
}

template <typename T>
FatModel<T> build_model(const FatConfig& cfg) {
    Rng rng(cfg.seed);
    return build_model<T>(cfg, rng);
}

template <typename T>
FatModel<T> build_model(const FatConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto part = cfg.partition();
    const auto act = cfg.qkv_layer == QkvLayer::kFan ? Activation::kGelu : Activation::kIdentity;
    FatModel<T> m;
    m.config = cfg;
    m.embedding = EmbeddingParams<T>::create(cfg.bands, cfg.embed_dim, rng);
    m.positional = PositionalEmbedding<T>::create(cfg.channels, cfg.embed_dim, cfg.positional);
    const auto hidden = cfg.ffn_mult * cfg.embed_dim;
    for (int i = 0; i < cfg.depth; ++i) {
        TransformerBlock<T> b;
        b.norm1 = LayerNorm<T>::create(cfg.embed_dim);
        b.attention = FaaParams<T>::create(cfg.embed_dim, part, act, rng);
        b.attention.dropout = cfg.dropout;
        b.norm2 = LayerNorm<T>::create(cfg.embed_dim);
        b.ffn1 = Linear<T>::create(cfg.embed_dim, hidden, true, rng);
        b.ffn2 = Linear<T>::create(hidden, cfg.embed_dim, true, rng);
        m.blocks.push_back(std::move(b));
    }
    if (cfg.use_adjacency) m.adjacency = AdjacencyPair<T>::create(cfg.channels);
    m.classifier = Linear<T>::create(cfg.embed_dim, cfg.n_classes, true, rng);
    return m;
}

namespace {

template <typename T>
Tensor<T> feed_forward(const Linear<T>& ffn1, const Linear<T>& ffn2, const Tensor<T>& x, const ForwardContext& ctx,
                       double p) {
    auto h = relu(ffn1.forward(x));
    if (ctx.training() && p > 0.0) h = dropout(h, p, *ctx.rng);
    return ffn2.forward(h);
}

template <typename T>
void check_input(const Tensor<T>& input, std::int64_t channels, std::int64_t bands) {
    if (input.rank() != 3) throw ShapeError("model input must be [B, C, F], got " + shape_str(input.shape()));
    if (input.dim(1) != channels) {
        throw ShapeError("input has " + std::to_string(input.dim(1)) + " channels, model expects " +
                         std::to_string(channels));
    }
    if (input.dim(2) != bands) {
        throw ShapeError("input has " + std::to_string(input.dim(2)) + " bands, model expects " +
                         std::to_string(bands));
    }
}

}  // namespace

template <typename T>
Tensor<T> fat_forward(FatModel<T>& model, const Tensor<T>& input, const ForwardContext& ctx) {
    const auto& cfg = model.config;
    check_input(input, cfg.channels, cfg.bands);
    if (ctx.training() && cfg.dropout > 0.0 && ctx.rng == nullptr) {
        throw std::invalid_argument("training with dropout needs an Rng");
    }
    auto x = embed_forward(input, model.embedding, ctx.mode);
    x = model.positional.apply(x);
    const AdjacencyPair<T>* adj = model.adjacency.enabled() ? &model.adjacency : nullptr;
    for (auto& b : model.blocks) {
        x = add(x, faa_forward(b.norm1.forward(x), b.attention, adj, ctx));
        x = add(x, feed_forward(b.ffn1, b.ffn2, b.norm2.forward(x), ctx, cfg.dropout));
    }
    return model.classifier.forward(mean_axis(x, 1));
}

template <typename T>
std::int64_t count_params(const FatModel<T>& model) {
    std::int64_t n = 0;
    for (const auto& p : model.parameters()) n += p.tensor.numel();
    return n;
}

namespace {

template <typename T>
Linear<T> copy_linear(const Linear<T>& l) {
    Linear<T> c;
    c.weight = l.weight.detach();
    c.weight.set_requires_grad(true);
    if (l.bias.defined()) {
        c.bias = l.bias.detach();
        c.bias.set_requires_grad(true);
    }
    return c;
}

template <typename T>
LayerNorm<T> copy_norm(const LayerNorm<T>& n) {
    LayerNorm<T> c{n.gamma.detach(), n.beta.detach()};
    c.gamma.set_requires_grad(true);
    c.beta.set_requires_grad(true);
    return c;
}

template <typename T>
BatchNorm<T> copy_bn(const BatchNorm<T>& n) {
    BatchNorm<T> c = n;
    c.gamma = n.gamma.detach();
    c.beta = n.beta.detach();
    c.gamma.set_requires_grad(true);
    c.beta.set_requires_grad(true);
    return c;
}

}  // namespace

template <typename T>
ReferenceTransformer<T> reference_from(const FatModel<T>& model) {
    ReferenceTransformer<T> r;
    r.embedding.f1 = copy_linear(model.embedding.f1);
    r.embedding.bn1 = copy_bn(model.embedding.bn1);
    r.embedding.f2 = copy_linear(model.embedding.f2);
    r.embedding.bn2 = copy_bn(model.embedding.bn2);
    r.positional.enabled = model.positional.enabled;
    r.positional.table = model.positional.table.detach();
    r.positional.table.set_requires_grad(model.positional.enabled);
    for (const auto& b : model.blocks) {
        r.blocks.push_back({copy_norm(b.norm1), mhsa_from_faa(b.attention), copy_norm(b.norm2), copy_linear(b.ffn1),
                            copy_linear(b.ffn2)});
    }
    r.classifier = copy_linear(model.classifier);
    r.dropout = model.config.dropout;
    return r;
}

template <typename T>
Tensor<T> reference_forward(ReferenceTransformer<T>& model, const Tensor<T>& input, const ForwardContext& ctx) {
    check_input(input, model.positional.table.dim(0), model.embedding.bands());
    auto x = embed_forward(input, model.embedding, ctx.mode);
    x = model.positional.apply(x);
    for (auto& b : model.blocks) {
        x = add(x, mhsa_forward(b.norm1.forward(x), b.attention, ctx));
        x = add(x, feed_forward(b.ffn1, b.ffn2, b.norm2.forward(x), ctx, model.dropout));
    }
    return model.classifier.forward(mean_axis(x, 1));
}

#define FAT_INSTANTIATE(T)                                                                              \
    template struct FatModel<T>;                                                                        \
    template FatModel<T> build_model<T>(const FatConfig&);                                              \
    template FatModel<T> build_model<T>(const FatConfig&, Rng&);                                        \
    template Tensor<T> fat_forward(FatModel<T>&, const Tensor<T>&, const ForwardContext&);              \
    template std::int64_t count_params(const FatModel<T>&);                                             \
    template ReferenceTransformer<T> reference_from(const FatModel<T>&);                                \
    template Tensor<T> reference_forward(ReferenceTransformer<T>&, const Tensor<T>&, const ForwardContext&);

FAT_INSTANTIATE(float)
FAT_INSTANTIATE(double)
#undef FAT_INSTANTIATE

}  // namespace fat
