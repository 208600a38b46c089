#include "fat/train.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <numeric>
#include <stdexcept>

#include "fat/adam.hpp"
#include "fat/error.hpp"

namespace fat {

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be finite and >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw std::invalid_argument("weight_decay must be >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
    if (eval_every < 0) throw std::invalid_argument("eval_every must be >= 0");
    augment.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"lr", c.lr},
                       {"weight_decay", c.weight_decay},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"augment", c.augment},
                       {"seed", c.seed},
                       {"eval_every", c.eval_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    nlohmann::json defaults = c;
    for (const auto& [key, _] : j.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("unknown train config key '" + key + "'");
    }
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("augment")) c.augment = j.at("augment").get<AugmentConfig>();
    c.seed = j.value("seed", c.seed);
    c.eval_every = j.value("eval_every", c.eval_every);
}

std::vector<double> RunMetrics::fold_accuracies() const {
    std::vector<double> out;
    for (const auto& f : folds) out.push_back(f.test_accuracy);
    return out;
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return {mean, std::sqrt(var)};
}

double accuracy_from_logits(std::span<const float> logits, int n_classes, std::span<const std::int32_t> labels) {
    if (labels.empty()) throw std::invalid_argument("accuracy of an empty set");
    if (logits.size() != labels.size() * static_cast<std::size_t>(n_classes)) {
        throw ShapeError("logits do not match labels");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto row = logits.subspan(i * n_classes, n_classes);
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        if (best == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

constexpr std::int64_t kEvalBatch = 256;

Tensor<float> gather_batch(const FeatureDataset& ds, std::span<const std::int64_t> idx) {
    std::vector<float> data;
    data.reserve(idx.size() * ds.sample_size());
    for (auto i : idx) data.insert(data.end(), ds.sample(i), ds.sample(i) + ds.sample_size());
    return Tensor<float>({static_cast<std::int64_t>(idx.size()), ds.n_channels, ds.n_bands}, std::move(data));
}

}  // namespace

std::vector<float> predict(FatModel<float>& model, const FeatureDataset& ds, const std::vector<std::int64_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("cannot evaluate an empty index set");
    TapeScope<float> no_tape(nullptr);
    std::vector<float> out;
    const ForwardContext ctx{Mode::kEval, nullptr};
    for (std::size_t start = 0; start < indices.size(); start += kEvalBatch) {
        const auto n = std::min<std::size_t>(kEvalBatch, indices.size() - start);
        const auto logits = fat_forward(model, gather_batch(ds, {indices.data() + start, n}), ctx);
        out.insert(out.end(), logits.data().begin(), logits.data().end());
    }
    return out;
}

double evaluate(FatModel<float>& model, const FeatureDataset& ds, const std::vector<std::int64_t>& indices) {
    const auto logits = predict(model, ds, indices);
    std::vector<std::int32_t> labels;
    for (auto i : indices) labels.push_back(ds.labels[i]);
    return accuracy_from_logits(logits, model.config.n_classes, labels);
}

std::uint64_t parameter_checksum(const FatModel<float>& model) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : model.parameters()) {
        for (float v : p.tensor.data()) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            for (int b = 0; b < 4; ++b) {
                h ^= (bits >> (8 * b)) & 0xffu;
                h *= 1099511628211ull;
            }
        }
    }
    return h;
}

FoldResult train(FatModel<float>& model, const FeatureDataset& ds, const std::vector<std::int64_t>& train_idx,
                 const std::vector<std::int64_t>& test_idx, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    if (train_idx.empty()) throw std::invalid_argument("empty training set");
    const auto& mc = model.config;
    if (mc.channels != ds.n_channels || mc.bands != ds.n_bands || mc.n_classes != ds.n_classes) {
        throw ShapeError("model config does not match dataset dimensions");
    }
    const int C = static_cast<int>(ds.n_channels);
    const int F = static_cast<int>(ds.n_bands);
    const int K = ds.n_classes;
    const auto S = ds.sample_size();

    FoldResult result;
    result.n_train = static_cast<std::int64_t>(train_idx.size());
    result.n_test = static_cast<std::int64_t>(test_idx.size());
    result.init_checksum = parameter_checksum(model);

    std::vector<Tensor<float>> params;
    for (auto& p : model.parameters()) params.push_back(p.tensor);
    Adam<float> adam(params, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    const ForwardContext ctx{Mode::kTrain, &rng};
    const auto& aug = cfg.augment;

    std::vector<std::int64_t> order = train_idx;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        std::int64_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto B = static_cast<std::int64_t>(
                std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start));
            if (B < 2) continue;  // BatchNorm needs two samples

            std::vector<float> x(static_cast<std::size_t>(B * S));
            for (std::int64_t b = 0; b < B; ++b) {
                std::span<float> row(x.data() + b * S, static_cast<std::size_t>(S));
                const float* src = ds.sample(order[start + b]);
                std::copy(src, src + S, row.begin());
                band_scale_augment(row, C, F, rng, aug);
                sine_perturb(row, C, F, rng, aug);
            }

            Tensor<float> loss;
            Tape<float> tape;
            {
                TapeScope<float> scope(tape);
                if (aug.mixup) {
                    std::vector<std::int64_t> partner(static_cast<std::size_t>(B));
                    std::iota(partner.begin(), partner.end(), 0);
                    rng.shuffle(partner.begin(), partner.end());
                    std::vector<float> mixed(x.size()), soft(static_cast<std::size_t>(B * K));
                    std::vector<float> ya(static_cast<std::size_t>(K)), yb(static_cast<std::size_t>(K));
                    for (std::int64_t b = 0; b < B; ++b) {
                        const auto p = partner[b];
                        std::fill(ya.begin(), ya.end(), 0.0f);
                        std::fill(yb.begin(), yb.end(), 0.0f);
                        ya[ds.labels[order[start + b]]] = 1.0f;
                        yb[ds.labels[order[start + p]]] = 1.0f;
                        const auto m = mixup({x.data() + b * S, static_cast<std::size_t>(S)}, ya,
                                             {x.data() + p * S, static_cast<std::size_t>(S)}, yb, rng,
                                             aug.mixup_alpha);
                        std::copy(m.sample.begin(), m.sample.end(), mixed.begin() + b * S);
                        std::copy(m.label.begin(), m.label.end(), soft.begin() + b * K);
                    }
                    const auto logits = fat_forward(model, Tensor<float>({B, C, F}, std::move(mixed)), ctx);
                    loss = cross_entropy_soft(logits, Tensor<float>({B, K}, std::move(soft)));
                } else {
                    std::vector<std::int32_t> labels;
                    for (std::int64_t b = 0; b < B; ++b) labels.push_back(ds.labels[order[start + b]]);
                    const auto logits = fat_forward(model, Tensor<float>({B, C, F}, std::move(x)), ctx);
                    loss = cross_entropy(logits, std::span<const std::int32_t>(labels));
                }
            }
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
            }
            adam.zero_grad();
            tape.backward(loss);
            adam.step();
            loss_sum += value * static_cast<double>(B);
            seen += B;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
        const bool last = epoch == cfg.epochs;
        if (!test_idx.empty() && (last || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0))) {
            rec.test_accuracy = evaluate(model, ds, test_idx);
        }
        result.epochs.push_back(rec);
    }
    result.train_accuracy = evaluate(model, ds, train_idx);
    result.test_accuracy = test_idx.empty() ? 0.0 : *result.epochs.back().test_accuracy;
    return result;
}

FatConfig fit_to_dataset(FatConfig cfg, const FeatureDataset& ds) {
    cfg.channels = ds.n_channels;
    cfg.bands = ds.n_bands;
    cfg.n_classes = ds.n_classes;
    return cfg;
}

RunMetrics run_scheme(const FeatureDataset& ds, const Scheme& scheme, const FatConfig& model_cfg,
                      const TrainConfig& train_cfg, const RunOptions& options) {
    ds.validate();
    train_cfg.validate();
    const auto cfg = fit_to_dataset(model_cfg, ds);
    cfg.validate();
    const auto plan = make_splits(ds, scheme, train_cfg.seed);
    const int n = static_cast<int>(plan.folds.size());

    RunMetrics m;
    m.scheme = scheme.to_string();
    m.folds.resize(static_cast<std::size_t>(n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    const int jobs = options.jobs > 0 ? options.jobs : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(std::min(jobs, n))
    for (int f = 0; f < n; ++f) {
        try {
            auto model = build_model<float>(cfg);
            Rng rng = Rng::derive(train_cfg.seed, static_cast<std::uint64_t>(f));
            auto r = train(model, ds, plan.folds[f].train, plan.folds[f].test, train_cfg, rng);
            r.fold = f;
            r.held_out_subject = plan.folds[f].held_out_subject;
            if (options.on_model) options.on_model(f, model);
            m.folds[f] = std::move(r);
        } catch (...) {
            errors[f] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    const auto accs = m.fold_accuracies();
    std::tie(m.mean_accuracy, m.std_accuracy) = mean_std(accs);
    return m;
}

nlohmann::json epoch_record_json(const FoldResult& fold, const EpochRecord& e) {
    nlohmann::json j = {{"type", "epoch"}, {"fold", fold.fold}, {"epoch", e.epoch}, {"train_loss", e.train_loss}};
    if (e.test_accuracy) j["test_accuracy"] = *e.test_accuracy;
    return j;
}

nlohmann::json fold_record_json(const FoldResult& fold) {
    nlohmann::json j = {{"type", "fold"},
                        {"fold", fold.fold},
                        {"n_train", fold.n_train},
                        {"n_test", fold.n_test},
                        {"train_accuracy", fold.train_accuracy},
                        {"test_accuracy", fold.test_accuracy},
                        {"init_checksum", fold.init_checksum}};
    if (fold.held_out_subject >= 0) j["held_out_subject"] = fold.held_out_subject;
    return j;
}

nlohmann::json summary_record_json(const RunMetrics& m) {
    return {{"type", "summary"},
            {"scheme", m.scheme},
            {"n_folds", m.folds.size()},
            {"fold_accuracies", m.fold_accuracies()},
            {"mean_accuracy", m.mean_accuracy},
            {"std_accuracy", m.std_accuracy}};
}

void write_metrics_jsonl(std::ostream& out, const RunMetrics& m) {
    for (const auto& f : m.folds) {
        for (const auto& e : f.epochs) out << epoch_record_json(f, e).dump() << '\n';
    }
    for (const auto& f : m.folds) out << fold_record_json(f).dump() << '\n';
    out << summary_record_json(m).dump() << '\n';
}

}  // namespace fat
