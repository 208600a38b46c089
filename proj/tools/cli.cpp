#include "cli.hpp"

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "fat/ablation.hpp"
#include "fat/adjacency_export.hpp"
#include "fat/binary_io.hpp"
#include "fat/checkpoint.hpp"
#include "fat/dataset.hpp"
#include "fat/error.hpp"
#include "fat/gradcheck_suite.hpp"
#include "fat/kernels.hpp"
#include "fat/synthetic.hpp"
#include "fat/train.hpp"

namespace fat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Thrown for bad inputs that should map to exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

struct RunConfig {
    FatConfig model;
    TrainConfig train;
};

json to_json(const RunConfig& c) { return json{{"model", c.model}, {"train", c.train}}; }

RunConfig load_run_config(const std::string& path) {
    RunConfig c;
    if (path.empty()) return c;
    const auto j = read_json(path);
    try {
        if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
        for (const auto& [key, _] : j.items()) {
            if (key != "model" && key != "train") throw std::invalid_argument("unknown config section '" + key + "'");
        }
        if (j.contains("model")) c.model = j.at("model").get<FatConfig>();
        if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
    } catch (const std::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    return c;
}

// Flags that override config-file values when given.
struct Overrides {
    std::int64_t embed_dim = 0;
    int heads = 0, depth = 0, epochs = 0, batch_size = 0, eval_every = 0;
    double p_ratio = 0, dropout = 0, lr = 0, weight_decay = 0;
    bool use_adjacency = true, positional = true, augment = true;
    std::string qkv_layer;
    std::uint64_t seed = 0, model_seed = 0;
    std::vector<CLI::Option*> opts;

    void add_to(CLI::App& app) {
        opts = {app.add_option("--embed-dim", embed_dim, "Embedding width E"),
                app.add_option("--heads", heads, "Attention heads"),
                app.add_option("--depth", depth, "Number of blocks"),
                app.add_option("--p-ratio", p_ratio, "Periodic fraction of heads"),
                app.add_option("--use-adjacency", use_adjacency, "Additive adjacency on/off"),
                app.add_option("--positional", positional, "Positional embedding on/off"),
                app.add_option("--dropout", dropout, "Dropout rate"),
                app.add_option("--qkv-layer", qkv_layer, "fal, fan or linear"),
                app.add_option("--model-seed", model_seed, "Initialization seed"),
                app.add_option("--epochs", epochs, "Training epochs"),
                app.add_option("--batch-size", batch_size, "Minibatch size"),
                app.add_option("--lr", lr, "Adam learning rate"),
                app.add_option("--weight-decay", weight_decay, "L2 weight decay"),
                app.add_option("--eval-every", eval_every, "Test accuracy every n epochs (0: final only)"),
                app.add_option("--augment", augment, "Augmentation on/off"),
                app.add_option("--seed", seed, "Training seed")};
    }

    bool given(const char* name) const {
        for (auto* o : opts) {
            if (o->get_name() == name) return o->count() > 0;
        }
        return false;
    }

    void apply(RunConfig& c) const {
        if (given("--embed-dim")) c.model.embed_dim = embed_dim;
        if (given("--heads")) c.model.heads = heads;
        if (given("--depth")) c.model.depth = depth;
        if (given("--p-ratio")) c.model.p_ratio = p_ratio;
        if (given("--use-adjacency")) c.model.use_adjacency = use_adjacency;
        if (given("--positional")) c.model.positional = positional;
        if (given("--dropout")) c.model.dropout = dropout;
        if (given("--qkv-layer")) {
            try {
                c.model.qkv_layer = qkv_layer_from_string(qkv_layer);
            } catch (const std::invalid_argument& e) {
                throw InputError(e.what());
            }
        }
        if (given("--model-seed")) c.model.seed = model_seed;
        if (given("--epochs")) c.train.epochs = epochs;
        if (given("--batch-size")) c.train.batch_size = batch_size;
        if (given("--lr")) c.train.lr = lr;
        if (given("--weight-decay")) c.train.weight_decay = weight_decay;
        if (given("--eval-every")) c.train.eval_every = eval_every;
        if (given("--augment")) {
            c.train.augment.band_scale = augment;
            c.train.augment.sine = augment;
            c.train.augment.mixup = augment;
        }
        if (given("--seed")) c.train.seed = seed;
    }
};

FeatureDataset load_data(const std::string& dir) {
    try {
        return load_dataset(dir);
    } catch (const FormatError& e) {
        throw InputError(dir + ": " + e.what());
    }
}

void validate_run_config(RunConfig& c, const FeatureDataset& ds) {
    c.model = fit_to_dataset(c.model, ds);
    try {
        c.model.validate();
        c.train.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
}

Scheme parse_scheme(const std::string& text) {
    try {
        return Scheme::parse(text);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
}

int cmd_gen_synth(const std::string& spec_path, const std::string& out_dir, std::uint64_t seed, std::ostream& out) {
    SyntheticSpec spec;
    if (!spec_path.empty()) {
        try {
            spec = read_json(spec_path).get<SyntheticSpec>();
            spec.validate();
        } catch (const InputError&) {
            throw;
        } catch (const std::exception& e) {
            throw InputError("invalid spec: " + std::string(e.what()));
        }
    }
    Rng rng(seed);
    const auto data = generate_synthetic(spec, rng);
    save_dataset(data.dataset, out_dir);
    io::write_text(fs::path(out_dir) / "ground_truth.json", json(data.truth).dump(2) + "\n");
    io::write_text(fs::path(out_dir) / "spec.json", json(spec).dump(2) + "\n");
    out << "wrote " << data.dataset.n_samples << " samples (" << data.dataset.n_channels << " channels, "
        << data.dataset.n_bands << " bands) to " << out_dir << "\n";
    return kOk;
}

RunOptions run_options(int jobs) {
    RunOptions o;
    o.jobs = jobs;
    return o;
}

int cmd_train(const std::string& data_dir, const std::string& config_path, const std::string& scheme_text,
              const std::string& out_dir, const Overrides& ov, int jobs, std::ostream& out) {
    const auto ds = load_data(data_dir);
    auto cfg = load_run_config(config_path);
    ov.apply(cfg);
    validate_run_config(cfg, ds);
    const auto scheme = parse_scheme(scheme_text);

    fs::create_directories(out_dir);
    io::write_text(fs::path(out_dir) / "resolved_config.json", to_json(cfg).dump(2) + "\n");

    std::vector<io::Bytes> checkpoints;
    auto options = run_options(jobs);
    const auto n_folds = make_splits(ds, scheme, cfg.train.seed).folds.size();
    checkpoints.resize(n_folds);
    options.on_model = [&](int fold, const FatModel<float>& m) {
        checkpoints[static_cast<std::size_t>(fold)] = encode_checkpoint({m, ds.channel_names});
    };
    const auto metrics = run_scheme(ds, scheme, cfg.model, cfg.train, options);

    std::ofstream jsonl(fs::path(out_dir) / "metrics.jsonl");
    write_metrics_jsonl(jsonl, metrics);
    io::write_text(fs::path(out_dir) / "summary.json", summary_record_json(metrics).dump() + "\n");
    for (std::size_t f = 0; f < checkpoints.size(); ++f) {
        io::write_file(fs::path(out_dir) / ("fold_" + std::to_string(f) + ".fatckpt"), checkpoints[f]);
    }
    for (const auto& f : metrics.folds) {
        out << "fold " << f.fold;
        if (f.held_out_subject >= 0) out << " (subject " << f.held_out_subject << ")";
        out << ": test accuracy " << f.test_accuracy << "\n";
    }
    out << metrics.scheme << ": mean " << metrics.mean_accuracy << " std " << metrics.std_accuracy << "\n";
    return kOk;
}

int cmd_ablate(const std::string& data_dir, const std::string& grid_name, const std::string& config_path,
               const std::string& scheme_text, const std::string& out_dir, const Overrides& ov, int jobs,
               std::ostream& out) {
    AblationGrid grid;
    try {
        grid = named_grid(grid_name);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    const auto ds = load_data(data_dir);
    auto cfg = load_run_config(config_path);
    ov.apply(cfg);
    validate_run_config(cfg, ds);
    for (const auto& cell : grid.cells) {
        auto m = cfg.model;
        if (cell.p_ratio) m.p_ratio = *cell.p_ratio;
        try {
            m.validate();
        } catch (const std::invalid_argument& e) {
            throw InputError("grid cell " + cell.label + ": " + e.what());
        }
    }
    const auto scheme = parse_scheme(scheme_text);
    fs::create_directories(out_dir);
    io::write_text(fs::path(out_dir) / "resolved_config.json", to_json(cfg).dump(2) + "\n");
    const auto rows = run_ablation(ds, grid, scheme, cfg.model, cfg.train, run_options(jobs));
    const auto csv = ablation_csv(grid.name, rows);
    io::write_text(fs::path(out_dir) / ("ablation_" + grid.name + ".csv"), csv);
    out << csv;
    return kOk;
}

int cmd_gradcheck(const std::string& config_path, double corrupt_scale, std::ostream& out) {
    auto cfg = toy_gradcheck_config();
    if (!config_path.empty()) {
        const auto j = read_json(config_path);
        try {
            json merged = cfg;
            merged.merge_patch(j.contains("model") ? j.at("model") : j);
            cfg = merged.get<FatConfig>();
            cfg.validate();
        } catch (const std::exception& e) {
            throw InputError(config_path + ": " + e.what());
        }
    }
    GradcheckOptions opts;
    opts.corrupt_scale = corrupt_scale;
    const auto checks = run_gradcheck_suite(cfg, opts);
    bool ok = true;
    char line[160];
    for (const auto& c : checks) {
        std::snprintf(line, sizeof line, "%-10s max_rel_error %.3e  entries %zu  %s\n", c.name.c_str(),
                      c.result.max_rel_error, c.result.entries_checked, c.passed ? "PASS" : "FAIL");
        out << line;
        ok = ok && c.passed;
    }
    return ok ? kOk : kCheckFailed;
}

int cmd_export_adjacency(const std::string& ckpt_path, std::int64_t k, const std::string& out_path,
                         std::ostream& out) {
    Checkpoint ckpt;
    try {
        ckpt = load_checkpoint(ckpt_path);
    } catch (const FormatError& e) {
        throw InputError(ckpt_path + ": " + e.what());
    }
    AdjacencyExport e;
    try {
        e = export_adjacency_topk(ckpt.model, k);
    } catch (const std::invalid_argument& err) {
        throw InputError(err.what());
    }
    const auto parent = fs::path(out_path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    io::write_text(out_path, adjacency_csv(e, ckpt.channel_names));
    out << "wrote top-" << k << " edges of both adjacency matrices to " << out_path << "\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fourier adjacency transformer: synthetic data, training, ablations and checks"};
    app.require_subcommand(1);
    int jobs = omp_get_max_threads();
    app.add_option("--jobs", jobs, "Worker threads for parallel folds and kernels")->check(CLI::PositiveNumber);

    auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic DE dataset with known coupling");
    std::string spec_path, out_dir;
    std::uint64_t gen_seed = 0;
    gen->add_option("--spec", spec_path, "Synthetic spec JSON (defaults when omitted)");
    gen->add_option("--out", out_dir, "Output dataset directory")->required();
    gen->add_option("--seed", gen_seed, "Generator seed");

    auto* tr = app.add_subcommand("train", "Train and evaluate under a split scheme");
    std::string data_dir, config_path, scheme = "loso";
    Overrides train_ov;
    tr->add_option("--data", data_dir, "Dataset directory")->required();
    tr->add_option("--config", config_path, "Run config JSON {\"model\": {...}, \"train\": {...}}");
    tr->add_option("--scheme", scheme, "loso | ratio:a:b | kfold:k");
    tr->add_option("--out", out_dir, "Output directory")->required();
    train_ov.add_to(*tr);

    auto* ab = app.add_subcommand("ablate", "Sweep an ablation grid");
    std::string grid;
    Overrides ablate_ov;
    ab->add_option("--data", data_dir, "Dataset directory")->required();
    ab->add_option("--grid", grid, "pratio | bands | ada")->required();
    ab->add_option("--config", config_path, "Run config JSON");
    ab->add_option("--scheme", scheme, "loso | ratio:a:b | kfold:k");
    ab->add_option("--out", out_dir, "Output directory")->required();
    ablate_ov.add_to(*ab);

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite on a toy model");
    double corrupt_scale = 1.0;
    gc->add_option("--config", config_path, "Model config JSON overriding the toy defaults");
    gc->add_option("--corrupt-scale", corrupt_scale)->group("");  // negative-control hook

    auto* ex = app.add_subcommand("export-adjacency", "Top-k adjacency edges of a checkpoint as CSV");
    std::string ckpt_path, out_file;
    std::int64_t k = 15;
    ex->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    ex->add_option("--k", k, "Edges per matrix");
    ex->add_option("--out", out_file, "Output CSV")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    const int saved_threads = omp_get_max_threads();
    omp_set_num_threads(jobs);
    int code = kOk;
    try {
        if (*gen) code = cmd_gen_synth(spec_path, out_dir, gen_seed, out);
        if (*tr) code = cmd_train(data_dir, config_path, scheme, out_dir, train_ov, jobs, out);
        if (*ab) code = cmd_ablate(data_dir, grid, config_path, scheme, out_dir, ablate_ov, jobs, out);
        if (*gc) code = cmd_gradcheck(config_path, corrupt_scale, out);
        if (*ex) code = cmd_export_adjacency(ckpt_path, k, out_file, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        code = kUsage;
    } catch (const DivergenceError& e) {
        err << "diverged: " << e.what() << "\n";
        code = kDiverged;
    } catch (const NumericalError& e) {
        err << "diverged: " << e.what() << "\n";
        code = kDiverged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        code = kUsage;
    }
    omp_set_num_threads(saved_threads);
    return code;
}

}  // namespace fat::cli
