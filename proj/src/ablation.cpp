#include "fat/ablation.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace fat {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

AblationGrid named_grid(const std::string& name) {
    AblationGrid g{name, {}};
    if (name == "pratio") {
        for (double p : {0.0, 0.125, 0.25, 0.375}) g.cells.push_back({"p=" + fmt(p).substr(0, 5), p, {}, {}});
    } else if (name == "ada") {
        const std::vector<std::pair<bool, double>> rows = {{false, 0.0}, {true, 0.0},   {true, 0.125},
                                                           {true, 0.25}, {false, 0.25}, {true, 0.375}};
        for (auto [adj, p] : rows) {
            g.cells.push_back({std::string(adj ? "ada_on" : "ada_off") + "/p=" + fmt(p).substr(0, 5), p, adj, {}});
        }
    } else if (name == "bands") {
        const std::vector<std::vector<std::string>> subsets = {{"delta"},
                                                               {"theta"},
                                                               {"alpha"},
                                                               {"beta"},
                                                               {"gamma"},
                                                               {"beta", "gamma"},
                                                               {"delta", "beta", "gamma"},
                                                               {"delta", "theta", "alpha", "beta", "gamma"}};
        for (const auto& s : subsets) g.cells.push_back({join(s, '+'), {}, {}, s});
    } else {
        throw std::invalid_argument("unknown ablation grid '" + name + "' (expected pratio, ada or bands)");
    }
    return g;
}

std::vector<AblationRow> run_ablation(const FeatureDataset& ds, const AblationGrid& grid, const Scheme& scheme,
                                      const FatConfig& base_model, const TrainConfig& train_cfg,
                                      const RunOptions& options) {
    std::vector<AblationRow> rows;
    for (const auto& cell : grid.cells) {
        AblationRow row;
        row.cell = cell;
        row.model = base_model;
        if (cell.p_ratio) row.model.p_ratio = *cell.p_ratio;
        if (cell.use_adjacency) row.model.use_adjacency = *cell.use_adjacency;
        const auto data = cell.bands.empty() ? ds : select_bands(ds, cell.bands);
        row.bands = data.band_names;
        row.model = fit_to_dataset(row.model, data);
        row.metrics = run_scheme(data, scheme, row.model, train_cfg, options);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_csv(const std::string& grid_name, const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << "grid,cell,p_ratio,use_adjacency,bands,n_folds,mean_accuracy,std_accuracy,fold_accuracies\n";
    for (const auto& r : rows) {
        std::vector<std::string> accs;
        for (double a : r.metrics.fold_accuracies()) accs.push_back(fmt(a));
        out << grid_name << ',' << r.cell.label << ',' << r.model.p_ratio << ','
            << (r.model.use_adjacency ? "true" : "false") << ',' << join(r.bands, '+') << ','
            << r.metrics.folds.size() << ',' << fmt(r.metrics.mean_accuracy) << ',' << fmt(r.metrics.std_accuracy)
            << ',' << join(accs, ';') << '\n';
    }
    return out.str();
}

}  // namespace fat
