#include "hts/nnd.hpp"

#include "hts/error.hpp"
#include "hts/io.hpp"
#include "hts/parallel.hpp"
#include "hts/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace hts {

using json = nlohmann::json;

void WindowConfig::validate() const {
    if (w == 0 || hop == 0) {
        throw ConfigError("window length and hop must be at least 1");
    }
}

std::vector<Window> make_windows(std::span<const double> series, const WindowConfig &cfg) {
    cfg.validate();
    if (series.size() < cfg.w) {
        throw DataError("series of length " + std::to_string(series.size()) + " is shorter than the window (" +
                        std::to_string(cfg.w) + ")");
    }
    std::vector<Window> out;
    for (std::size_t t = cfg.w - 1; t < series.size(); t += cfg.hop) {
        out.push_back({{series.begin() + static_cast<std::ptrdiff_t>(t + 1 - cfg.w),
                        series.begin() + static_cast<std::ptrdiff_t>(t + 1)},
                       t});
    }
    return out;
}

std::size_t feature_width(const SeriesPanel &panel, const std::vector<std::size_t> &children,
                          const CalendarSpec &calendar) {
    std::size_t width = calendar.width();
    for (std::size_t c : children) width += panel.exog_width(c);
    return width;
}

std::vector<double> assemble_features(const SeriesPanel &panel, const std::vector<std::size_t> &children, std::size_t t,
                                      const CalendarSpec &calendar) {
    if (t >= panel.length()) {
        throw DataError("no regressors or timestamp at row " + std::to_string(t) + " (panel has " +
                        std::to_string(panel.length()) + " rows)");
    }
    std::vector<double> out;
    out.reserve(feature_width(panel, children, calendar));
    for (std::size_t c : children) {
        const auto &x = panel.exog[c];
        for (Index j = 0; j < x.cols(); ++j) {
            out.push_back(x(static_cast<Index>(t), j));
        }
    }
    append_calendar_features(calendar, panel.timestamps[t], out);
    return out;
}

std::uint64_t model_seed(std::uint64_t root, const std::string &parent_id) {
    return derive_seed(root, "nnd/" + parent_id);
}

nn::Dataset build_dataset(const Hierarchy &h, const SeriesPanel &panel, std::size_t parent,
                          const std::vector<std::size_t> &children, std::size_t rows, const NndConfig &cfg) {
    cfg.window.validate();
    rows = std::min(rows, panel.length());
    const std::size_t w = cfg.window.w;
    if (rows < w) {
        throw DataError("node '" + h.id(parent) + "': " + std::to_string(rows) + " training rows do not fill a window of " +
                        std::to_string(w));
    }
    const std::size_t n = (rows - w) / cfg.window.hop + 1;
    const std::size_t d = feature_width(panel, children, cfg.calendar);
    nn::Dataset data;
    data.exog.resize(static_cast<Index>(n), static_cast<Index>(d));
    data.windows.resize(static_cast<Index>(n), static_cast<Index>(w));
    data.targets.resize(static_cast<Index>(n), static_cast<Index>(children.size()));
    const auto pcol = static_cast<Index>(parent);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = w - 1 + i * cfg.window.hop;
        const auto r = static_cast<Index>(i);
        const auto x = assemble_features(panel, children, t, cfg.calendar);
        for (std::size_t j = 0; j < d; ++j) data.exog(r, static_cast<Index>(j)) = x[j];
        for (std::size_t j = 0; j < w; ++j) {
            data.windows(r, static_cast<Index>(j)) = panel.values(static_cast<Index>(t + 1 - w + j), pcol);
        }
        for (std::size_t c = 0; c < children.size(); ++c) {
            data.targets(r, static_cast<Index>(c)) = panel.values(static_cast<Index>(t), static_cast<Index>(children[c]));
        }
    }
    return data;
}

DisaggregationModel train_nnd(const Hierarchy &h, const SeriesPanel &panel, std::size_t parent,
                              const std::vector<std::size_t> &children, std::size_t rows, const NndConfig &cfg) {
    if (children.empty()) {
        throw ConfigError("node '" + h.id(parent) + "' has no series to disaggregate into");
    }
    DisaggregationModel model;
    model.parent = h.id(parent);
    model.parent_index = parent;
    model.child_indices = children;
    for (std::size_t c : children) model.children.push_back(h.id(c));
    model.window = cfg.window;
    model.calendar = cfg.calendar;
    model.seed = model_seed(cfg.train.seed, model.parent);

    const auto data = build_dataset(h, panel, parent, children, rows, cfg);
    auto spec = nn::NetworkSpec::two_branch(feature_width(panel, children, cfg.calendar), cfg.window.w, children.size(),
                                            cfg.filters, cfg.kernel, cfg.units, cfg.conv_layers, cfg.mlp_layers);
    nn::TrainConfig tc = cfg.train;
    tc.seed = model.seed;
    try {
        if (cfg.grid_search) {
            model.grid = nn::grid_search(cfg.grid, spec, data, tc, nn::train, 1);
            spec = model.grid->best;
        }
        model.network = nn::train(spec, data, tc);
    } catch (const TrainingError &e) {
        throw TrainingError(e.epoch(), "node '" + model.parent + "': " + e.what());
    } catch (const DataError &e) {
        throw DataError("node '" + model.parent + "': " + e.what());
    }
    return model;
}

Disaggregation disaggregate(const DisaggregationModel &model, const SeriesPanel &panel, std::size_t origin,
                            const Vector &parent_forecast) {
    const std::size_t w = model.window.w;
    const auto h = static_cast<std::size_t>(parent_forecast.size());
    if (origin + 1 < w) {
        throw DataError("node '" + model.parent + "': " + std::to_string(origin) +
                        " observations of history cannot fill a window of " + std::to_string(w));
    }
    if (origin > panel.length()) {
        throw DataError("forecast origin beyond the panel");
    }
    if (!parent_forecast.allFinite()) {
        throw NumericError("node '" + model.parent + "': parent forecast is not finite");
    }
    const auto pcol = static_cast<Index>(model.parent_index);
    Disaggregation out;
    out.children.resize(static_cast<Index>(h), static_cast<Index>(model.child_indices.size()));
    std::vector<double> window(w);
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t t = origin + i;
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t s = t + 1 - w + j;
            window[j] = s < origin ? panel.values(static_cast<Index>(s), pcol) : parent_forecast(static_cast<Index>(s - origin));
        }
        const auto x = assemble_features(panel, model.child_indices, t, model.calendar);
        const Vector y = model.network.predict(x, window);
        out.children.row(static_cast<Index>(i)) = y.transpose();
        out.abs_sum_gap += std::abs(y.sum() - parent_forecast(static_cast<Index>(i)));
        out.abs_parent += std::abs(parent_forecast(static_cast<Index>(i)));
    }
    return out;
}

std::string to_string(NndStrategy s) {
    switch (s) {
    case NndStrategy::NND1: return "NND1";
    case NndStrategy::NND2: return "NND2";
    case NndStrategy::MiddleOut: return "NNDMO";
    }
    return "unknown";
}

NndEnsemble train_ensemble(const Hierarchy &h, const SeriesPanel &panel, std::size_t rows, NndStrategy strategy,
                           const NndConfig &cfg, int level) {
    if (h.levels() < 2) {
        throw ConfigError("neural disaggregation needs at least two levels");
    }
    NndEnsemble ens;
    ens.strategy = strategy;
    ens.hierarchy_hash = h.hash();
    if (strategy == NndStrategy::NND1) {
        const auto bottom = h.level_nodes(h.levels() - 1);
        ens.models.push_back(train_nnd(h, panel, 0, bottom, rows, cfg));
        return ens;
    }
    if (strategy == NndStrategy::MiddleOut) {
        if (level < 0 || level >= h.levels() - 1) {
            throw ConfigError("middle level " + std::to_string(level) + " must lie above the bottom level");
        }
        ens.start_level = level;
    }
    for (int k = ens.start_level; k + 1 < h.levels(); ++k) {
        const auto parents = h.level_nodes(k);
        std::vector<DisaggregationModel> trained(parents.size());
        parallel_for(parents.size(), cfg.jobs, [&](std::size_t i) {
            trained[i] = train_nnd(h, panel, parents[i], h.children(parents[i]), rows, cfg);
        });
        for (auto &m : trained) ens.models.push_back(std::move(m));
    }
    return ens;
}

NndForecast forecast_ensemble(const NndEnsemble &ens, const Hierarchy &h, const SummingMatrix &S,
                              const SeriesPanel &panel, std::size_t origin, const Matrix &start_forecasts) {
    const auto start_nodes = h.level_nodes(ens.start_level);
    if (start_forecasts.cols() != static_cast<Index>(start_nodes.size())) {
        throw DataError("expected forecasts for the " + std::to_string(start_nodes.size()) + " nodes of level " +
                        std::to_string(ens.start_level));
    }
    const Index H = start_forecasts.rows();
    Matrix all = Matrix::Constant(H, static_cast<Index>(h.size()), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j < start_nodes.size(); ++j) {
        all.col(static_cast<Index>(start_nodes[j])) = start_forecasts.col(static_cast<Index>(j));
    }
    NndForecast out;
    for (const auto &m : ens.models) {
        const Vector parent = all.col(static_cast<Index>(m.parent_index));
        auto d = disaggregate(m, panel, origin, parent);
        for (std::size_t c = 0; c < m.child_indices.size(); ++c) {
            all.col(static_cast<Index>(m.child_indices[c])) = d.children.col(static_cast<Index>(c));
        }
        out.raw_gap += d.abs_sum_gap;
        out.raw_scale += d.abs_parent;
    }
    const std::size_t bottom_begin = h.level_begin(h.levels() - 1);
    const Matrix bottom = all.middleCols(static_cast<Index>(bottom_begin), static_cast<Index>(h.bottom_count()));
    if (!bottom.allFinite()) {
        throw NumericError("neural disaggregation left bottom-level forecasts undefined");
    }
    out.values = aggregate(S, bottom);
    return out;
}

namespace {

json config_json(const NndConfig &cfg) {
    return {{"window", cfg.window.w},
            {"hop", cfg.window.hop},
            {"calendar", to_string(cfg.calendar)},
            {"filters", cfg.filters},
            {"kernel", cfg.kernel},
            {"units", cfg.units},
            {"conv_layers", cfg.conv_layers},
            {"mlp_layers", cfg.mlp_layers},
            {"grid_search", cfg.grid_search},
            {"alpha", cfg.train.alpha},
            {"learning_rate", cfg.train.learning_rate},
            {"batch_size", cfg.train.batch_size},
            {"max_epochs", cfg.train.max_epochs},
            {"patience", cfg.train.patience},
            {"validation_fraction", cfg.train.validation_fraction},
            {"seed", std::to_string(cfg.train.seed)}};
}

std::string model_file(const std::string &parent) {
    return "model_" + parent + ".nnw";
}

} // namespace

void save_bundle(const std::filesystem::path &dir, const NndEnsemble &ens, const NndConfig &cfg) {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["format"] = "hts-nnd-bundle/1";
    manifest["strategy"] = to_string(ens.strategy);
    manifest["start_level"] = ens.start_level;
    manifest["hierarchy_hash"] = std::to_string(ens.hierarchy_hash);
    manifest["config"] = config_json(cfg);
    json models = json::array();
    for (const auto &m : ens.models) {
        m.network.save(dir / model_file(m.parent));
        json entry = {{"parent", m.parent},
                      {"children", m.children},
                      {"seed", std::to_string(m.seed)},
                      {"window", m.window.w},
                      {"hop", m.window.hop},
                      {"calendar", to_string(m.calendar)},
                      {"file", model_file(m.parent)},
                      {"best_epoch", m.network.best_epoch},
                      {"epochs", m.network.train_loss.size()}};
        if (m.grid) {
            json cells = json::array();
            for (const auto &c : m.grid->cells) {
                cells.push_back({{"filters", c.filters},
                                 {"kernel", c.kernel},
                                 {"units", c.units},
                                 {"validation_loss", c.failed ? json(nullptr) : json(c.validation_loss)},
                                 {"error", c.error}});
            }
            entry["grid"] = cells;
        }
        models.push_back(std::move(entry));
    }
    manifest["models"] = models;
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

NndEnsemble load_bundle(const std::filesystem::path &dir, const Hierarchy &h) {
    json manifest;
    try {
        manifest = json::parse(read_text_file(dir / "manifest.json"));
    } catch (const json::exception &e) {
        throw DataError("model bundle manifest is not valid JSON: " + std::string(e.what()));
    }
    try {
        if (manifest.at("format") != "hts-nnd-bundle/1") {
            throw DataError("unsupported model bundle format");
        }
        NndEnsemble ens;
        ens.hierarchy_hash = std::stoull(manifest.at("hierarchy_hash").get<std::string>());
        if (ens.hierarchy_hash != h.hash()) {
            throw DataError("model bundle was trained on a different hierarchy");
        }
        const auto strategy = manifest.at("strategy").get<std::string>();
        ens.strategy = strategy == "NND1" ? NndStrategy::NND1 : strategy == "NND2" ? NndStrategy::NND2 : NndStrategy::MiddleOut;
        ens.start_level = manifest.at("start_level").get<int>();
        for (const auto &entry : manifest.at("models")) {
            DisaggregationModel m;
            m.parent = entry.at("parent").get<std::string>();
            m.parent_index = h.index_of(m.parent);
            m.children = entry.at("children").get<std::vector<std::string>>();
            for (const auto &c : m.children) m.child_indices.push_back(h.index_of(c));
            m.seed = std::stoull(entry.at("seed").get<std::string>());
            m.window.w = entry.at("window").get<std::size_t>();
            m.window.hop = entry.at("hop").get<std::size_t>();
            m.calendar = parse_calendar_spec(entry.at("calendar").get<std::string>());
            m.network = nn::TrainedNetwork::load(dir / entry.at("file").get<std::string>());
            ens.models.push_back(std::move(m));
        }
        return ens;
    } catch (const json::exception &e) {
        throw DataError("model bundle manifest: " + std::string(e.what()));
    }
}

} // namespace hts
