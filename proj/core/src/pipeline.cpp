#include "hts/pipeline.hpp"

#include "hts/error.hpp"
#include "hts/parallel.hpp"
#include "hts/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hts {

void RunConfig::propagate() {
    forecaster.seed = derive_seed(seed, "forecast");
    nnd_config.train.seed = derive_seed(seed, "nnd");
    nnd_config.jobs = jobs;
}

std::size_t resolve_train_rows(const SeriesPanel &panel, const RunConfig &cfg) {
    const std::size_t T = panel.length();
    std::size_t train = 0;
    if (cfg.test_start) {
        const Timestamp ts = parse_timestamp(*cfg.test_start);
        const auto it = std::lower_bound(panel.timestamps.begin(), panel.timestamps.end(), ts);
        train = static_cast<std::size_t>(it - panel.timestamps.begin());
    } else {
        if (cfg.test_size == 0 || cfg.test_size >= T) {
            throw ConfigError("test_size must be between 1 and " + std::to_string(T - 1));
        }
        train = T - cfg.test_size;
    }
    if (train == 0 || train >= T) {
        throw ConfigError("the train/test split leaves one side empty");
    }
    return train;
}

CVConfig resolve_cv(const RunConfig &cfg, std::size_t train_rows) {
    CVConfig cv;
    cv.horizon = cfg.horizon;
    cv.step = cfg.cv_step;
    cv.starting_window = cfg.cv_start > 0 ? cfg.cv_start : train_rows / 2;
    cv.ending_window = cfg.cv_end > 0 ? cfg.cv_end : train_rows - std::min(train_rows, cfg.horizon);
    try {
        cv.validate(train_rows);
    } catch (const ConfigError &e) {
        throw ConfigError(std::string(e.what()) + " (training rows: " + std::to_string(train_rows) + ")");
    }
    return cv;
}

ForecastSet make_forecast_set(const std::string &method, const Hierarchy &h, const SeriesPanel &panel,
                              std::size_t first_row, const Matrix &values) {
    ForecastSet fs;
    fs.method = method;
    for (const auto &n : h.nodes()) fs.node_ids.push_back(n.id);
    fs.timestamps.assign(panel.timestamps.begin() + static_cast<std::ptrdiff_t>(first_row),
                         panel.timestamps.begin() + static_cast<std::ptrdiff_t>(first_row + static_cast<std::size_t>(values.rows())));
    fs.values = values;
    return fs;
}

Matrix rolling_forecast(const ForecastModel &model, std::span<const double> y, const Matrix &exog,
                        std::size_t train_rows, std::size_t test_rows, std::size_t h) {
    if (h == 0) {
        throw ConfigError("forecast horizon must be positive");
    }
    Vector out(static_cast<Index>(test_rows));
    for (std::size_t done = 0; done < test_rows; done += h) {
        const std::size_t len = std::min(h, test_rows - done);
        const std::size_t origin = train_rows + done;
        out.segment(static_cast<Index>(done), static_cast<Index>(len)) = model.forecast(y.subspan(0, origin), exog, len);
    }
    if (!out.allFinite()) {
        throw NumericError(model.describe() + " produced non-finite forecasts");
    }
    return out;
}

std::vector<std::size_t> nnd_start_nodes(const Hierarchy &h, const RunConfig &cfg) {
    std::vector<std::size_t> out;
    for (auto s : cfg.nnd) {
        const auto nodes = s == NndStrategy::MiddleOut ? h.level_nodes(cfg.middle_level) : h.level_nodes(0);
        out.insert(out.end(), nodes.begin(), nodes.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

BaseResult fit_base(const Hierarchy &h, const SeriesPanel &panel, const RunConfig &cfg, std::vector<std::size_t> nodes) {
    BaseResult res;
    res.train_rows = resolve_train_rows(panel, cfg);
    const std::size_t train = res.train_rows;
    const std::size_t test = panel.length() - train;
    const CVConfig cv = resolve_cv(cfg, train);
    if (nodes.empty()) {
        nodes.resize(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) nodes[i] = i;
    }
    res.nodes = nodes;
    res.selections.resize(nodes.size());
    res.residual_start = std::min(train - 1, std::max(cfg.forecaster.arx_max_lag + 2, cfg.forecaster.season));
    const std::size_t rrows = train - res.residual_start;
    res.test_forecasts = Matrix::Constant(static_cast<Index>(test), static_cast<Index>(h.size()),
                                          std::numeric_limits<double>::quiet_NaN());
    res.residuals = Matrix::Zero(static_cast<Index>(rrows), static_cast<Index>(h.size()));
    std::vector<Warnings> warn(nodes.size());

    parallel_for(nodes.size(), cfg.jobs, [&](std::size_t i) {
        const std::size_t n = nodes[i];
        const Vector full = panel.values.col(static_cast<Index>(n));
        const std::span<const double> y(full.data(), panel.length());
        const auto train_y = y.subspan(0, train);
        const Matrix &x = panel.exog[n];
        ModelSelection sel;
        try {
            sel = select_model(train_y, x, cfg.candidates, cv, cfg.forecaster);
        } catch (const Error &e) {
            sel.candidates = cfg.candidates;
            sel.model = fit_model(ModelKind::Naive, train_y, x, cfg.forecaster);
            sel.warnings.push_back(std::string("no candidate could be selected, using naive: ") + e.what());
        }
        for (const auto &w : sel.warnings) warn[i].push_back(h.id(n) + ": " + w);
        res.test_forecasts.col(static_cast<Index>(n)) = rolling_forecast(*sel.model, y, x, train, test, cfg.horizon);
        const Vector fitted = sel.model->fitted_one_step(train_y, x, res.residual_start);
        res.residuals.col(static_cast<Index>(n)) = full.segment(static_cast<Index>(res.residual_start),
                                                                static_cast<Index>(rrows)) - fitted;
        res.selections[i] = std::move(sel);
    });
    for (auto &w : warn) res.warnings.insert(res.warnings.end(), w.begin(), w.end());
    return res;
}

std::vector<ForecastSet> reconcile_all(const Hierarchy &h, const SummingMatrix &S, const SeriesPanel &panel,
                                       const BaseResult &base, const RunConfig &cfg, Warnings &warnings) {
    const Matrix &B = base.test_forecasts;
    if (!B.allFinite()) {
        throw DataError("reconciliation needs base forecasts for every node");
    }
    const std::size_t train = base.train_rows;
    const Matrix history = panel.values.topRows(static_cast<Index>(train));
    const std::size_t bottom_begin = h.level_begin(h.levels() - 1);
    const auto m = static_cast<Index>(h.bottom_count());
    const Vector top = B.col(0);
    std::vector<ForecastSet> out;
    for (auto method : cfg.recon) {
        Matrix values;
        switch (method) {
        case ReconMethod::BU:
            values = bottom_up(S, B.middleCols(static_cast<Index>(bottom_begin), m));
            break;
        case ReconMethod::AHP: {
            Warnings local;
            const Vector p = proportions_ahp(history.col(0), history.middleCols(static_cast<Index>(bottom_begin), m), &local);
            warnings.insert(warnings.end(), local.begin(), local.end());
            values = apply_topdown(S, p.transpose(), top);
            break;
        }
        case ReconMethod::PHA: {
            const Vector p = proportions_pha(history.col(0), history.middleCols(static_cast<Index>(bottom_begin), m));
            values = apply_topdown(S, p.transpose(), top);
            break;
        }
        case ReconMethod::FP:
            values = apply_topdown(S, proportions_fp(h, B, 0), top);
            break;
        case ReconMethod::MO: {
            const int level = cfg.middle_level;
            if (level < 0 || level >= h.levels()) {
                throw ConfigError("middle_level " + std::to_string(level) + " outside the hierarchy");
            }
            Matrix shares;
            if (cfg.mo_shares == "fp") {
                shares = proportions_fp(h, B, level);
            } else if (cfg.mo_shares == "ahp" || cfg.mo_shares == "pha") {
                shares = local_proportions(h, level, history, cfg.mo_shares == "ahp" ? ShareMethod::AHP : ShareMethod::PHA,
                                           &warnings);
            } else {
                throw ConfigError("mo_shares must be fp, ahp or pha");
            }
            const auto begin = static_cast<Index>(h.level_begin(level));
            const auto count = static_cast<Index>(h.level_count(level));
            values = middle_out(h, S, level, B.middleCols(begin, count), shares);
            break;
        }
        case ReconMethod::MINT: {
            const auto cov = shrinkage_covariance(base.residuals);
            if (cov.jitter > 0.0) {
                warnings.push_back("mint: added " + std::to_string(cov.jitter) + " to the covariance diagonal");
            }
            values = mint_reconcile(S, B, cov.W);
            break;
        }
        }
        out.push_back(make_forecast_set(std::string(to_string(method)), h, panel, train, values));
    }
    return out;
}

NndRun run_nnd(const Hierarchy &h, const SummingMatrix &S, const SeriesPanel &panel, const BaseResult &base,
               NndStrategy strategy, const RunConfig &cfg) {
    const std::size_t train = base.train_rows;
    const std::size_t test = panel.length() - train;
    NndRun run;
    run.strategy = strategy;
    run.ensemble = train_ensemble(h, panel, train, strategy, cfg.nnd_config, cfg.middle_level);
    const int level = run.ensemble.start_level;
    const auto begin = static_cast<Index>(h.level_begin(level));
    const auto count = static_cast<Index>(h.level_count(level));
    const Matrix start = base.test_forecasts.middleCols(begin, count);
    if (!start.allFinite()) {
        throw DataError("neural disaggregation needs base forecasts for level " + std::to_string(level));
    }
    Matrix values(static_cast<Index>(test), static_cast<Index>(h.size()));
    for (std::size_t done = 0; done < test; done += cfg.horizon) {
        const auto len = static_cast<Index>(std::min(cfg.horizon, test - done));
        const auto f = forecast_ensemble(run.ensemble, h, S, panel, train + done,
                                         start.middleRows(static_cast<Index>(done), len));
        values.middleRows(static_cast<Index>(done), len) = f.values;
        run.raw_gap += f.raw_gap;
        run.raw_scale += f.raw_scale;
    }
    run.forecasts = make_forecast_set(to_string(strategy), h, panel, train, values);
    return run;
}

EvalReport evaluate_sets(const Hierarchy &h, const SeriesPanel &panel, std::size_t train_rows,
                         const std::vector<ForecastSet> &sets, const RunConfig &cfg) {
    if (sets.empty()) {
        throw ConfigError("no forecast sets to evaluate");
    }
    const auto &ts = sets.front().timestamps;
    for (const auto &s : sets) {
        if (s.timestamps != ts) {
            throw DataError("forecast set '" + s.method + "' covers different timestamps than '" + sets.front().method + "'");
        }
    }
    const auto it = std::find(panel.timestamps.begin(), panel.timestamps.end(), ts.front());
    if (it == panel.timestamps.end()) {
        throw DataError("forecasts start at " + format_timestamp(ts.front()) + ", which is not in the observations");
    }
    const auto first = static_cast<std::size_t>(it - panel.timestamps.begin());
    if (first + ts.size() > panel.length()) {
        throw DataError("forecasts extend past the observations");
    }
    if (train_rows == 0 || train_rows > first) {
        train_rows = first;
    }
    const Matrix actual = panel.values.middleRows(static_cast<Index>(first), static_cast<Index>(ts.size()));
    const Matrix insample = panel.values.topRows(static_cast<Index>(train_rows));
    return build_report(h, actual, insample, sets, cfg.forecaster.season, cfg.smape);
}

} // namespace hts
