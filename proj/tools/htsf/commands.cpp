#include "commands.hpp"

#include "hts/error.hpp"
#include "hts/io.hpp"
#include "hts/pipeline.hpp"
#include "hts/svg.hpp"
#include "hts/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace htsf {

namespace {

struct Inputs {
    hts::Hierarchy h;
    hts::SummingMatrix S;
    hts::SeriesPanel panel;
};

Inputs load_inputs(const Options &o) {
    if (o.hierarchy.empty()) throw hts::ConfigError("missing --hierarchy");
    if (o.observations.empty()) throw hts::ConfigError("missing --observations");
    Inputs in;
    in.h = hts::read_hierarchy_csv(o.hierarchy);
    in.S = hts::build_summing_matrix(in.h);
    std::optional<fs::path> exog;
    if (!o.exogenous.empty()) exog = o.exogenous;
    in.panel = hts::load_panel(in.h, o.observations, exog, o.coherence_eps);
    return in;
}

fs::path out_dir(const Options &o) {
    fs::path dir(o.output);
    fs::create_directories(dir);
    return dir;
}

std::string dump(const ordered_json &j) { return j.dump(2) + "\n"; }

ordered_json warnings_json(const hts::Warnings &w) {
    ordered_json a = ordered_json::array();
    for (const auto &s : w) a.push_back(s);
    return a;
}

void print_warnings(const hts::Warnings &w) {
    for (const auto &s : w) std::cerr << "warning: " << s << '\n';
}

std::string strategy_dir(hts::NndStrategy s) {
    auto name = hts::to_string(s);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    return name;
}

std::size_t row_of(const hts::SeriesPanel &panel, hts::Timestamp ts) {
    const auto it = std::find(panel.timestamps.begin(), panel.timestamps.end(), ts);
    if (it == panel.timestamps.end()) {
        throw hts::DataError("timestamp " + hts::format_timestamp(ts) + " is not in the observations");
    }
    return static_cast<std::size_t>(it - panel.timestamps.begin());
}

std::vector<hts::ForecastSet> read_all_sets(const fs::path &path, const hts::Hierarchy &h) {
    std::vector<hts::ForecastSet> sets;
    for (const auto &m : hts::forecast_csv_methods(path)) sets.push_back(hts::read_forecast_csv(path, h, m));
    return sets;
}

} // namespace

void cmd_synth(const std::string &spec_path, const std::string &output, std::optional<std::uint64_t> seed) {
    hts::GeneratorSpec spec;
    if (!spec_path.empty()) spec = hts::GeneratorSpec::from_json(hts::read_text_file(spec_path));
    if (seed) spec.seed = *seed;
    spec.validate();
    const auto data = hts::generate(spec);
    hts::write_dataset(output, spec, data);
}

void cmd_forecast(const Options &o) {
    const auto in = load_inputs(o);
    const auto cfg = o.run_config();
    const auto base = hts::fit_base(in.h, in.panel, cfg);
    const auto dir = out_dir(o);

    hts::write_forecast_csv(dir / "base.csv",
                            hts::make_forecast_set("BASE", in.h, in.panel, base.train_rows, base.test_forecasts));

    hts::SeriesPanel res;
    res.timestamps.assign(in.panel.timestamps.begin() + static_cast<std::ptrdiff_t>(base.residual_start),
                          in.panel.timestamps.begin() + static_cast<std::ptrdiff_t>(base.train_rows));
    res.values = base.residuals;
    hts::write_observations_csv(dir / "residuals.csv", in.h, res);

    ordered_json models = ordered_json::array();
    for (std::size_t i = 0; i < base.nodes.size(); ++i) {
        const auto &sel = base.selections[i];
        ordered_json cv = ordered_json::object();
        for (std::size_t c = 0; c < sel.candidates.size(); ++c) {
            const auto key = std::string(hts::to_string(sel.candidates[c]));
            if (c < sel.cv_mase.size() && sel.cv_mase[c]) cv[key] = *sel.cv_mase[c];
            else cv[key] = nullptr;
        }
        models.push_back({{"node_id", in.h.id(base.nodes[i])},
                          {"model", std::string(hts::to_string(sel.kind()))},
                          {"description", sel.model->describe()},
                          {"cv_mase", cv}});
    }
    ordered_json doc{{"train_rows", base.train_rows},
                     {"test_rows", in.panel.length() - base.train_rows},
                     {"seed", cfg.seed},
                     {"models", models},
                     {"warnings", warnings_json(base.warnings)}};
    hts::write_text_file(dir / "models.json", dump(doc));
    print_warnings(base.warnings);
}

void cmd_reconcile(const Options &o) {
    const auto in = load_inputs(o);
    const auto cfg = o.run_config();
    const auto dir = out_dir(o);
    const fs::path base_path = o.base.empty() ? dir / "base.csv" : fs::path(o.base);
    const auto base_fs = hts::read_forecast_csv(base_path, in.h, "BASE");

    hts::BaseResult base;
    base.train_rows = row_of(in.panel, base_fs.timestamps.front());
    base.test_forecasts = base_fs.values;
    if (base.train_rows + base_fs.horizon() != in.panel.length()) {
        throw hts::DataError("base forecasts must cover the rows from their first timestamp to the end of the observations");
    }
    const bool needs_residuals = std::find(cfg.recon.begin(), cfg.recon.end(), hts::ReconMethod::MINT) != cfg.recon.end();
    if (needs_residuals) {
        const auto res_path = base_path.parent_path() / "residuals.csv";
        if (!fs::exists(res_path)) {
            throw hts::ConfigError("MINT needs the in-sample residuals written by 'forecast' next to the base file (" +
                                   res_path.string() + ")");
        }
        base.residuals = hts::read_observations_csv(res_path, in.h).values;
    }

    hts::Warnings warnings;
    const auto sets = hts::reconcile_all(in.h, in.S, in.panel, base, cfg, warnings);
    std::ostringstream out;
    for (std::size_t i = 0; i < sets.size(); ++i) hts::write_forecast_csv(out, sets[i], i == 0);
    hts::write_text_file(dir / "reconciled.csv", out.str());
    print_warnings(warnings);
}

void cmd_nnd(const Options &o) {
    const auto in = load_inputs(o);
    const auto cfg = o.run_config();
    if (cfg.nnd.empty()) throw hts::ConfigError("no NND strategy requested");
    const auto dir = out_dir(o);
    const auto base = hts::fit_base(in.h, in.panel, cfg, hts::nnd_start_nodes(in.h, cfg));

    std::ostringstream csv;
    ordered_json runs = ordered_json::array();
    for (std::size_t i = 0; i < cfg.nnd.size(); ++i) {
        const auto run = hts::run_nnd(in.h, in.S, in.panel, base, cfg.nnd[i], cfg);
        hts::write_forecast_csv(csv, run.forecasts, i == 0);
        hts::save_bundle(dir / "models" / strategy_dir(run.strategy), run.ensemble, cfg.nnd_config);

        ordered_json models = ordered_json::array();
        for (const auto &m : run.ensemble.models) {
            ordered_json entry{{"parent", m.parent},
                               {"children", m.children},
                               {"seed", m.seed},
                               {"epochs", m.network.train_loss.size()},
                               {"best_epoch", m.network.best_epoch},
                               {"validation_loss", m.network.best_validation_loss()}};
            if (m.grid) {
                const auto &cell = m.grid->cells[m.grid->best_index];
                entry["grid"] = {{"filters", cell.filters}, {"kernel", cell.kernel}, {"units", cell.units}};
            }
            models.push_back(std::move(entry));
        }
        runs.push_back({{"strategy", hts::to_string(run.strategy)},
                        {"start_level", run.ensemble.start_level},
                        {"raw_coherence", run.raw_coherence()},
                        {"raw_abs_gap", run.raw_gap},
                        {"raw_abs_parent", run.raw_scale},
                        {"coherence_violation", hts::coherence_violation(in.S, run.forecasts.values)},
                        {"models", models}});
    }
    hts::write_text_file(dir / "nnd.csv", csv.str());
    ordered_json doc{{"train_rows", base.train_rows}, {"seed", cfg.seed}, {"runs", runs},
                     {"warnings", warnings_json(base.warnings)}};
    hts::write_text_file(dir / "nnd_diagnostics.json", dump(doc));
    print_warnings(base.warnings);
}

void cmd_evaluate(const Options &o) {
    const auto in = load_inputs(o);
    const auto cfg = o.run_config();
    const auto dir = out_dir(o);

    std::vector<fs::path> files;
    if (!o.forecasts.empty()) {
        for (const auto &f : CLI::detail::split(o.forecasts, ',')) {
            const auto p = CLI::detail::trim_copy(f);
            if (!p.empty()) files.emplace_back(p);
        }
    } else {
        for (const char *name : {"base.csv", "reconciled.csv", "nnd.csv"}) {
            if (fs::exists(dir / name)) files.push_back(dir / name);
        }
    }
    if (files.empty()) throw hts::ConfigError("no forecast files to evaluate");

    std::vector<hts::ForecastSet> sets;
    for (const auto &f : files) {
        for (auto &s : read_all_sets(f, in.h)) {
            if (std::any_of(sets.begin(), sets.end(), [&](const auto &x) { return x.method == s.method; })) {
                throw hts::ConfigError("method '" + s.method + "' appears in more than one forecast file");
            }
            sets.push_back(std::move(s));
        }
    }
    const std::size_t train = hts::resolve_train_rows(in.panel, cfg);
    auto report = hts::evaluate_sets(in.h, in.panel, train, sets, cfg);
    const bool ranked = report.methods.size() >= 2;
    if (ranked) hts::add_rank_tests(report, cfg.significance);

    hts::write_text_file(dir / "report.json", report.to_json());
    hts::write_text_file(dir / "report.csv", report.to_csv());
    if (!ranked) {
        throw hts::ConfigError("Friedman and Nemenyi tests need at least two methods (k >= 2); "
                               "report written without them");
    }
    hts::write_text_file(dir / "nemenyi.svg", hts::nemenyi_svg(*report.nemenyi, report.methods, "Nemenyi (MASE)"));
    print_warnings(report.warnings);
}

void cmd_plot(const Options &o, const std::vector<std::string> &nodes) {
    const auto in = load_inputs(o);
    const auto dir = out_dir(o);
    std::vector<fs::path> files;
    for (const auto &f : CLI::detail::split(o.forecasts, ',')) {
        const auto p = CLI::detail::trim_copy(f);
        if (!p.empty()) files.emplace_back(p);
    }
    if (o.forecasts.empty()) {
        for (const char *name : {"base.csv", "reconciled.csv", "nnd.csv"}) {
            if (fs::exists(dir / name)) files.push_back(dir / name);
        }
    }
    std::vector<hts::ForecastSet> sets;
    for (const auto &f : files) {
        for (auto &s : read_all_sets(f, in.h)) sets.push_back(std::move(s));
    }
    if (sets.empty()) throw hts::ConfigError("no forecast files to plot");
    const auto &ts = sets.front().timestamps;
    const std::size_t first = row_of(in.panel, ts.front());
    if (first + ts.size() > in.panel.length()) throw hts::DataError("forecasts extend past the observations");

    std::vector<std::string> wanted = nodes;
    if (wanted.empty()) wanted.push_back(in.h.id(0));
    for (const auto &id : wanted) {
        const auto idx = in.h.find(id);
        if (!idx) throw hts::ConfigError("unknown node '" + id + "'");
        std::vector<hts::PlotSeries> series;
        hts::PlotSeries actual{"actual", {}};
        for (std::size_t t = 0; t < ts.size(); ++t) {
            actual.values.push_back(in.panel.values(static_cast<hts::Index>(first + t), static_cast<hts::Index>(*idx)));
        }
        series.push_back(std::move(actual));
        for (const auto &s : sets) {
            if (s.timestamps != ts) {
                throw hts::DataError("forecast set '" + s.method + "' covers different timestamps");
            }
            hts::PlotSeries p{s.method, {}};
            for (std::size_t t = 0; t < ts.size(); ++t) {
                p.values.push_back(s.values(static_cast<hts::Index>(t), static_cast<hts::Index>(*idx)));
            }
            series.push_back(std::move(p));
        }
        hts::write_text_file(dir / ("plot_" + id + ".svg"), hts::line_plot_svg(id, ts, series));
    }
}

} // namespace htsf
