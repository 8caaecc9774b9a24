#include "commands.hpp"
#include "config.hpp"

#include "hts/error.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>

namespace {

int report(std::string_view category, const std::string &message, int code) {
    nlohmann::ordered_json j{{"error", std::string(category)}, {"message", message}, {"exit_code", code}};
    std::cerr << j.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char **argv) {
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);

    try {
        std::vector<std::string> forward(args.rbegin(), args.rend());
        forward = htsf::expand_config(forward);
        args.assign(forward.rbegin(), forward.rend());
    } catch (const hts::Error &e) {
        return report(e.category(), e.what(), e.exit_code());
    }

    CLI::App app{"Hierarchical time series forecasting with neural disaggregation"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    htsf::Options opts;

    std::string spec_path, synth_out = "data";
    std::optional<std::uint64_t> synth_seed;
    auto *synth = app.add_subcommand("synth", "generate a synthetic hierarchy with ground truth");
    synth->add_option("--spec", spec_path, "generator spec JSON (defaults when omitted)");
    synth->add_option("--output", synth_out, "output directory")->capture_default_str();
    synth->add_option("--seed", synth_seed, "override the spec seed");

    auto *forecast = app.add_subcommand("forecast", "select and fit a base forecaster per node");
    auto *reconcile = app.add_subcommand("reconcile", "reconcile base forecasts (BU, AHP, PHA, FP, MO, MINT)");
    auto *nnd = app.add_subcommand("nnd", "train the disaggregation networks and forecast");
    auto *evaluate = app.add_subcommand("evaluate", "MASE/SMAPE report with Friedman and Nemenyi tests");
    auto *plot = app.add_subcommand("plot", "SVG plots of actuals against forecasts");
    std::vector<std::string> plot_nodes;
    for (auto *sub : {forecast, reconcile, nnd, evaluate, plot}) htsf::add_run_options(*sub, opts);
    plot->add_option("--node", plot_nodes, "node to plot (repeatable; root by default)");

    htsf::ItalianOptions italian;
    italian.output = "italian";
    auto *fetch = app.add_subcommand("fetch-italian", "convert the public Italian grocery dataset to CSV inputs");
    fetch->add_option("--output", italian.output, "output directory")->capture_default_str();
    fetch->add_option("--input", italian.input, "local copy of the wide CSV (skips the download)");
    fetch->add_option("--url", italian.url, "direct download URL of the wide CSV");

    try {
        app.parse(args);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        return report("config", e.what(), 2);
    }

    try {
        if (*synth) htsf::cmd_synth(spec_path, synth_out, synth_seed);
        else if (*forecast) htsf::cmd_forecast(opts);
        else if (*reconcile) htsf::cmd_reconcile(opts);
        else if (*nnd) htsf::cmd_nnd(opts);
        else if (*evaluate) htsf::cmd_evaluate(opts);
        else if (*plot) htsf::cmd_plot(opts, plot_nodes);
        else if (*fetch) htsf::cmd_fetch_italian(italian);
    } catch (const hts::Error &e) {
        return report(e.category(), e.what(), e.exit_code());
    } catch (const std::filesystem::filesystem_error &e) {
        return report("data", e.what(), 3);
    } catch (const std::exception &e) {
        return report("numeric", e.what(), 4);
    }
    return 0;
}
