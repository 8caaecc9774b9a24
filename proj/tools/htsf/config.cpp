#include "config.hpp"

#include "hts/error.hpp"

#include <algorithm>
#include <fstream>

namespace htsf {

const std::vector<std::pair<std::string, std::string>> &config_keys() {
    static const std::vector<std::pair<std::string, std::string>> keys{
        {"hierarchy", "data"},       {"observations", "data"},   {"exogenous", "data"},
        {"output", "data"},          {"test_start", "data"},     {"test_size", "data"},
        {"coherence_eps", "data"},   {"horizon", "cv"},          {"cv_start", "cv"},
        {"cv_end", "cv"},            {"cv_step", "cv"},          {"candidates", "forecast"},
        {"season", "forecast"},      {"arx_max_lag", "forecast"}, {"arx_exog", "forecast"},
        {"nar_lags", "forecast"},    {"nar_units", "forecast"},  {"nar_epochs", "forecast"},
        {"cls_holdout_folds", "forecast"}, {"methods", "reconcile"}, {"middle_level", "reconcile"},
        {"mo_shares", "reconcile"},  {"base", "reconcile"},      {"strategies", "nnd"},
        {"window", "nnd"},           {"hop", "nnd"},             {"calendar", "nnd"},
        {"filters", "nnd"},          {"kernel", "nnd"},          {"units", "nnd"},
        {"conv_layers", "nnd"},      {"mlp_layers", "nnd"},      {"grid_search", "nnd"},
        {"alpha", "nnd"},            {"learning_rate", "nnd"},   {"batch_size", "nnd"},
        {"epochs", "nnd"},           {"patience", "nnd"},        {"validation_fraction", "nnd"},
        {"forecasts", "evaluate"},   {"smape", "evaluate"},      {"significance", "evaluate"},
        {"seed", "run"},             {"jobs", "run"},
    };
    return keys;
}

void add_run_options(CLI::App &app, Options &o) {
    app.add_option("--config", o.config, "INI file with [data] [cv] [forecast] [reconcile] [nnd] [evaluate] [run] sections");
    auto *g = &app;
    g->add_option("--hierarchy", o.hierarchy, "hierarchy CSV (node_id,parent_id,level)");
    g->add_option("--observations", o.observations, "observations CSV (timestamp,node_id,value)");
    g->add_option("--exogenous", o.exogenous, "regressors CSV (timestamp,node_id,variable,value)");
    g->add_option("--output", o.output, "output directory")->capture_default_str();
    g->add_option("--test_start", o.test_start, "first held-out timestamp");
    g->add_option("--test_size", o.test_size, "number of held-out rows (used without test_start)");
    g->add_option("--coherence_eps", o.coherence_eps, "tolerance of the observed coherence check")->capture_default_str();
    g->add_option("--horizon", o.horizon, "forecast horizon h")->capture_default_str();
    g->add_option("--cv_start", o.cv_start, "CV starting window (0: half the training rows)");
    g->add_option("--cv_end", o.cv_end, "CV ending window (0: training rows - h)");
    g->add_option("--cv_step", o.cv_step, "CV expanding step")->capture_default_str();
    g->add_option("--candidates", o.candidates, "F* candidates: naive,snaive,arx,ets,narx,comb_mean,comb_cls")
        ->capture_default_str();
    g->add_option("--season", o.season, "seasonal period")->capture_default_str();
    g->add_option("--arx_max_lag", o.arx_max_lag, "largest ARX lag order")->capture_default_str();
    g->add_option("--arx_exog", o.arx_exog, "use regressors in ARX")->capture_default_str();
    g->add_option("--nar_lags", o.nar_lags, "NAR(X) lags")->capture_default_str();
    g->add_option("--nar_units", o.nar_units, "NAR(X) hidden units")->capture_default_str();
    g->add_option("--nar_epochs", o.nar_epochs, "NAR(X) epochs")->capture_default_str();
    g->add_option("--cls_holdout_folds", o.cls_holdout_folds, "folds that train the CLS combination")->capture_default_str();
    g->add_option("--methods", o.methods, "reconciliation methods")->capture_default_str();
    g->add_option("--middle_level", o.middle_level, "middle level for MO and NNDMO")->capture_default_str();
    g->add_option("--mo_shares", o.mo_shares, "middle-out shares: fp, ahp or pha")->capture_default_str();
    g->add_option("--base", o.base, "base forecasts CSV (default: <output>/base.csv)");
    g->add_option("--strategies", o.strategies, "NND strategies: nnd1,nnd2,mo")->capture_default_str();
    g->add_option("--window", o.window, "window length w")->capture_default_str();
    g->add_option("--hop", o.hop, "window hop")->capture_default_str();
    g->add_option("--calendar", o.calendar, "calendar dummies: dow,month,hour or none")->capture_default_str();
    g->add_option("--filters", o.filters, "conv filters F")->capture_default_str();
    g->add_option("--kernel", o.kernel, "conv kernel size")->capture_default_str();
    g->add_option("--units", o.units, "dense units H")->capture_default_str();
    g->add_option("--conv_layers", o.conv_layers, "conv layers")->capture_default_str();
    g->add_option("--mlp_layers", o.mlp_layers, "dense layers")->capture_default_str();
    g->add_option("--grid_search", o.grid_search, "search F x K x H per model")->capture_default_str();
    g->add_option("--alpha", o.alpha, "weight of the coherence term")->capture_default_str();
    g->add_option("--learning_rate", o.learning_rate, "Adam learning rate")->capture_default_str();
    g->add_option("--batch_size", o.batch_size, "mini-batch size")->capture_default_str();
    g->add_option("--epochs", o.epochs, "maximum epochs")->capture_default_str();
    g->add_option("--patience", o.patience, "early-stopping patience")->capture_default_str();
    g->add_option("--validation_fraction", o.validation_fraction, "chronological validation tail")->capture_default_str();
    g->add_option("--forecasts", o.forecasts, "forecast CSVs to evaluate (default: base, reconciled, nnd)");
    g->add_option("--smape", o.smape, "also report SMAPE")->capture_default_str();
    g->add_option("--significance", o.significance, "Nemenyi significance (0.05 or 0.10)")->capture_default_str();
    g->add_option("--seed", o.seed, "root seed")->capture_default_str();
    g->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
}

hts::RunConfig Options::run_config() const {
    hts::RunConfig cfg;
    cfg.test_size = test_size;
    if (!test_start.empty()) cfg.test_start = test_start;
    cfg.horizon = horizon;
    cfg.cv_start = cv_start;
    cfg.cv_end = cv_end;
    cfg.cv_step = cv_step;
    cfg.candidates = hts::parse_model_list(candidates);
    cfg.forecaster.season = season;
    cfg.forecaster.arx_max_lag = arx_max_lag;
    cfg.forecaster.arx_exog = arx_exog;
    cfg.forecaster.nar.lags = nar_lags;
    cfg.forecaster.nar.units = nar_units;
    cfg.forecaster.nar.max_epochs = nar_epochs;
    cfg.forecaster.cls_holdout_folds = cls_holdout_folds;
    cfg.forecaster.cls_horizon = horizon;
    cfg.recon = hts::parse_recon_list(methods);
    cfg.middle_level = middle_level;
    cfg.mo_shares = mo_shares;
    cfg.nnd.clear();
    for (const auto &s : CLI::detail::split(strategies, ',')) {
        const auto name = CLI::detail::to_lower(CLI::detail::trim_copy(s));
        if (name.empty()) continue;
        hts::NndStrategy st;
        if (name == "nnd1") st = hts::NndStrategy::NND1;
        else if (name == "nnd2") st = hts::NndStrategy::NND2;
        else if (name == "mo" || name == "nndmo") st = hts::NndStrategy::MiddleOut;
        else throw hts::ConfigError("unknown NND strategy '" + name + "' (expected nnd1, nnd2 or mo)");
        if (std::find(cfg.nnd.begin(), cfg.nnd.end(), st) == cfg.nnd.end()) cfg.nnd.push_back(st);
    }
    std::sort(cfg.nnd.begin(), cfg.nnd.end());
    auto &n = cfg.nnd_config;
    n.window.w = window;
    n.window.hop = hop;
    n.window.validate();
    n.calendar = hts::parse_calendar_spec(calendar);
    n.filters = filters;
    n.kernel = kernel;
    n.units = units;
    n.conv_layers = conv_layers;
    n.mlp_layers = mlp_layers;
    n.grid_search = grid_search;
    n.train.alpha = alpha;
    n.train.learning_rate = learning_rate;
    n.train.batch_size = batch_size;
    n.train.max_epochs = epochs;
    n.train.patience = patience;
    n.train.validation_fraction = validation_fraction;
    n.train.validate();
    cfg.smape = smape;
    if (significance != 0.05 && significance != 0.10) {
        throw hts::ConfigError("significance must be 0.05 or 0.10");
    }
    cfg.significance = significance;
    cfg.seed = seed;
    cfg.jobs = std::max<std::size_t>(1, jobs);
    cfg.propagate();
    return cfg;
}

namespace {

bool given_on_command_line(const std::vector<std::string> &args, const std::string &key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string &a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

} // namespace

std::vector<std::string> expand_config(const std::vector<std::string> &args) {
    std::vector<std::string> out;
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            out.push_back(args[i]);
        }
    }
    if (path.empty()) {
        return out;
    }
    std::ifstream in(path);
    if (!in) {
        throw hts::ConfigError("cannot open config file '" + path + "'");
    }
    CLI::ConfigINI ini;
    std::vector<CLI::ConfigItem> items;
    try {
        items = ini.from_config(in);
    } catch (const CLI::Error &e) {
        throw hts::ConfigError("config file '" + path + "': " + e.what());
    }
    const auto &keys = config_keys();
    for (const auto &item : items) {
        if (item.name == "++" || item.name == "--") continue;
        const auto it = std::find_if(keys.begin(), keys.end(), [&](const auto &k) { return k.first == item.name; });
        if (it == keys.end()) {
            throw hts::ConfigError("config file '" + path + "': unknown key '" + item.name + "'");
        }
        const std::string section = item.parents.empty() ? "" : item.parents.back();
        if (!section.empty() && section != "default" && section != it->second) {
            throw hts::ConfigError("config file '" + path + "': key '" + item.name + "' belongs in section [" +
                                   it->second + "], found in [" + section + "]");
        }
        if (given_on_command_line(out, item.name)) continue;
        std::string value;
        for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
        out.push_back("--" + item.name);
        out.push_back(value);
    }
    return out;
}

} // namespace htsf
