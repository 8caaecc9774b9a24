#pragma once

#include "hts/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace htsf {

// Every key of the run configuration. Each one is a `--key` flag and may
// also appear in the INI file passed with --config, under its section.
struct Options {
    std::string config; // consumed by expand_config
    // [data]
    std::string hierarchy;
    std::string observations;
    std::string exogenous;
    std::string output = "out";
    std::string test_start;
    std::size_t test_size = 0;
    double coherence_eps = 1e-6;
    // [cv]
    std::size_t horizon = 7;
    std::size_t cv_start = 0;
    std::size_t cv_end = 0;
    std::size_t cv_step = 7;
    // [forecast]
    std::string candidates = "naive,snaive,arx,ets";
    std::size_t season = 7;
    std::size_t arx_max_lag = 14;
    bool arx_exog = true;
    std::size_t nar_lags = 7;
    std::size_t nar_units = 16;
    std::size_t nar_epochs = 200;
    std::size_t cls_holdout_folds = 4;
    // [reconcile]
    std::string methods = "BU,AHP,PHA,FP,MO,MINT";
    int middle_level = 1;
    std::string mo_shares = "fp";
    std::string base;
    // [nnd]
    std::string strategies = "nnd1,nnd2";
    std::size_t window = 30;
    std::size_t hop = 1;
    std::string calendar = "dow,month";
    std::size_t filters = 16;
    std::size_t kernel = 4;
    std::size_t units = 64;
    std::size_t conv_layers = 6;
    std::size_t mlp_layers = 3;
    bool grid_search = false;
    double alpha = 0.5;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 500;
    std::size_t patience = 20;
    double validation_fraction = 0.1;
    // [evaluate]
    std::string forecasts;
    bool smape = false;
    double significance = 0.05;
    // [run]
    std::uint64_t seed = 1;
    std::size_t jobs = 1;

    hts::RunConfig run_config() const;
};

// Registers every key as a flag of `app`, plus --config.
void add_run_options(CLI::App &app, Options &opts);

// Expands `--config FILE` into explicit flags for keys that are not given
// on the command line, so that flags override the file and the file
// overrides defaults. Throws hts::ConfigError on unknown keys or keys
// placed in the wrong section.
std::vector<std::string> expand_config(const std::vector<std::string> &args);

// Section of each key, for the help text and validation.
const std::vector<std::pair<std::string, std::string>> &config_keys();

} // namespace htsf
