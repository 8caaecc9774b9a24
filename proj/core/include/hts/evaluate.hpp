#pragma once

#include "hts/forecast_set.hpp"
#include "hts/hierarchy.hpp"
#include "hts/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hts {

// Mean absolute scaled error. The scale is the in-sample MAE of the
// seasonal naive forecast with period m. Throws MetricError when the
// scale is zero or the in-sample series is not longer than m.
double mase(std::span<const double> actual, std::span<const double> forecast, std::span<const double> insample,
            std::size_t m);

// (2/h) sum |y - yhat| / (|y| + |yhat|), bounded by 2. Throws MetricError
// on a step where both values are zero.
double smape(std::span<const double> actual, std::span<const double> forecast);

struct CVConfig {
    std::size_t starting_window = 0;
    std::size_t ending_window = 0;
    std::size_t horizon = 7;
    std::size_t step = 7;

    // starting <= ending <= length - horizon, step >= 1. Throws ConfigError.
    void validate(std::size_t length) const;

    // Training lengths of every fold: starting, starting + step, ... while
    // <= ending. A fold is kept only if a full horizon of test data follows.
    std::vector<std::size_t> fold_train_lengths(std::size_t length) const;
};

// Produces `h` forecasts from a training prefix. Exogenous rows cover the
// prefix and the h steps after it.
using CVForecaster = std::function<Vector(std::span<const double> train, const Matrix &exog, std::size_t h)>;
using Metric =
    std::function<double(std::span<const double> actual, std::span<const double> forecast, std::span<const double> insample)>;

struct CVResult {
    double mean = 0.0;
    std::vector<double> fold_scores;
    std::vector<std::size_t> fold_train_lengths; // of the folds that scored
    Warnings warnings;
};

// Folds whose model or metric throws an hts::Error are skipped with a
// warning; if every fold fails a NumericError is thrown.
CVResult expanding_window_cv(std::span<const double> y, const Matrix &exog, const CVForecaster &forecaster,
                             const CVConfig &cfg, const Metric &metric);

struct FriedmanResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<double> mean_ranks;
    std::size_t series = 0;
    std::size_t methods = 0;
};

// errors: N series x k methods, lower is better. Chi-square approximation
// with k - 1 degrees of freedom; ties receive average ranks.
FriedmanResult friedman_test(const Matrix &errors);

struct NemenyiResult {
    std::vector<double> mean_ranks;
    double q_alpha = 0.0;
    double critical_distance = 0.0;
    double alpha = 0.05;
    std::vector<std::pair<double, double>> intervals; // mean rank -+ CD/2
    std::vector<std::size_t> order;                   // methods by ascending mean rank
    bool friedman_rejected = false;
    double friedman_p_value = 1.0;

    // Significantly different iff the rank intervals do not overlap.
    bool different(std::size_t a, std::size_t b) const;
};

NemenyiResult nemenyi_test(const Matrix &errors, double alpha = 0.05);

// Per-series accuracy of several methods on one held-out period.
struct EvalReport {
    std::vector<std::string> methods;
    std::vector<std::string> node_ids;
    std::vector<int> levels;
    Matrix mase;  // M x k, NaN where undefined
    Matrix smape; // M x k, NaN where undefined; empty when not requested
    std::vector<std::string> flags; // per series, empty when all metrics defined
    std::size_t season = 1;

    std::optional<FriedmanResult> friedman;
    std::optional<NemenyiResult> nemenyi;
    Warnings warnings;

    bool has_smape() const { return smape.size() > 0; }

    std::string to_json() const;
    // One row per series and metric, one column per method, followed by
    // per-level averages.
    std::string to_csv() const;
};

// actual_test: H x M held-out observations aligned with every forecast set;
// insample: training observations (T x M) for the MASE scale.
EvalReport build_report(const Hierarchy &h, const Matrix &actual_test, const Matrix &insample,
                        const std::vector<ForecastSet> &forecasts, std::size_t season, bool with_smape);

// Friedman + Nemenyi on MASE over series where every method is defined.
// Throws ConfigError with fewer than two methods or two usable series.
void add_rank_tests(EvalReport &report, double alpha = 0.05);

struct LevelAverage {
    int level = 0;
    std::string method;
    double mase = 0.0;
    std::optional<double> smape;
    std::size_t series = 0;   // series that entered the MASE mean
    std::size_t excluded = 0; // flagged series left out
};

// Mean per level and method over the series whose metric is defined.
std::vector<LevelAverage> level_averages(const EvalReport &report, const Hierarchy &h);

} // namespace hts
