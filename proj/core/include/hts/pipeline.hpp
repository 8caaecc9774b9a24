#pragma once

#include "hts/evaluate.hpp"
#include "hts/forecast_set.hpp"
#include "hts/forecasters.hpp"
#include "hts/hierarchy.hpp"
#include "hts/nnd.hpp"
#include "hts/reconcile.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hts {

// Everything a train/test run needs. The last `test_size` rows (or the rows
// from `test_start` on) are held out and forecast from rolling origins
// every `horizon` steps, with model parameters fixed on the training rows
// and actual history revealed as the origin advances.
struct RunConfig {
    std::size_t test_size = 0;
    std::optional<std::string> test_start;
    std::size_t horizon = 7;

    // Expanding-window CV on the training rows; zero start/end pick
    // train/2 and train - horizon.
    std::size_t cv_start = 0;
    std::size_t cv_end = 0;
    std::size_t cv_step = 7;

    std::vector<ModelKind> candidates{ModelKind::Naive, ModelKind::SeasonalNaive, ModelKind::ARX, ModelKind::ETS};
    ForecasterConfig forecaster;

    std::vector<ReconMethod> recon{ReconMethod::BU, ReconMethod::AHP, ReconMethod::PHA,
                                   ReconMethod::FP, ReconMethod::MO,  ReconMethod::MINT};
    int middle_level = 1;
    std::string mo_shares = "fp"; // fp | ahp | pha

    std::vector<NndStrategy> nnd{NndStrategy::NND1, NndStrategy::NND2};
    NndConfig nnd_config;

    bool smape = false;
    double significance = 0.05;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;

    // Pushes seed and jobs into the component configs.
    void propagate();
};

std::size_t resolve_train_rows(const SeriesPanel &panel, const RunConfig &cfg);
CVConfig resolve_cv(const RunConfig &cfg, std::size_t train_rows);

ForecastSet make_forecast_set(const std::string &method, const Hierarchy &h, const SeriesPanel &panel,
                              std::size_t first_row, const Matrix &values);

// Forecasts rows [train_rows, train_rows + test_rows) in blocks of h, each
// from the actual history before the block.
Matrix rolling_forecast(const ForecastModel &model, std::span<const double> y, const Matrix &exog,
                        std::size_t train_rows, std::size_t test_rows, std::size_t h);

struct BaseResult {
    std::size_t train_rows = 0;
    std::vector<std::size_t> nodes;          // fitted nodes
    std::vector<ModelSelection> selections;  // aligned with nodes
    Matrix test_forecasts;                   // test x M; NaN for nodes not fitted
    Matrix residuals;                        // in-sample one-step errors, rows from residual_start
    std::size_t residual_start = 0;
    Warnings warnings;
};

// F* per node (all nodes when `nodes` is empty). Nodes whose every
// candidate fails fall back to the naive forecast with a warning.
BaseResult fit_base(const Hierarchy &h, const SeriesPanel &panel, const RunConfig &cfg,
                    std::vector<std::size_t> nodes = {});

// BU, AHP, PHA, FP, MO and MINT on the held-out rows, in that order.
std::vector<ForecastSet> reconcile_all(const Hierarchy &h, const SummingMatrix &S, const SeriesPanel &panel,
                                       const BaseResult &base, const RunConfig &cfg, Warnings &warnings);

struct NndRun {
    NndStrategy strategy = NndStrategy::NND2;
    NndEnsemble ensemble;
    ForecastSet forecasts;
    double raw_gap = 0.0;
    double raw_scale = 0.0;

    double raw_coherence() const { return raw_scale > 0.0 ? raw_gap / raw_scale : 0.0; }
};

// Trains on the training rows and disaggregates the base forecasts of the
// starting level (root, or cfg.middle_level for middle-out).
NndRun run_nnd(const Hierarchy &h, const SummingMatrix &S, const SeriesPanel &panel, const BaseResult &base,
               NndStrategy strategy, const RunConfig &cfg);

// Nodes whose base forecasts the requested NND strategies consume.
std::vector<std::size_t> nnd_start_nodes(const Hierarchy &h, const RunConfig &cfg);

// Held-out actuals and training rows for scoring.
EvalReport evaluate_sets(const Hierarchy &h, const SeriesPanel &panel, std::size_t train_rows,
                         const std::vector<ForecastSet> &sets, const RunConfig &cfg);

} // namespace hts
