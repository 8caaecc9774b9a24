#pragma once

#include "hts/evaluate.hpp"
#include "hts/neuralnet.hpp"
#include "hts/types.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hts {

// Declaration order is the tie-break order of model selection.
enum class ModelKind { Naive, SeasonalNaive, ARX, ETS, NARX, CombMean, CombCLS };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
// Comma list such as "naive,snaive,arx,ets".
std::vector<ModelKind> parse_model_list(std::string_view list);

// Throws DataError on an empty series. h = 0 gives an empty vector.
Vector forecast_naive(std::span<const double> y, std::size_t h);
// Value at T+i repeats y_{T+i-m}. Needs len(y) >= m.
Vector forecast_seasonal_naive(std::span<const double> y, std::size_t m, std::size_t h);

// ------------------------------------------------------------------ ARX

// y_t = c + sum_i phi_i y_{t-i} + beta' x_t, fitted by least squares.
// With `difference` the regression runs on first differences of y and x.
struct ArxModel {
    std::size_t p = 0;
    bool difference = false;
    std::size_t exog_dim = 0;                // columns expected in exog
    std::vector<std::size_t> exog_columns;   // columns that enter the regression
    Vector coef; // [c, phi_1..phi_p, beta for each used column]
    double sse = 0.0;
    std::size_t n_eff = 0;
    double aic = 0.0;

    double intercept() const { return coef(0); }
    double lag(std::size_t i) const { return coef(static_cast<Index>(i)); } // 1-based
    double exog_coef(std::size_t j) const { return coef(static_cast<Index>(1 + p + j)); }

    // Recursive forecast after `history`; exog rows cover history + h.
    Vector forecast(std::span<const double> history, const Matrix &exog, std::size_t h) const;
    // One-step predictions for t in [start, n); start must leave p (+1) lags.
    Vector fitted_one_step(std::span<const double> y, const Matrix &exog, std::size_t start) const;
};

// Regresses on rows t = first..n-1 where first = p (+1 when differencing),
// or `first` if given and larger. Every exog column is used unless
// `columns` selects a subset. Throws FitError when the sample is too short
// or the design matrix is rank deficient.
ArxModel fit_arx(std::span<const double> y, const Matrix &exog, std::size_t p, bool difference = false,
                 std::size_t first = 0, const std::optional<std::vector<std::size_t>> &columns = std::nullopt);

// Lag-1 autocorrelation above 0.95 switches on differencing; p in 1..max_p
// is chosen by AIC on a common estimation sample. Exog columns that are
// constant over the sample carry no information and are left out.
ArxModel fit_arx_auto(std::span<const double> y, const Matrix &exog, std::size_t max_p);

double lag1_autocorrelation(std::span<const double> y);

// ------------------------------------------------------------------ ETS

enum class EtsVariant { SES, Holt, HoltWinters };

std::string_view to_string(EtsVariant v);

struct EtsModel {
    EtsVariant variant = EtsVariant::SES;
    double alpha = 0.0, beta = 0.0, gamma = 0.0;
    std::size_t season = 1;
    double sse = 0.0;
    std::size_t n = 0;
    double aic = 0.0;

    struct State {
        double level = 0.0;
        double trend = 0.0;
        std::vector<double> seasonal; // indexed by t mod season
        std::size_t t = 0;            // observations consumed
    };

    // Runs the recursions over y; `predictions`, if given, receives the
    // one-step prediction of every observation from the first one predicted.
    State filter(std::span<const double> y, std::vector<double> *predictions = nullptr) const;
    Vector forecast(std::span<const double> history, std::size_t h) const;
    Vector forecast(const State &state, std::size_t h) const;
    Vector fitted_one_step(std::span<const double> y, std::size_t start) const;
    // Index of the first observation with a one-step prediction.
    std::size_t first_predicted() const;
};

// Smoothing parameters from `grid` (default 0.1, 0.2, ..., 1.0) minimising
// the in-sample one-step SSE; ties keep the first grid point.
// Throws FitError when the series is too short for the variant.
EtsModel fit_ets(std::span<const double> y, EtsVariant variant, std::size_t season,
                 const std::vector<double> &grid = {});
// SES, Holt and (if len >= 2 m) Holt-Winters, best by AIC.
EtsModel fit_ets_auto(std::span<const double> y, std::size_t season);

// ------------------------------------------------------------------ NAR(X)

struct NarConfig {
    std::size_t lags = 7;
    std::size_t units = 16;
    std::size_t layers = 1;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
};

// MLP over (y_{t-1..t-p}, x_t) with a scalar output, trained with the
// neuralnet engine. No exogenous columns gives a plain NAR.
struct NarModel {
    std::size_t p = 0;
    std::size_t exog_dim = 0;
    nn::TrainedNetwork net;

    Vector forecast(std::span<const double> history, const Matrix &exog, std::size_t h) const;
};

NarModel fit_nar(std::span<const double> y, const Matrix &exog, const NarConfig &cfg);

// ------------------------------------------------------------------ combinations

// Pointwise mean. Throws ConfigError on an empty list, DataError when
// horizons differ.
Vector combine_mean(const std::vector<Vector> &members);

struct ClsFit {
    Vector weights;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool degenerate = false;
};

// Euclidean projection onto the probability simplex (sort based).
Vector project_to_simplex(const Vector &v);

// sum_t (y_t - sum_i w_i f_{t,i})^2
double cls_objective(const Matrix &members, std::span<const double> actual, const Vector &weights);

// Weights on the simplex minimising cls_objective. members: T x k forecasts
// over a held-out window. Identical members give uniform weights.
ClsFit combine_cls(const Matrix &members, std::span<const double> actual);

// ------------------------------------------------------------------ model interface

struct ForecasterConfig {
    std::size_t season = 7;
    std::size_t arx_max_lag = 14;
    bool arx_exog = true;
    NarConfig nar;
    std::size_t cls_holdout_folds = 4;
    std::size_t cls_horizon = 7;
    std::uint64_t seed = 0;
};

// A fitted model. Parameters are fixed at fit time; forecasts may start
// from any history that extends the fitting sample.
class ForecastModel {
public:
    virtual ~ForecastModel() = default;

    virtual ModelKind kind() const = 0;
    virtual std::string describe() const = 0;

    // exog rows must cover history + h (may have zero columns).
    virtual Vector forecast(std::span<const double> history, const Matrix &exog, std::size_t h) const = 0;

    // One-step-ahead predictions for t in [start, n).
    virtual Vector fitted_one_step(std::span<const double> y, const Matrix &exog, std::size_t start) const;
};

using ModelPtr = std::shared_ptr<const ForecastModel>;

// Fits a model of the given kind on y (and exog rows 0..n-1). ARX that
// cannot be fitted falls back to a naive forecast and says so in describe().
ModelPtr fit_model(ModelKind kind, std::span<const double> y, const Matrix &exog, const ForecasterConfig &cfg);

struct ModelSelection {
    ModelPtr model;
    std::vector<ModelKind> candidates;
    std::vector<std::optional<double>> cv_mase; // per candidate; empty when it failed
    Warnings warnings;

    ModelKind kind() const { return model->kind(); }
};

// Expanding-window CV with mean MASE (period cfg.season); lowest wins,
// ties go to the earlier kind. The winner is refitted on the whole series.
// Throws FitError when every candidate fails.
ModelSelection select_model(std::span<const double> y, const Matrix &exog, const std::vector<ModelKind> &candidates,
                            const CVConfig &cv, const ForecasterConfig &cfg);

} // namespace hts
