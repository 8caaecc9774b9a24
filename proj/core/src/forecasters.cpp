#include "hts/forecasters.hpp"

#include "hts/error.hpp"
#include "hts/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace hts {

namespace {

constexpr std::array<std::pair<ModelKind, std::string_view>, 7> kModelNames{{
    {ModelKind::Naive, "naive"},
    {ModelKind::SeasonalNaive, "snaive"},
    {ModelKind::ARX, "arx"},
    {ModelKind::ETS, "ets"},
    {ModelKind::NARX, "narx"},
    {ModelKind::CombMean, "comb_mean"},
    {ModelKind::CombCLS, "comb_cls"},
}};

double log_mse(double sse, std::size_t n) {
    return std::log(std::max(sse / static_cast<double>(n), 1e-300));
}

void check_exog_rows(const Matrix &exog, std::size_t dim, std::size_t rows, const char *who) {
    if (static_cast<std::size_t>(exog.cols()) != dim) {
        throw DataError(std::string(who) + ": expected " + std::to_string(dim) + " exogenous columns, got " +
                        std::to_string(exog.cols()));
    }
    if (dim > 0 && static_cast<std::size_t>(exog.rows()) < rows) {
        throw DataError(std::string(who) + ": exogenous values end before the forecast horizon");
    }
}

} // namespace

std::string_view to_string(ModelKind kind) {
    for (const auto &[k, name] : kModelNames) {
        if (k == kind) {
            return name;
        }
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    for (const auto &[k, n] : kModelNames) {
        if (n == name) {
            return k;
        }
    }
    throw ConfigError("unknown forecasting model '" + std::string(name) +
                      "' (expected naive, snaive, arx, ets, narx, comb_mean or comb_cls)");
}

std::vector<ModelKind> parse_model_list(std::string_view list) {
    std::vector<ModelKind> out;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        const auto comma = std::min(list.find(',', pos), list.size());
        auto item = list.substr(pos, comma - pos);
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
        if (!item.empty()) {
            const auto kind = parse_model_kind(item);
            if (std::find(out.begin(), out.end(), kind) == out.end()) {
                out.push_back(kind);
            }
        }
        pos = comma + 1;
    }
    if (out.empty()) {
        throw ConfigError("empty model list");
    }
    std::sort(out.begin(), out.end());
    return out;
}

Vector forecast_naive(std::span<const double> y, std::size_t h) {
    if (y.empty()) {
        throw DataError("naive forecast of an empty series");
    }
    return Vector::Constant(static_cast<Index>(h), y.back());
}

Vector forecast_seasonal_naive(std::span<const double> y, std::size_t m, std::size_t h) {
    if (m == 0) {
        throw ConfigError("seasonal period must be positive");
    }
    if (y.size() < m) {
        throw DataError("seasonal naive needs at least one full season of history");
    }
    Vector out(static_cast<Index>(h));
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < h; ++i) {
        // T + 1 + i - m * ceil((i + 1) / m), zero-based
        const std::size_t back = m * ((i / m) + 1);
        out(static_cast<Index>(i)) = y[n + i - back];
    }
    return out;
}

// ------------------------------------------------------------------ ARX

double lag1_autocorrelation(std::span<const double> y) {
    if (y.size() < 2) {
        return 0.0;
    }
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        const double d = y[t] - mean;
        den += d * d;
        if (t > 0) {
            num += d * (y[t - 1] - mean);
        }
    }
    return den > 0.0 ? num / den : 0.0;
}

namespace {

// Value of the regression target and regressors at time t.
struct ArxSeries {
    std::span<const double> y;
    const Matrix *exog;
    bool diff;

    double target(std::size_t t) const { return diff ? y[t] - y[t - 1] : y[t]; }
    double x(std::size_t t, std::size_t col) const {
        const auto c = static_cast<Index>(col);
        return diff ? (*exog)(static_cast<Index>(t), c) - (*exog)(static_cast<Index>(t - 1), c)
                    : (*exog)(static_cast<Index>(t), c);
    }
};

} // namespace

ArxModel fit_arx(std::span<const double> y, const Matrix &exog, std::size_t p, bool difference, std::size_t first,
                 const std::optional<std::vector<std::size_t>> &columns) {
    const std::size_t n = y.size();
    ArxModel model;
    model.p = p;
    model.difference = difference;
    model.exog_dim = static_cast<std::size_t>(exog.cols());
    if (columns) {
        model.exog_columns = *columns;
    } else {
        model.exog_columns.resize(model.exog_dim);
        std::iota(model.exog_columns.begin(), model.exog_columns.end(), 0);
    }
    if (model.exog_dim > 0 && static_cast<std::size_t>(exog.rows()) < n) {
        throw DataError("arx: exogenous rows do not cover the series");
    }
    const std::size_t d = model.exog_columns.size();
    const std::size_t k = 1 + p + d;
    first = std::max(first, p + (difference ? 1 : 0));
    if (n <= first || n - first < k + 1) {
        throw FitError("arx: series of length " + std::to_string(n) + " is too short for " + std::to_string(p) +
                       " lags and " + std::to_string(d) + " regressors");
    }
    const std::size_t rows = n - first;
    const ArxSeries s{y, &exog, difference};
    Matrix A(static_cast<Index>(rows), static_cast<Index>(k));
    Vector b(static_cast<Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = first + r;
        const auto ri = static_cast<Index>(r);
        A(ri, 0) = 1.0;
        for (std::size_t i = 1; i <= p; ++i) {
            A(ri, static_cast<Index>(i)) = s.target(t - i);
        }
        for (std::size_t j = 0; j < d; ++j) {
            A(ri, static_cast<Index>(1 + p + j)) = s.x(t, model.exog_columns[j]);
        }
        b(ri) = s.target(t);
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
    if (static_cast<std::size_t>(cod.rank()) < k) {
        throw FitError("arx: rank-deficient design matrix (rank " + std::to_string(cod.rank()) + " of " +
                       std::to_string(k) + ")");
    }
    model.coef = cod.solve(b);
    if (!model.coef.allFinite()) {
        throw FitError("arx: non-finite coefficients");
    }
    model.sse = (A * model.coef - b).squaredNorm();
    model.n_eff = rows;
    model.aic = static_cast<double>(rows) * log_mse(model.sse, rows) + 2.0 * static_cast<double>(k);
    return model;
}

ArxModel fit_arx_auto(std::span<const double> y, const Matrix &exog, std::size_t max_p) {
    if (max_p == 0) {
        throw ConfigError("arx: maximum lag order must be at least 1");
    }
    const std::size_t n = y.size();
    if (exog.cols() > 0 && static_cast<std::size_t>(exog.rows()) < n) {
        throw DataError("arx: exogenous rows do not cover the series");
    }
    std::vector<std::size_t> cols;
    for (Index j = 0; j < exog.cols(); ++j) {
        const auto col = exog.col(j).head(static_cast<Index>(n));
        if (n > 0 && col.maxCoeff() - col.minCoeff() > 1e-12 * (1.0 + col.cwiseAbs().maxCoeff())) {
            cols.push_back(static_cast<std::size_t>(j));
        }
    }
    const bool diff = lag1_autocorrelation(y) > 0.95;
    // Keep the common sample long enough for the largest usable order.
    std::size_t top = max_p;
    while (top > 1 && n < 2 * (top + cols.size() + 2) + (diff ? 1 : 0)) {
        --top;
    }
    const std::size_t first = top + (diff ? 1 : 0);
    std::optional<ArxModel> best;
    std::string last_error;
    for (std::size_t p = 1; p <= top; ++p) {
        try {
            auto m = fit_arx(y, exog, p, diff, first, cols);
            if (!best || m.aic < best->aic) {
                best = std::move(m);
            }
        } catch (const FitError &e) {
            last_error = e.what();
        }
    }
    if (!best) {
        throw FitError(last_error.empty() ? "arx: no lag order could be fitted" : last_error);
    }
    try {
        return fit_arx(y, exog, best->p, diff, 0, cols);
    } catch (const FitError &) {
        return *best;
    }
}

Vector ArxModel::forecast(std::span<const double> history, const Matrix &exog, std::size_t h) const {
    const std::size_t n = history.size();
    if (n < p + (difference ? 1 : 0) || n == 0) {
        throw DataError("arx: history shorter than the lag order");
    }
    check_exog_rows(exog, exog_dim, n + h, "arx");
    std::vector<double> z; // target-scale values (levels or differences)
    z.reserve(n + h);
    if (difference) {
        z.push_back(0.0);
        for (std::size_t t = 1; t < n; ++t) {
            z.push_back(history[t] - history[t - 1]);
        }
    } else {
        z.assign(history.begin(), history.end());
    }
    Vector out(static_cast<Index>(h));
    double level = history.back();
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t t = n + i;
        double v = coef(0);
        for (std::size_t j = 1; j <= p; ++j) {
            v += coef(static_cast<Index>(j)) * z[t - j];
        }
        for (std::size_t j = 0; j < exog_columns.size(); ++j) {
            const auto c = static_cast<Index>(exog_columns[j]);
            const double x = difference ? exog(static_cast<Index>(t), c) - exog(static_cast<Index>(t - 1), c)
                                        : exog(static_cast<Index>(t), c);
            v += coef(static_cast<Index>(1 + p + j)) * x;
        }
        z.push_back(v);
        if (difference) {
            level += v;
            out(static_cast<Index>(i)) = level;
        } else {
            out(static_cast<Index>(i)) = v;
        }
    }
    return out;
}

Vector ArxModel::fitted_one_step(std::span<const double> y, const Matrix &exog, std::size_t start) const {
    const std::size_t n = y.size();
    const std::size_t need = p + (difference ? 1 : 0);
    if (start < need || start > n) {
        throw DataError("arx: one-step predictions need " + std::to_string(need) + " earlier observations");
    }
    check_exog_rows(exog, exog_dim, n, "arx");
    const ArxSeries s{y, &exog, difference};
    Vector out(static_cast<Index>(n - start));
    for (std::size_t t = start; t < n; ++t) {
        double v = coef(0);
        for (std::size_t j = 1; j <= p; ++j) {
            v += coef(static_cast<Index>(j)) * s.target(t - j);
        }
        for (std::size_t j = 0; j < exog_columns.size(); ++j) {
            v += coef(static_cast<Index>(1 + p + j)) * s.x(t, exog_columns[j]);
        }
        out(static_cast<Index>(t - start)) = difference ? y[t - 1] + v : v;
    }
    return out;
}

// ------------------------------------------------------------------ ETS

std::string_view to_string(EtsVariant v) {
    switch (v) {
    case EtsVariant::SES: return "ses";
    case EtsVariant::Holt: return "holt";
    case EtsVariant::HoltWinters: return "holt_winters";
    }
    return "unknown";
}

std::size_t EtsModel::first_predicted() const {
    return variant == EtsVariant::HoltWinters ? season : 1;
}

namespace {

std::size_t min_length(EtsVariant v, std::size_t m) {
    switch (v) {
    case EtsVariant::SES: return 2;
    case EtsVariant::Holt: return 3;
    case EtsVariant::HoltWinters: return 2 * m;
    }
    return 2;
}

struct EtsInit {
    double level, trend;
    std::vector<double> seasonal;
    std::size_t start;
};

EtsInit initial_state(EtsVariant v, std::span<const double> y, std::size_t m) {
    switch (v) {
    case EtsVariant::SES: return {y[0], 0.0, {}, 1};
    case EtsVariant::Holt: return {y[0], y[1] - y[0], {}, 1};
    case EtsVariant::HoltWinters: {
        double first = 0.0, second = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            first += y[i];
            second += y[m + i];
        }
        first /= static_cast<double>(m);
        second /= static_cast<double>(m);
        const double trend = (second - first) / static_cast<double>(m);
        const double centre = (static_cast<double>(m) - 1.0) / 2.0;
        std::vector<double> seasonal(m);
        for (std::size_t i = 0; i < m; ++i) {
            seasonal[i] = y[i] - (first + trend * (static_cast<double>(i) - centre));
        }
        // level at time m - 1
        return {first + trend * centre, trend, std::move(seasonal), m};
    }
    }
    return {y[0], 0.0, {}, 1};
}

// One-step SSE of a parameter triple; `seasonal` is scratch.
double ets_sse(EtsVariant v, std::span<const double> y, std::size_t m, const EtsInit &init, double a, double b,
               double g, std::vector<double> &seasonal) {
    double level = init.level, trend = init.trend, sse = 0.0;
    const std::size_t n = y.size();
    switch (v) {
    case EtsVariant::SES:
        for (std::size_t t = init.start; t < n; ++t) {
            const double e = y[t] - level;
            sse += e * e;
            level += a * e;
        }
        break;
    case EtsVariant::Holt:
        for (std::size_t t = init.start; t < n; ++t) {
            const double pred = level + trend;
            const double e = y[t] - pred;
            sse += e * e;
            const double nl = pred + a * e;
            trend = b * (nl - level) + (1.0 - b) * trend;
            level = nl;
        }
        break;
    case EtsVariant::HoltWinters: {
        seasonal = init.seasonal;
        std::size_t phase = init.start % m;
        for (std::size_t t = init.start; t < n; ++t) {
            const double s = seasonal[phase];
            const double e = y[t] - (level + trend + s);
            sse += e * e;
            const double nl = a * (y[t] - s) + (1.0 - a) * (level + trend);
            trend = b * (nl - level) + (1.0 - b) * trend;
            seasonal[phase] = g * (y[t] - nl) + (1.0 - g) * s;
            level = nl;
            if (++phase == m) phase = 0;
        }
        break;
    }
    }
    return sse;
}

std::size_t ets_parameter_count(EtsVariant v, std::size_t m) {
    switch (v) {
    case EtsVariant::SES: return 2;
    case EtsVariant::Holt: return 4;
    case EtsVariant::HoltWinters: return 3 + 2 + (m - 1);
    }
    return 2;
}

} // namespace

EtsModel::State EtsModel::filter(std::span<const double> y, std::vector<double> *predictions) const {
    if (y.size() < min_length(variant, season)) {
        throw DataError("ets: history too short for " + std::string(to_string(variant)));
    }
    const auto init = initial_state(variant, y, season);
    State st{init.level, init.trend, init.seasonal, y.size()};
    for (std::size_t t = init.start; t < y.size(); ++t) {
        switch (variant) {
        case EtsVariant::SES:
            if (predictions) predictions->push_back(st.level);
            st.level += alpha * (y[t] - st.level);
            break;
        case EtsVariant::Holt: {
            const double pred = st.level + st.trend;
            if (predictions) predictions->push_back(pred);
            const double nl = pred + alpha * (y[t] - pred);
            st.trend = beta * (nl - st.level) + (1.0 - beta) * st.trend;
            st.level = nl;
            break;
        }
        case EtsVariant::HoltWinters: {
            const std::size_t phase = t % season;
            const double s = st.seasonal[phase];
            if (predictions) predictions->push_back(st.level + st.trend + s);
            const double nl = alpha * (y[t] - s) + (1.0 - alpha) * (st.level + st.trend);
            st.trend = beta * (nl - st.level) + (1.0 - beta) * st.trend;
            st.seasonal[phase] = gamma * (y[t] - nl) + (1.0 - gamma) * s;
            st.level = nl;
            break;
        }
        }
    }
    return st;
}

Vector EtsModel::forecast(const State &st, std::size_t h) const {
    Vector out(static_cast<Index>(h));
    for (std::size_t i = 1; i <= h; ++i) {
        double v = st.level;
        if (variant != EtsVariant::SES) {
            v += static_cast<double>(i) * st.trend;
        }
        if (variant == EtsVariant::HoltWinters) {
            v += st.seasonal[(st.t - 1 + i) % season];
        }
        out(static_cast<Index>(i - 1)) = v;
    }
    return out;
}

Vector EtsModel::forecast(std::span<const double> history, std::size_t h) const {
    return forecast(filter(history), h);
}

Vector EtsModel::fitted_one_step(std::span<const double> y, std::size_t start) const {
    if (start == 0 || start > y.size()) {
        throw DataError("ets: one-step predictions start after the first observation");
    }
    std::vector<double> pred;
    filter(y, &pred);
    const std::size_t first = first_predicted();
    Vector out(static_cast<Index>(y.size() - start));
    for (std::size_t t = start; t < y.size(); ++t) {
        out(static_cast<Index>(t - start)) = t >= first ? pred[t - first] : y[t - 1];
    }
    return out;
}

EtsModel fit_ets(std::span<const double> y, EtsVariant variant, std::size_t season, const std::vector<double> &grid) {
    if (variant == EtsVariant::HoltWinters && season < 2) {
        throw ConfigError("ets: Holt-Winters needs a seasonal period of at least 2");
    }
    if (y.size() < min_length(variant, season)) {
        throw FitError("ets: series of length " + std::to_string(y.size()) + " is too short for " +
                       std::string(to_string(variant)));
    }
    std::vector<double> g = grid;
    if (g.empty()) {
        for (int i = 1; i <= 10; ++i) {
            g.push_back(i / 10.0);
        }
    }
    for (double v : g) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ConfigError("ets: smoothing parameters must lie in [0, 1]");
        }
    }
    const auto init = initial_state(variant, y, season);
    const std::vector<double> zero{0.0};
    const auto &betas = variant == EtsVariant::SES ? zero : g;
    const auto &gammas = variant == EtsVariant::HoltWinters ? g : zero;
    std::vector<double> scratch;
    EtsModel best;
    best.variant = variant;
    best.season = variant == EtsVariant::HoltWinters ? season : 1;
    best.sse = std::numeric_limits<double>::infinity();
    for (double a : g) {
        for (double b : betas) {
            for (double c : gammas) {
                const double sse = ets_sse(variant, y, season, init, a, b, c, scratch);
                if (sse < best.sse) {
                    best.sse = sse;
                    best.alpha = a;
                    best.beta = b;
                    best.gamma = c;
                }
            }
        }
    }
    if (!std::isfinite(best.sse)) {
        throw FitError("ets: non-finite in-sample error");
    }
    best.n = y.size() - init.start;
    best.aic = static_cast<double>(best.n) * log_mse(best.sse, best.n) +
               2.0 * static_cast<double>(ets_parameter_count(variant, season));
    return best;
}

EtsModel fit_ets_auto(std::span<const double> y, std::size_t season) {
    std::vector<EtsVariant> variants{EtsVariant::SES, EtsVariant::Holt};
    if (season >= 2 && y.size() >= 2 * season) {
        variants.push_back(EtsVariant::HoltWinters);
    }
    // Compare on the observations every variant predicts.
    const std::size_t common = variants.back() == EtsVariant::HoltWinters ? season : 1;
    std::optional<EtsModel> best;
    double best_aic = 0.0;
    for (auto v : variants) {
        EtsModel m;
        try {
            m = fit_ets(y, v, season);
        } catch (const FitError &) {
            continue;
        }
        std::vector<double> pred;
        m.filter(y, &pred);
        const std::size_t first = m.first_predicted();
        double sse = 0.0;
        for (std::size_t t = std::max(common, first); t < y.size(); ++t) {
            const double e = y[t] - pred[t - first];
            sse += e * e;
        }
        const std::size_t n = y.size() - std::max(common, first);
        const double aic = static_cast<double>(n) * log_mse(sse, n) + 2.0 * static_cast<double>(ets_parameter_count(v, season));
        if (!best || aic < best_aic) {
            best = m;
            best_aic = aic;
        }
    }
    if (!best) {
        throw FitError("ets: series of length " + std::to_string(y.size()) + " is too short");
    }
    return *best;
}

// ------------------------------------------------------------------ NAR(X)

NarModel fit_nar(std::span<const double> y, const Matrix &exog, const NarConfig &cfg) {
    const std::size_t n = y.size();
    const std::size_t p = cfg.lags;
    const auto dx = static_cast<std::size_t>(exog.cols());
    if (p == 0 && dx == 0) {
        throw ConfigError("nar: needs at least one lag or regressor");
    }
    if (n < p + 2) {
        throw FitError("nar: series of length " + std::to_string(n) + " is too short for " + std::to_string(p) + " lags");
    }
    if (dx > 0 && static_cast<std::size_t>(exog.rows()) < n) {
        throw DataError("nar: exogenous rows do not cover the series");
    }
    const std::size_t rows = n - p;
    nn::Dataset data;
    data.exog.resize(static_cast<Index>(rows), static_cast<Index>(p + dx));
    data.windows.resize(static_cast<Index>(rows), 0);
    data.targets.resize(static_cast<Index>(rows), 1);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = p + r;
        const auto ri = static_cast<Index>(r);
        for (std::size_t i = 1; i <= p; ++i) {
            data.exog(ri, static_cast<Index>(i - 1)) = y[t - i];
        }
        for (std::size_t j = 0; j < dx; ++j) {
            data.exog(ri, static_cast<Index>(p + j)) = exog(static_cast<Index>(t), static_cast<Index>(j));
        }
        data.targets(ri, 0) = y[t];
    }
    nn::NetworkSpec spec;
    spec.exog_dim = p + dx;
    spec.hidden.assign(cfg.layers, cfg.units);
    spec.outputs = 1;
    nn::TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    tc.max_epochs = cfg.max_epochs;
    tc.patience = cfg.patience;
    tc.validation_fraction = cfg.validation_fraction;
    tc.seed = cfg.seed;
    NarModel model;
    model.p = p;
    model.exog_dim = dx;
    model.net = nn::train(spec, data, tc);
    return model;
}

Vector NarModel::forecast(std::span<const double> history, const Matrix &exog, std::size_t h) const {
    const std::size_t n = history.size();
    if (n < p) {
        throw DataError("nar: history shorter than the lag order");
    }
    check_exog_rows(exog, exog_dim, n + h, "nar");
    std::vector<double> vals(history.begin(), history.end());
    std::vector<double> x(p + exog_dim);
    Vector out(static_cast<Index>(h));
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t t = n + i;
        for (std::size_t j = 1; j <= p; ++j) {
            x[j - 1] = vals[t - j];
        }
        for (std::size_t j = 0; j < exog_dim; ++j) {
            x[p + j] = exog(static_cast<Index>(t), static_cast<Index>(j));
        }
        const double v = net.predict(x, {})(0);
        vals.push_back(v);
        out(static_cast<Index>(i)) = v;
    }
    return out;
}

// ------------------------------------------------------------------ combinations

Vector combine_mean(const std::vector<Vector> &members) {
    if (members.empty()) {
        throw ConfigError("combine_mean: no member forecasts");
    }
    Vector out = Vector::Zero(members.front().size());
    for (const auto &m : members) {
        if (m.size() != out.size()) {
            throw DataError("combine_mean: member horizons differ");
        }
        out += m;
    }
    return out / static_cast<double>(members.size());
}

Vector project_to_simplex(const Vector &v) {
    const Index k = v.size();
    if (k == 0) {
        return v;
    }
    std::vector<double> u(v.data(), v.data() + k);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0, theta = 0.0;
    for (Index j = 0; j < k; ++j) {
        cumulative += u[static_cast<std::size_t>(j)];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - t > 0.0) {
            theta = t;
        }
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

double cls_objective(const Matrix &members, std::span<const double> actual, const Vector &weights) {
    const Eigen::Map<const Vector> y(actual.data(), static_cast<Index>(actual.size()));
    return (y - members * weights).squaredNorm();
}

namespace {

// Minimiser of the quadratic restricted to an index subset with weights
// summing to one (no sign constraint); nullopt if the KKT system is singular.
std::optional<Vector> equality_constrained(const Matrix &Q, const Vector &c, const std::vector<Index> &support) {
    const auto s = static_cast<Index>(support.size());
    Matrix K = Matrix::Zero(s + 1, s + 1);
    Vector rhs(s + 1);
    for (Index i = 0; i < s; ++i) {
        for (Index j = 0; j < s; ++j) {
            K(i, j) = 2.0 * Q(support[i], support[j]);
        }
        K(i, s) = 1.0;
        K(s, i) = 1.0;
        rhs(i) = 2.0 * c(support[i]);
    }
    rhs(s) = 1.0;
    Eigen::FullPivLU<Matrix> lu(K);
    if (!lu.isInvertible()) {
        return std::nullopt;
    }
    const Vector sol = lu.solve(rhs);
    Vector w = Vector::Zero(Q.rows());
    for (Index i = 0; i < s; ++i) {
        w(support[i]) = sol(i);
    }
    return w;
}

} // namespace

ClsFit combine_cls(const Matrix &members, std::span<const double> actual) {
    const Index k = members.cols();
    if (k == 0) {
        throw ConfigError("combine_cls: no member forecasts");
    }
    if (static_cast<std::size_t>(members.rows()) != actual.size()) {
        throw DataError("combine_cls: forecasts and actuals differ in length");
    }
    ClsFit fit;
    const double tol = 1e-12 * (1.0 + members.cwiseAbs().maxCoeff());
    bool identical = true;
    for (Index j = 1; j < k && identical; ++j) {
        identical = (members.col(j) - members.col(0)).cwiseAbs().maxCoeff() <= tol;
    }
    if (identical) {
        fit.weights = Vector::Constant(k, 1.0 / static_cast<double>(k));
        fit.objective = cls_objective(members, actual, fit.weights);
        fit.degenerate = true;
        return fit;
    }

    const Eigen::Map<const Vector> y(actual.data(), static_cast<Index>(actual.size()));
    const Matrix Q = members.transpose() * members;
    const Vector c = members.transpose() * y;
    const double lipschitz = 2.0 * Eigen::SelfAdjointEigenSolver<Matrix>(Q, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();

    Vector w = Vector::Constant(k, 1.0 / static_cast<double>(k));
    if (lipschitz > 0.0) {
        for (; fit.iterations < 5000; ++fit.iterations) {
            const Vector grad = 2.0 * (Q * w - c);
            const Vector next = project_to_simplex(w - grad / lipschitz);
            const double step = (next - w).norm() * lipschitz;
            w = next;
            if (step < 1e-10) {
                break;
            }
        }
    }
    fit.objective = cls_objective(members, actual, w);

    // Projected gradient can crawl when members are nearly collinear. For the
    // handful of members used here the exact optimum is found by solving the
    // equality-constrained problem on every support and keeping feasible ones.
    if (k <= 10) {
        for (unsigned mask = 1; mask < (1u << k); ++mask) {
            std::vector<Index> support;
            for (Index i = 0; i < k; ++i) {
                if (mask & (1u << i)) support.push_back(i);
            }
            const auto cand = equality_constrained(Q, c, support);
            if (!cand || cand->minCoeff() < -1e-12) {
                continue;
            }
            const Vector v = project_to_simplex(cand->cwiseMax(0.0));
            const double obj = cls_objective(members, actual, v);
            if (obj < fit.objective - 1e-15 * (1.0 + fit.objective)) {
                fit.objective = obj;
                w = v;
            }
        }
    }
    fit.weights = w;
    return fit;
}

// ------------------------------------------------------------------ models

Vector ForecastModel::fitted_one_step(std::span<const double> y, const Matrix &exog, std::size_t start) const {
    if (start == 0 || start > y.size()) {
        throw DataError("one-step predictions start after the first observation");
    }
    Vector out(static_cast<Index>(y.size() - start));
    for (std::size_t t = start; t < y.size(); ++t) {
        out(static_cast<Index>(t - start)) = forecast(y.subspan(0, t), exog, 1)(0);
    }
    return out;
}

namespace {

Matrix exog_or_empty(const Matrix &exog, bool use, std::size_t rows) {
    if (use) {
        return exog;
    }
    return Matrix(static_cast<Index>(rows), 0);
}

class NaiveModel final : public ForecastModel {
public:
    ModelKind kind() const override { return ModelKind::Naive; }
    std::string describe() const override { return "naive"; }
    Vector forecast(std::span<const double> history, const Matrix &, std::size_t h) const override {
        return forecast_naive(history, h);
    }
    Vector fitted_one_step(std::span<const double> y, const Matrix &, std::size_t start) const override {
        if (start == 0 || start > y.size()) {
            throw DataError("one-step predictions start after the first observation");
        }
        Vector out(static_cast<Index>(y.size() - start));
        for (std::size_t t = start; t < y.size(); ++t) out(static_cast<Index>(t - start)) = y[t - 1];
        return out;
    }
};

class SeasonalNaiveModel final : public ForecastModel {
public:
    explicit SeasonalNaiveModel(std::size_t m) : m_(m) {}
    ModelKind kind() const override { return ModelKind::SeasonalNaive; }
    std::string describe() const override { return "snaive(m=" + std::to_string(m_) + ")"; }
    Vector forecast(std::span<const double> history, const Matrix &, std::size_t h) const override {
        return forecast_seasonal_naive(history, m_, h);
    }
    Vector fitted_one_step(std::span<const double> y, const Matrix &, std::size_t start) const override {
        if (start < m_ || start > y.size()) {
            throw DataError("seasonal naive one-step predictions need a full season of history");
        }
        Vector out(static_cast<Index>(y.size() - start));
        for (std::size_t t = start; t < y.size(); ++t) out(static_cast<Index>(t - start)) = y[t - m_];
        return out;
    }

private:
    std::size_t m_;
};

class ArxForecastModel final : public ForecastModel {
public:
    ArxForecastModel(std::optional<ArxModel> model, bool use_exog, std::string fallback)
        : model_(std::move(model)), use_exog_(use_exog), fallback_(std::move(fallback)) {}
    ModelKind kind() const override { return ModelKind::ARX; }
    std::string describe() const override {
        if (!model_) {
            return "arx fallback to naive: " + fallback_;
        }
        std::ostringstream out;
        out << "arx(p=" << model_->p << ", d=" << (model_->difference ? 1 : 0)
            << ", exog=" << model_->exog_columns.size() << ")";
        return out.str();
    }
    Vector forecast(std::span<const double> history, const Matrix &exog, std::size_t h) const override {
        if (!model_) {
            return forecast_naive(history, h);
        }
        return model_->forecast(history, exog_or_empty(exog, use_exog_, history.size() + h), h);
    }
    Vector fitted_one_step(std::span<const double> y, const Matrix &exog, std::size_t start) const override {
        if (!model_) {
            return NaiveModel().fitted_one_step(y, exog, start);
        }
        return model_->fitted_one_step(y, exog_or_empty(exog, use_exog_, y.size()), start);
    }
    const std::optional<ArxModel> &model() const { return model_; }

private:
    std::optional<ArxModel> model_;
    bool use_exog_;
    std::string fallback_;
};

class EtsForecastModel final : public ForecastModel {
public:
    explicit EtsForecastModel(EtsModel model) : model_(std::move(model)) {}
    ModelKind kind() const override { return ModelKind::ETS; }
    std::string describe() const override {
        std::ostringstream out;
        out << "ets(" << to_string(model_.variant) << ", alpha=" << model_.alpha;
        if (model_.variant != EtsVariant::SES) out << ", beta=" << model_.beta;
        if (model_.variant == EtsVariant::HoltWinters) out << ", gamma=" << model_.gamma;
        out << ")";
        return out.str();
    }
    Vector forecast(std::span<const double> history, const Matrix &, std::size_t h) const override {
        return model_.forecast(history, h);
    }
    Vector fitted_one_step(std::span<const double> y, const Matrix &, std::size_t start) const override {
        return model_.fitted_one_step(y, start);
    }

private:
    EtsModel model_;
};

class NarForecastModel final : public ForecastModel {
public:
    explicit NarForecastModel(NarModel model) : model_(std::move(model)) {}
    ModelKind kind() const override { return ModelKind::NARX; }
    std::string describe() const override {
        return "narx(p=" + std::to_string(model_.p) + ", exog=" + std::to_string(model_.exog_dim) + ")";
    }
    Vector forecast(std::span<const double> history, const Matrix &exog, std::size_t h) const override {
        return model_.forecast(history, exog, h);
    }

private:
    NarModel model_;
};

class CombinationModel final : public ForecastModel {
public:
    CombinationModel(ModelKind kind, std::vector<ModelPtr> members, Vector weights)
        : kind_(kind), members_(std::move(members)), weights_(std::move(weights)) {}
    ModelKind kind() const override { return kind_; }
    std::string describe() const override {
        std::ostringstream out;
        out << to_string(kind_) << "(";
        for (std::size_t i = 0; i < members_.size(); ++i) {
            out << (i ? ", " : "") << to_string(members_[i]->kind()) << "=" << weights_(static_cast<Index>(i));
        }
        out << ")";
        return out.str();
    }
    Vector forecast(std::span<const double> history, const Matrix &exog, std::size_t h) const override {
        Vector out = Vector::Zero(static_cast<Index>(h));
        for (std::size_t i = 0; i < members_.size(); ++i) {
            out += weights_(static_cast<Index>(i)) * members_[i]->forecast(history, exog, h);
        }
        return out;
    }
    Vector fitted_one_step(std::span<const double> y, const Matrix &exog, std::size_t start) const override {
        Vector out = Vector::Zero(static_cast<Index>(y.size() - std::min(start, y.size())));
        for (std::size_t i = 0; i < members_.size(); ++i) {
            out += weights_(static_cast<Index>(i)) * members_[i]->fitted_one_step(y, exog, start);
        }
        return out;
    }

private:
    ModelKind kind_;
    std::vector<ModelPtr> members_;
    Vector weights_;
};

constexpr std::array<ModelKind, 3> kCombinationMembers{ModelKind::ARX, ModelKind::NARX, ModelKind::ETS};

std::vector<ModelPtr> fit_members(std::span<const double> y, const Matrix &exog, const ForecasterConfig &cfg) {
    std::vector<ModelPtr> out;
    for (auto k : kCombinationMembers) {
        out.push_back(fit_model(k, y, exog, cfg));
    }
    return out;
}

} // namespace

ModelPtr fit_model(ModelKind kind, std::span<const double> y, const Matrix &exog, const ForecasterConfig &cfg) {
    if (y.empty()) {
        throw DataError("cannot fit a model to an empty series");
    }
    switch (kind) {
    case ModelKind::Naive: return std::make_shared<NaiveModel>();
    case ModelKind::SeasonalNaive:
        if (y.size() < cfg.season) {
            throw FitError("seasonal naive needs at least one full season of history");
        }
        return std::make_shared<SeasonalNaiveModel>(cfg.season);
    case ModelKind::ARX: {
        const Matrix x = exog_or_empty(exog, cfg.arx_exog, y.size());
        try {
            return std::make_shared<ArxForecastModel>(fit_arx_auto(y, x, cfg.arx_max_lag), cfg.arx_exog, "");
        } catch (const FitError &e) {
            return std::make_shared<ArxForecastModel>(std::nullopt, cfg.arx_exog, e.what());
        }
    }
    case ModelKind::ETS: return std::make_shared<EtsForecastModel>(fit_ets_auto(y, cfg.season));
    case ModelKind::NARX: {
        NarConfig nc = cfg.nar;
        nc.seed = derive_seed(cfg.seed, "narx");
        return std::make_shared<NarForecastModel>(fit_nar(y, exog, nc));
    }
    case ModelKind::CombMean: {
        auto members = fit_members(y, exog, cfg);
        const auto k = static_cast<Index>(members.size());
        return std::make_shared<CombinationModel>(kind, std::move(members),
                                                  Vector::Constant(k, 1.0 / static_cast<double>(k)));
    }
    case ModelKind::CombCLS: {
        const std::size_t hc = cfg.cls_horizon;
        const std::size_t folds = cfg.cls_holdout_folds;
        if (hc == 0 || folds == 0) {
            throw ConfigError("comb_cls needs a positive holdout horizon and fold count");
        }
        std::vector<Vector> rows;
        std::vector<double> actual;
        for (std::size_t j = folds; j >= 1; --j) {
            if (y.size() <= j * hc + 2 * cfg.season) {
                continue;
            }
            const std::size_t n = y.size() - j * hc;
            try {
                const auto prefix = y.subspan(0, n);
                const auto members = fit_members(prefix, exog, cfg);
                std::vector<Vector> fc;
                for (const auto &m : members) fc.push_back(m->forecast(prefix, exog, hc));
                for (std::size_t i = 0; i < hc; ++i) {
                    Vector r(static_cast<Index>(fc.size()));
                    for (std::size_t c = 0; c < fc.size(); ++c) r(static_cast<Index>(c)) = fc[c](static_cast<Index>(i));
                    rows.push_back(r);
                    actual.push_back(y[n + i]);
                }
            } catch (const Error &) {
                // a failed holdout fold only shrinks the meta-training window
            }
        }
        if (rows.empty()) {
            throw FitError("comb_cls: no holdout fold could be forecast");
        }
        Matrix F(static_cast<Index>(rows.size()), rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) F.row(static_cast<Index>(r)) = rows[r].transpose();
        const auto cls = combine_cls(F, actual);
        return std::make_shared<CombinationModel>(kind, fit_members(y, exog, cfg), cls.weights);
    }
    }
    throw ConfigError("unknown model kind");
}

ModelSelection select_model(std::span<const double> y, const Matrix &exog, const std::vector<ModelKind> &candidates,
                            const CVConfig &cv, const ForecasterConfig &cfg) {
    if (candidates.empty()) {
        throw ConfigError("no candidate models");
    }
    cv.validate(y.size());
    ModelSelection sel;
    sel.candidates = candidates;
    std::sort(sel.candidates.begin(), sel.candidates.end());
    sel.candidates.erase(std::unique(sel.candidates.begin(), sel.candidates.end()), sel.candidates.end());
    // A noiseless periodic prefix has no seasonal-naive scale; the lag-1
    // scale keeps such folds comparable across candidates.
    const Metric metric = [&](std::span<const double> a, std::span<const double> f, std::span<const double> in) {
        try {
            return mase(a, f, in, cfg.season);
        } catch (const MetricError &) {
            if (cfg.season <= 1) throw;
            return mase(a, f, in, 1);
        }
    };
    for (auto kind : sel.candidates) {
        const CVForecaster fc = [&, kind](std::span<const double> train, const Matrix &x, std::size_t h) {
            return fit_model(kind, train, x, cfg)->forecast(train, x, h);
        };
        try {
            auto res = expanding_window_cv(y, exog, fc, cv, metric);
            sel.cv_mase.emplace_back(res.mean);
            for (auto &w : res.warnings) sel.warnings.push_back(std::string(to_string(kind)) + ": " + w);
        } catch (const Error &e) {
            sel.cv_mase.emplace_back(std::nullopt);
            sel.warnings.push_back(std::string(to_string(kind)) + " failed: " + e.what());
        }
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < sel.candidates.size(); ++i) {
        if (sel.cv_mase[i] && std::isfinite(*sel.cv_mase[i])) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return *sel.cv_mase[a] < *sel.cv_mase[b]; });
    for (std::size_t i : order) {
        try {
            sel.model = fit_model(sel.candidates[i], y, exog, cfg);
            return sel;
        } catch (const Error &e) {
            sel.warnings.push_back(std::string(to_string(sel.candidates[i])) + " refit failed: " + e.what());
        }
    }
    throw FitError("no candidate model could be fitted");
}

} // namespace hts
