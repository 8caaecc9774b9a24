#include "hts/evaluate.hpp"

#include "hts/error.hpp"
#include "hts/io.hpp"
#include "hts/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace hts {

using json = nlohmann::json;

double mase(std::span<const double> actual, std::span<const double> forecast, std::span<const double> insample,
            std::size_t m) {
    if (actual.size() != forecast.size() || actual.empty()) {
        throw DataError("mase: actual and forecast must be non-empty and of equal length");
    }
    if (m == 0 || insample.size() <= m) {
        throw MetricError("mase: in-sample length must exceed the seasonal period");
    }
    double num = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        num += std::abs(actual[i] - forecast[i]);
    }
    num /= static_cast<double>(actual.size());
    double den = 0.0;
    for (std::size_t t = m; t < insample.size(); ++t) {
        den += std::abs(insample[t] - insample[t - m]);
    }
    den /= static_cast<double>(insample.size() - m);
    if (!(den > 0.0)) {
        throw MetricError("mase: in-sample seasonal naive error is zero");
    }
    return num / den;
}

double smape(std::span<const double> actual, std::span<const double> forecast) {
    if (actual.size() != forecast.size() || actual.empty()) {
        throw DataError("smape: actual and forecast must be non-empty and of equal length");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double den = std::abs(actual[i]) + std::abs(forecast[i]);
        if (den == 0.0) {
            throw MetricError("smape: undefined at a step where actual and forecast are both zero");
        }
        sum += std::abs(actual[i] - forecast[i]) / den;
    }
    return 2.0 * sum / static_cast<double>(actual.size());
}

// ---------------------------------------------------------------- CV

void CVConfig::validate(std::size_t length) const {
    if (horizon == 0 || step == 0) {
        throw ConfigError("cross-validation horizon and step must be positive");
    }
    if (starting_window == 0) {
        throw ConfigError("cross-validation starting window must be positive");
    }
    if (starting_window > ending_window) {
        throw ConfigError("cross-validation starting window exceeds ending window");
    }
    if (length < horizon || ending_window > length - horizon) {
        throw ConfigError("cross-validation ending window " + std::to_string(ending_window) +
                          " leaves no room for a " + std::to_string(horizon) + "-step test window in " +
                          std::to_string(length) + " observations");
    }
}

std::vector<std::size_t> CVConfig::fold_train_lengths(std::size_t length) const {
    validate(length);
    std::vector<std::size_t> out;
    for (std::size_t n = starting_window; n <= ending_window && n + horizon <= length; n += step) {
        out.push_back(n);
    }
    return out;
}

CVResult expanding_window_cv(std::span<const double> y, const Matrix &exog, const CVForecaster &forecaster,
                             const CVConfig &cfg, const Metric &metric) {
    CVResult result;
    const auto folds = cfg.fold_train_lengths(y.size());
    for (std::size_t n : folds) {
        try {
            const Matrix fold_exog = exog.topRows(static_cast<Index>(std::min<std::size_t>(n + cfg.horizon, exog.rows())));
            const Vector fc = forecaster(y.subspan(0, n), fold_exog, cfg.horizon);
            if (static_cast<std::size_t>(fc.size()) != cfg.horizon || !fc.allFinite()) {
                throw NumericError("forecaster returned a malformed forecast");
            }
            const double score =
                metric(y.subspan(n, cfg.horizon), {fc.data(), cfg.horizon}, y.subspan(0, n));
            result.fold_scores.push_back(score);
            result.fold_train_lengths.push_back(n);
        } catch (const Error &e) {
            result.warnings.push_back("fold with " + std::to_string(n) + " training points skipped: " + e.what());
        }
    }
    if (result.fold_scores.empty()) {
        throw NumericError("every cross-validation fold failed");
    }
    result.mean = std::accumulate(result.fold_scores.begin(), result.fold_scores.end(), 0.0) /
                  static_cast<double>(result.fold_scores.size());
    return result;
}

// ---------------------------------------------------------------- rank tests

FriedmanResult friedman_test(const Matrix &errors) {
    const auto n = static_cast<std::size_t>(errors.rows());
    const auto k = static_cast<std::size_t>(errors.cols());
    if (n < 2 || k < 2) {
        throw ConfigError("Friedman test needs at least two series and two methods");
    }
    FriedmanResult r;
    r.series = n;
    r.methods = k;
    r.mean_ranks.assign(k, 0.0);
    std::vector<double> row(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            row[j] = errors(static_cast<Index>(i), static_cast<Index>(j));
        }
        const auto ranks = stats::average_ranks(row);
        for (std::size_t j = 0; j < k; ++j) {
            r.mean_ranks[j] += ranks[j];
        }
    }
    double sum_sq = 0.0;
    for (auto &rank : r.mean_ranks) {
        rank /= static_cast<double>(n);
        sum_sq += rank * rank;
    }
    const double N = static_cast<double>(n);
    const double K = static_cast<double>(k);
    r.statistic = 12.0 * N / (K * (K + 1.0)) * sum_sq - 3.0 * N * (K + 1.0);
    if (std::abs(r.statistic) < 1e-10) {
        r.statistic = 0.0;
    }
    r.p_value = stats::chi_square_sf(r.statistic, K - 1.0);
    return r;
}

bool NemenyiResult::different(std::size_t a, std::size_t b) const {
    return std::abs(mean_ranks[a] - mean_ranks[b]) > critical_distance;
}

NemenyiResult nemenyi_test(const Matrix &errors, double alpha) {
    const auto fr = friedman_test(errors);
    NemenyiResult r;
    r.alpha = alpha;
    r.mean_ranks = fr.mean_ranks;
    r.friedman_p_value = fr.p_value;
    r.friedman_rejected = fr.p_value < alpha;
    const double k = static_cast<double>(fr.methods);
    r.q_alpha = stats::nemenyi_q(fr.methods, alpha);
    r.critical_distance = r.q_alpha * std::sqrt(k * (k + 1.0) / (6.0 * static_cast<double>(fr.series)));
    for (double rank : r.mean_ranks) {
        r.intervals.emplace_back(rank - r.critical_distance / 2.0, rank + r.critical_distance / 2.0);
    }
    r.order.resize(fr.methods);
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return r.mean_ranks[a] < r.mean_ranks[b]; });
    return r;
}

// ---------------------------------------------------------------- report

EvalReport build_report(const Hierarchy &h, const Matrix &actual_test, const Matrix &insample,
                        const std::vector<ForecastSet> &forecasts, std::size_t season, bool with_smape) {
    if (forecasts.empty()) {
        throw ConfigError("nothing to evaluate: no forecast sets");
    }
    const auto M = static_cast<Index>(h.size());
    const auto k = static_cast<Index>(forecasts.size());
    if (actual_test.cols() != M || insample.cols() != M) {
        throw DataError("evaluation data does not match the hierarchy");
    }
    EvalReport report;
    report.season = season;
    for (const auto &node : h.nodes()) {
        report.node_ids.push_back(node.id);
        report.levels.push_back(node.level);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.mase = Matrix::Constant(M, k, nan);
    if (with_smape) {
        report.smape = Matrix::Constant(M, k, nan);
    }
    report.flags.assign(h.size(), "");
    std::set<std::string> seen;
    for (Index j = 0; j < k; ++j) {
        const auto &fs = forecasts[static_cast<std::size_t>(j)];
        if (!seen.insert(fs.method).second) {
            throw ConfigError("method '" + fs.method + "' evaluated twice");
        }
        report.methods.push_back(fs.method);
        if (fs.values.rows() != actual_test.rows() || fs.values.cols() != M) {
            throw DataError("forecast set '" + fs.method + "' does not cover the held-out period");
        }
    }
    for (Index i = 0; i < M; ++i) {
        const Vector actual = actual_test.col(i);
        const Vector history = insample.col(i);
        for (Index j = 0; j < k; ++j) {
            const Vector fc = forecasts[static_cast<std::size_t>(j)].values.col(i);
            auto flag = [&](const std::string &what) {
                auto &f = report.flags[static_cast<std::size_t>(i)];
                if (f.find(what) == std::string::npos) {
                    f += (f.empty() ? "" : ";") + what;
                }
            };
            try {
                report.mase(i, j) = mase({actual.data(), static_cast<std::size_t>(actual.size())},
                                         {fc.data(), static_cast<std::size_t>(fc.size())},
                                         {history.data(), static_cast<std::size_t>(history.size())}, season);
            } catch (const MetricError &) {
                flag("mase_undefined");
            }
            if (with_smape) {
                try {
                    report.smape(i, j) = smape({actual.data(), static_cast<std::size_t>(actual.size())},
                                               {fc.data(), static_cast<std::size_t>(fc.size())});
                } catch (const MetricError &) {
                    flag("smape_undefined");
                }
            }
        }
    }
    return report;
}

void add_rank_tests(EvalReport &report, double alpha) {
    if (report.methods.size() < 2) {
        throw ConfigError("rank tests need at least two methods (k >= 2), got " + std::to_string(report.methods.size()));
    }
    std::vector<Index> rows;
    for (Index i = 0; i < report.mase.rows(); ++i) {
        if (report.mase.row(i).allFinite()) {
            rows.push_back(i);
        }
    }
    if (rows.size() < 2) {
        throw ConfigError("rank tests need at least two series with defined MASE");
    }
    Matrix errors(static_cast<Index>(rows.size()), report.mase.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        errors.row(static_cast<Index>(r)) = report.mase.row(rows[r]);
    }
    report.friedman = friedman_test(errors);
    report.nemenyi = nemenyi_test(errors, alpha);
}

std::vector<LevelAverage> level_averages(const EvalReport &report, const Hierarchy &h) {
    std::vector<LevelAverage> out;
    for (int level = 0; level < h.levels(); ++level) {
        for (std::size_t j = 0; j < report.methods.size(); ++j) {
            LevelAverage avg;
            avg.level = level;
            avg.method = report.methods[j];
            double sum = 0.0, ssum = 0.0;
            std::size_t scount = 0;
            for (std::size_t i = 0; i < report.node_ids.size(); ++i) {
                if (report.levels[i] != level) {
                    continue;
                }
                const double v = report.mase(static_cast<Index>(i), static_cast<Index>(j));
                if (std::isfinite(v)) {
                    sum += v;
                    ++avg.series;
                } else {
                    ++avg.excluded;
                }
                if (report.has_smape()) {
                    const double s = report.smape(static_cast<Index>(i), static_cast<Index>(j));
                    if (std::isfinite(s)) {
                        ssum += s;
                        ++scount;
                    }
                }
            }
            avg.mase = avg.series > 0 ? sum / static_cast<double>(avg.series) : std::numeric_limits<double>::quiet_NaN();
            if (report.has_smape() && scount > 0) {
                avg.smape = ssum / static_cast<double>(scount);
            }
            out.push_back(std::move(avg));
        }
    }
    return out;
}

namespace {

json number_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

std::string cell(double v) {
    return std::isfinite(v) ? format_number(v) : "";
}

} // namespace

std::string EvalReport::to_json() const {
    json j;
    j["methods"] = methods;
    j["season"] = season;
    json series = json::array();
    for (std::size_t i = 0; i < node_ids.size(); ++i) {
        json s = {{"node_id", node_ids[i]}, {"level", levels[i]}};
        json m = json::object();
        json sm = json::object();
        for (std::size_t k = 0; k < methods.size(); ++k) {
            m[methods[k]] = number_or_null(mase(static_cast<Index>(i), static_cast<Index>(k)));
            if (has_smape()) {
                sm[methods[k]] = number_or_null(smape(static_cast<Index>(i), static_cast<Index>(k)));
            }
        }
        s["mase"] = m;
        if (has_smape()) {
            s["smape"] = sm;
        }
        if (!flags[i].empty()) {
            s["flag"] = flags[i];
        }
        series.push_back(std::move(s));
    }
    j["series"] = std::move(series);

    int depth = 0;
    for (int l : levels) {
        depth = std::max(depth, l + 1);
    }
    json levels_json = json::array();
    for (int level = 0; level < depth; ++level) {
        json entry = {{"level", level}};
        json m = json::object();
        json sm = json::object();
        for (std::size_t k = 0; k < methods.size(); ++k) {
            double sum = 0.0, ssum = 0.0;
            std::size_t n = 0, sn = 0;
            for (std::size_t i = 0; i < node_ids.size(); ++i) {
                if (levels[i] != level) continue;
                const double v = mase(static_cast<Index>(i), static_cast<Index>(k));
                if (std::isfinite(v)) {
                    sum += v;
                    ++n;
                }
                if (has_smape()) {
                    const double s = smape(static_cast<Index>(i), static_cast<Index>(k));
                    if (std::isfinite(s)) {
                        ssum += s;
                        ++sn;
                    }
                }
            }
            m[methods[k]] = n ? json(sum / static_cast<double>(n)) : json(nullptr);
            if (has_smape()) {
                sm[methods[k]] = sn ? json(ssum / static_cast<double>(sn)) : json(nullptr);
            }
        }
        entry["mase"] = m;
        if (has_smape()) {
            entry["smape"] = sm;
        }
        levels_json.push_back(std::move(entry));
    }
    j["level_averages"] = std::move(levels_json);

    if (friedman) {
        j["friedman"] = {{"statistic", friedman->statistic},
                         {"p_value", friedman->p_value},
                         {"mean_ranks", friedman->mean_ranks},
                         {"series", friedman->series},
                         {"methods", friedman->methods},
                         {"approximation", "chi-square, k-1 degrees of freedom"}};
    }
    if (nemenyi) {
        json order = json::array();
        for (std::size_t idx : nemenyi->order) {
            order.push_back({{"method", methods[idx]},
                             {"mean_rank", nemenyi->mean_ranks[idx]},
                             {"interval", {nemenyi->intervals[idx].first, nemenyi->intervals[idx].second}}});
        }
        j["nemenyi"] = {{"alpha", nemenyi->alpha},
                        {"q_alpha", nemenyi->q_alpha},
                        {"critical_distance", nemenyi->critical_distance},
                        {"friedman_rejected", nemenyi->friedman_rejected},
                        {"ranking", order}};
    }
    if (!warnings.empty()) {
        j["warnings"] = warnings;
    }
    return j.dump(2) + "\n";
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "metric,series,level";
    for (const auto &m : methods) {
        out << ',' << m;
    }
    out << '\n';
    auto table = [&](const char *name, const Matrix &values) {
        for (std::size_t i = 0; i < node_ids.size(); ++i) {
            out << name << ',' << node_ids[i] << ',' << levels[i];
            for (std::size_t k = 0; k < methods.size(); ++k) {
                out << ',' << cell(values(static_cast<Index>(i), static_cast<Index>(k)));
            }
            out << '\n';
        }
        int depth = 0;
        for (int l : levels) {
            depth = std::max(depth, l + 1);
        }
        for (int level = 0; level < depth; ++level) {
            out << name << ",average_level_" << level << ',' << level;
            for (std::size_t k = 0; k < methods.size(); ++k) {
                double sum = 0.0;
                std::size_t n = 0;
                for (std::size_t i = 0; i < node_ids.size(); ++i) {
                    const double v = values(static_cast<Index>(i), static_cast<Index>(k));
                    if (levels[i] == level && std::isfinite(v)) {
                        sum += v;
                        ++n;
                    }
                }
                out << ',' << (n ? format_number(sum / static_cast<double>(n)) : "");
            }
            out << '\n';
        }
    };
    table("mase", mase);
    if (has_smape()) {
        table("smape", smape);
    }
    return out.str();
}

} // namespace hts
