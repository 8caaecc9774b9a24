#pragma once

#include "hts/calendar.hpp"
#include "hts/hierarchy.hpp"
#include "hts/neuralnet.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hts {

struct WindowConfig {
    std::size_t w = 30; // covers t-w+1 .. t, so w = l + 1 lags including t
    std::size_t hop = 1;

    void validate() const;
};

struct Window {
    std::vector<double> values;
    std::size_t target = 0; // zero-based index of the last element
};

// Windows end at t = w-1, w-1+hop, ... Throws DataError if the series is
// shorter than w.
std::vector<Window> make_windows(std::span<const double> series, const WindowConfig &cfg);

// Regressors of `children` at row t (canonical child order), then calendar
// dummies. Throws DataError when t is outside the panel.
std::vector<double> assemble_features(const SeriesPanel &panel, const std::vector<std::size_t> &children, std::size_t t,
                                      const CalendarSpec &calendar);
std::size_t feature_width(const SeriesPanel &panel, const std::vector<std::size_t> &children,
                          const CalendarSpec &calendar);

struct NndConfig {
    WindowConfig window;
    CalendarSpec calendar;
    std::size_t filters = 16;
    std::size_t kernel = 4;
    std::size_t units = 64;
    std::size_t conv_layers = 6;
    std::size_t mlp_layers = 3;
    bool grid_search = false;
    nn::GridSpace grid;
    nn::TrainConfig train; // train.seed is the root seed of every model
    std::size_t jobs = 1;
};

// One trained parent -> children network with its feature recipe.
struct DisaggregationModel {
    std::string parent;
    std::vector<std::string> children;
    std::size_t parent_index = 0;
    std::vector<std::size_t> child_indices;
    WindowConfig window;
    CalendarSpec calendar;
    std::uint64_t seed = 0;
    nn::TrainedNetwork network;
    std::optional<nn::GridResult> grid;
};

// Seed of the model rooted at `parent`: derive_seed(root, "nnd/<parent id>").
std::uint64_t model_seed(std::uint64_t root, const std::string &parent_id);

// Training examples from rows [0, rows) of the panel.
nn::Dataset build_dataset(const Hierarchy &h, const SeriesPanel &panel, std::size_t parent,
                          const std::vector<std::size_t> &children, std::size_t rows, const NndConfig &cfg);

// Step 1: trains on rows [0, rows). Children may be any descendant set.
DisaggregationModel train_nnd(const Hierarchy &h, const SeriesPanel &panel, std::size_t parent,
                              const std::vector<std::size_t> &children, std::size_t rows, const NndConfig &cfg);

struct Disaggregation {
    Matrix children;              // h x c
    double abs_sum_gap = 0.0;     // sum_t |1'c_t - parent_t|
    double abs_parent = 0.0;      // sum_t |parent_t|
};

// Step 2: child forecasts for rows origin .. origin+h-1. Windows combine
// actual parent values before `origin` with the forecasts already consumed.
// Regressors are read from the panel, which must cover the horizon.
Disaggregation disaggregate(const DisaggregationModel &model, const SeriesPanel &panel, std::size_t origin,
                            const Vector &parent_forecast);

enum class NndStrategy { NND1, NND2, MiddleOut };

// A set of models cascading from `start_level` down to the bottom.
struct NndEnsemble {
    NndStrategy strategy = NndStrategy::NND2;
    int start_level = 0;
    std::vector<DisaggregationModel> models; // canonical parent order
    std::uint64_t hierarchy_hash = 0;
};

// NND1: one root -> bottom model. NND2: one model per non-leaf node.
// MiddleOut: one model per non-leaf node at or below `level`.
// Sibling models train in parallel on cfg.jobs threads.
NndEnsemble train_ensemble(const Hierarchy &h, const SeriesPanel &panel, std::size_t rows, NndStrategy strategy,
                           const NndConfig &cfg, int level = 0);

struct NndForecast {
    Matrix values;         // h x M, re-aggregated from the bottom level
    double raw_gap = 0.0;  // pooled sum |1'children - parent|
    double raw_scale = 0.0;

    double raw_coherence() const { return raw_scale > 0.0 ? raw_gap / raw_scale : 0.0; }
};

// start_forecasts: h x m_{start_level} forecasts of the starting level.
NndForecast forecast_ensemble(const NndEnsemble &ens, const Hierarchy &h, const SummingMatrix &S,
                              const SeriesPanel &panel, std::size_t origin, const Matrix &start_forecasts);

// Directory with one weight file per model and manifest.json.
void save_bundle(const std::filesystem::path &dir, const NndEnsemble &ens, const NndConfig &cfg);
NndEnsemble load_bundle(const std::filesystem::path &dir, const Hierarchy &h);

std::string to_string(NndStrategy s);

} // namespace hts
