#pragma once

#include "hts/forecast_set.hpp"
#include "hts/hierarchy.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace hts {

// Shortest round-trip decimal form; identical bytes for identical doubles.
std::string format_number(double value);

// node_id,parent_id,level (empty parent_id marks the root)
Hierarchy read_hierarchy_csv(const std::filesystem::path &path);
void write_hierarchy_csv(const std::filesystem::path &path, const Hierarchy &h);

// timestamp,node_id,value
SeriesPanel read_observations_csv(const std::filesystem::path &path, const Hierarchy &h);
void write_observations_csv(const std::filesystem::path &path, const Hierarchy &h, const SeriesPanel &panel);

// timestamp,node_id,variable,value; every listed (node, variable) pair must
// be present at every panel timestamp.
void read_exogenous_csv(const std::filesystem::path &path, const Hierarchy &h, SeriesPanel &panel);
void write_exogenous_csv(const std::filesystem::path &path, const Hierarchy &h, const SeriesPanel &panel);

// Reads observations (+ optional regressors), validates coherence within
// eps and derives interior regressors.
SeriesPanel load_panel(const Hierarchy &h, const std::filesystem::path &observations,
                       const std::optional<std::filesystem::path> &exogenous, double eps = 1e-6);

// timestamp,node_id,forecast,method
void write_forecast_csv(const std::filesystem::path &path, const ForecastSet &fs);
void write_forecast_csv(std::ostream &out, const ForecastSet &fs, bool header = true);
// Reads one method's rows (or the only method present when `method` is empty).
ForecastSet read_forecast_csv(const std::filesystem::path &path, const Hierarchy &h, const std::string &method = "");
std::vector<std::string> forecast_csv_methods(const std::filesystem::path &path);

void write_text_file(const std::filesystem::path &path, const std::string &content);
std::string read_text_file(const std::filesystem::path &path);

} // namespace hts
