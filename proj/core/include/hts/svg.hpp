#pragma once

#include "hts/calendar.hpp"
#include "hts/evaluate.hpp"

#include <string>
#include <vector>

namespace hts {

// Mean rank dots with +-CD/2 bars, best method on top.
std::string nemenyi_svg(const NemenyiResult &result, const std::vector<std::string> &methods,
                        const std::string &title = "");

struct PlotSeries {
    std::string label;
    std::vector<double> values; // aligned with the plot timestamps
};

// Actual values against one or more forecasts over time.
std::string line_plot_svg(const std::string &title, const std::vector<Timestamp> &timestamps,
                          const std::vector<PlotSeries> &series);

} // namespace hts
