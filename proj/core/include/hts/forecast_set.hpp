#pragma once

#include "hts/calendar.hpp"
#include "hts/types.hpp"

#include <string>
#include <vector>

namespace hts {

// Per-node forecasts over a horizon. Columns follow the canonical node
// order of the hierarchy; the method tag "BASE" marks unreconciled output.
struct ForecastSet {
    std::string method;
    std::vector<std::string> node_ids;
    std::vector<Timestamp> timestamps;
    Matrix values; // H x M

    bool is_base() const { return method == "BASE"; }
    std::size_t horizon() const { return timestamps.size(); }
};

} // namespace hts
